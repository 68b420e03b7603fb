#ifndef CALORON_RATIONAL_HPP
#define CALORON_RATIONAL_HPP

#include <map>
#include <string>
#include <utility>

#include "caloron/matrix.hpp"

namespace caloron {

// Polynomial in the two formal variables w and W (= conj w) with complex
// coefficients. Evaluation substitutes W = conj(w), so these represent
// rational-in-(w, conj w) functions entrywise.
class Poly2 {
 public:
  using Key = std::pair<int, int>;  // (power of w, power of W)

  Poly2() = default;
  static Poly2 constant(cplx c);
  static Poly2 var_w();
  static Poly2 var_W();

  Poly2 operator+(const Poly2& o) const;
  Poly2 operator-(const Poly2& o) const;
  Poly2 operator*(const Poly2& o) const;
  Poly2 operator*(cplx c) const;
  Poly2 operator-() const;

  Poly2 d_dw() const;
  Poly2 d_dW() const;
  // Complex conjugate as a function of w: conjugates coefficients and swaps
  // the roles of w and W.
  Poly2 conj() const;

  cplx eval(cplx w) const;
  bool is_zero(double tol = 0.0) const;
  int total_degree() const;
  std::string str() const;

  const std::map<Key, cplx>& terms() const { return terms_; }
  void add_term(int pw, int pW, cplx c);

 private:
  void trim();
  std::map<Key, cplx> terms_;
};

// num/den pair; den must not be identically zero.
class Rational {
 public:
  Rational() : num_(), den_(Poly2::constant(1.0)) {}
  Rational(Poly2 num, Poly2 den);
  static Rational constant(cplx c);

  Rational operator+(const Rational& o) const;
  Rational operator-(const Rational& o) const;
  Rational operator*(const Rational& o) const;
  Rational operator/(const Rational& o) const;
  Rational operator-() const;

  Rational d_dw() const;
  Rational d_dW() const;
  Rational conj() const;

  cplx eval(cplx w) const;  // throws on a pole at w
  bool is_zero(double tol = 0.0) const;
  bool depends_on_w() const;

  const Poly2& num() const { return num_; }
  const Poly2& den() const { return den_; }
  std::string str() const;

 private:
  Poly2 num_, den_;
};

// Parses the polynomial grammar: complex literals (e.g. 2, 1.5, i, 2i),
// variables w and W, operators + - * ^, parentheses.
Poly2 parse_poly(const std::string& text);

// Accepts either a bare polynomial string or "num" with a separate "den".
Rational parse_rational(const std::string& num, const std::string& den = "1");

}  // namespace caloron

#endif
