#include "caloron/rational.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace caloron {

Poly2 Poly2::constant(cplx c) {
  Poly2 p;
  p.add_term(0, 0, c);
  return p;
}

Poly2 Poly2::var_w() {
  Poly2 p;
  p.add_term(1, 0, 1.0);
  return p;
}

Poly2 Poly2::var_W() {
  Poly2 p;
  p.add_term(0, 1, 1.0);
  return p;
}

void Poly2::add_term(int pw, int pW, cplx c) {
  if (pw < 0 || pW < 0) throw std::invalid_argument("Poly2: negative exponent");
  terms_[{pw, pW}] += c;
  trim();
}

void Poly2::trim() {
  for (auto it = terms_.begin(); it != terms_.end();)
    it = (it->second == cplx(0.0)) ? terms_.erase(it) : std::next(it);
}

Poly2 Poly2::operator+(const Poly2& o) const {
  Poly2 p = *this;
  for (const auto& [k, c] : o.terms_) p.terms_[k] += c;
  p.trim();
  return p;
}

Poly2 Poly2::operator-(const Poly2& o) const { return *this + (-o); }

Poly2 Poly2::operator-() const {
  Poly2 p = *this;
  for (auto& [k, c] : p.terms_) c = -c;
  return p;
}

Poly2 Poly2::operator*(const Poly2& o) const {
  Poly2 p;
  for (const auto& [ka, ca] : terms_)
    for (const auto& [kb, cb] : o.terms_)
      p.terms_[{ka.first + kb.first, ka.second + kb.second}] += ca * cb;
  p.trim();
  return p;
}

Poly2 Poly2::operator*(cplx c) const {
  Poly2 p = *this;
  for (auto& [k, v] : p.terms_) v *= c;
  p.trim();
  return p;
}

Poly2 Poly2::d_dw() const {
  Poly2 p;
  for (const auto& [k, c] : terms_)
    if (k.first > 0) p.terms_[{k.first - 1, k.second}] += c * double(k.first);
  p.trim();
  return p;
}

Poly2 Poly2::d_dW() const {
  Poly2 p;
  for (const auto& [k, c] : terms_)
    if (k.second > 0) p.terms_[{k.first, k.second - 1}] += c * double(k.second);
  p.trim();
  return p;
}

Poly2 Poly2::conj() const {
  Poly2 p;
  for (const auto& [k, c] : terms_) p.terms_[{k.second, k.first}] += std::conj(c);
  p.trim();
  return p;
}

cplx Poly2::eval(cplx w) const {
  cplx wb = std::conj(w);
  cplx out = 0.0;
  for (const auto& [k, c] : terms_)
    out += c * std::pow(w, k.first) * std::pow(wb, k.second);
  return out;
}

bool Poly2::is_zero(double tol) const {
  for (const auto& [k, c] : terms_)
    if (std::abs(c) > tol) return false;
  return true;
}

int Poly2::total_degree() const {
  int d = -1;
  for (const auto& [k, c] : terms_) d = std::max(d, k.first + k.second);
  return d;
}

std::string Poly2::str() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [k, c] : terms_) {
    if (!first) os << " + ";
    first = false;
    os << "(" << c.real() << (c.imag() < 0 ? "-" : "+") << std::abs(c.imag()) << "i)";
    if (k.first > 0) os << "*w^" << k.first;
    if (k.second > 0) os << "*W^" << k.second;
  }
  return os.str();
}

Rational::Rational(Poly2 num, Poly2 den) : num_(std::move(num)), den_(std::move(den)) {
  if (den_.is_zero()) throw std::invalid_argument("Rational: zero denominator");
}

Rational Rational::constant(cplx c) { return Rational(Poly2::constant(c), Poly2::constant(1.0)); }

Rational Rational::operator+(const Rational& o) const {
  return Rational(num_ * o.den_ + o.num_ * den_, den_ * o.den_);
}

Rational Rational::operator-(const Rational& o) const { return *this + (-o); }

Rational Rational::operator-() const { return Rational(-num_, den_); }

Rational Rational::operator*(const Rational& o) const {
  return Rational(num_ * o.num_, den_ * o.den_);
}

Rational Rational::operator/(const Rational& o) const {
  if (o.num_.is_zero()) throw std::invalid_argument("Rational: division by zero function");
  return Rational(num_ * o.den_, den_ * o.num_);
}

Rational Rational::d_dw() const {
  return Rational(num_.d_dw() * den_ - num_ * den_.d_dw(), den_ * den_);
}

Rational Rational::d_dW() const {
  return Rational(num_.d_dW() * den_ - num_ * den_.d_dW(), den_ * den_);
}

Rational Rational::conj() const { return Rational(num_.conj(), den_.conj()); }

cplx Rational::eval(cplx w) const {
  cplx d = den_.eval(w);
  if (std::abs(d) < 1e-300) throw std::runtime_error("Rational: pole at evaluation point");
  return num_.eval(w) / d;
}

bool Rational::is_zero(double tol) const { return num_.is_zero(tol); }

bool Rational::depends_on_w() const {
  for (const auto& [k, c] : num_.terms())
    if (k.first > 0) return true;
  for (const auto& [k, c] : den_.terms())
    if (k.first > 0) return true;
  return false;
}

std::string Rational::str() const { return "(" + num_.str() + ")/(" + den_.str() + ")"; }

namespace {

struct Parser {
  const std::string& s;
  size_t pos = 0;

  explicit Parser(const std::string& text) : s(text) {}

  void skip() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }

  bool eat(char c) {
    skip();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  char peek() {
    skip();
    return pos < s.size() ? s[pos] : '\0';
  }

  Poly2 expr() {
    Poly2 p = eat('-') ? -term() : (eat('+'), term());
    for (;;) {
      if (eat('+'))
        p = p + term();
      else if (eat('-'))
        p = p - term();
      else
        break;
    }
    return p;
  }

  Poly2 term() {
    Poly2 p = factor();
    while (eat('*')) p = p * factor();
    return p;
  }

  Poly2 factor() {
    Poly2 p = atom();
    if (eat('^')) {
      skip();
      size_t start = pos;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
      if (pos == start) throw std::invalid_argument("poly parse: integer expected after '^'");
      int e = std::stoi(s.substr(start, pos - start));
      Poly2 out = Poly2::constant(1.0);
      for (int i = 0; i < e; ++i) out = out * p;
      return out;
    }
    return p;
  }

  Poly2 atom() {
    char c = peek();
    if (c == '(') {
      eat('(');
      Poly2 p = expr();
      if (!eat(')')) throw std::invalid_argument("poly parse: missing ')'");
      return p;
    }
    if (c == '-') {
      eat('-');
      return -factor();
    }
    if (c == 'w') {
      ++pos;
      return Poly2::var_w();
    }
    if (c == 'W') {
      ++pos;
      return Poly2::var_W();
    }
    if (c == 'i') {
      ++pos;
      return Poly2::constant(cplx(0.0, 1.0));
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      size_t start = pos;
      while (pos < s.size() &&
             (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.' ||
              s[pos] == 'e' || s[pos] == 'E' ||
              ((s[pos] == '+' || s[pos] == '-') && pos > start &&
               (s[pos - 1] == 'e' || s[pos - 1] == 'E'))))
        ++pos;
      double v = std::stod(s.substr(start, pos - start));
      if (pos < s.size() && s[pos] == 'i') {
        ++pos;
        return Poly2::constant(cplx(0.0, v));
      }
      return Poly2::constant(v);
    }
    throw std::invalid_argument("poly parse: unexpected character '" + std::string(1, c) + "'");
  }
};

}  // namespace

Poly2 parse_poly(const std::string& text) {
  Parser p(text);
  Poly2 out = p.expr();
  p.skip();
  if (p.pos != text.size())
    throw std::invalid_argument("poly parse: trailing input in '" + text + "'");
  return out;
}

Rational parse_rational(const std::string& num, const std::string& den) {
  return Rational(parse_poly(num), parse_poly(den));
}

}  // namespace caloron
