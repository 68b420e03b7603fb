#ifndef CALORON_HYMFLOW_HPP
#define CALORON_HYMFLOW_HPP

#include <string>
#include <vector>

#include "caloron/geometry.hpp"
#include "caloron/holomap.hpp"
#include "caloron/looporbit.hpp"

namespace caloron {

// Flow variable: positive-definite Hermitian H per node, pinned to H_xi on
// the Dirichlet boundary.
struct MetricField {
  MatrixField h;
  double t = 0.0;
  long iter = 0;
};

struct FlowConfig {
  double dt = 0.0;          // uniform explicit step; 0 derives it from the CFL bound
  double cfl_safety = 0.2;  // fraction of the CFL coefficient actually used
  bool accelerated = true;  // implicit steps in t, each solved by an inner
                            // relaxation; needed on grids whose CFL step is
                            // orders of magnitude below the flow timescale
  double t_max = 2048.0;
  double tol_b = 1e-6;
  int check_every = 50;     // explicit path: iterations between monitor samples
  long max_iters = 500000;
};

struct FlowSample {
  double t = 0.0;
  long iter = 0;
  double sup_b = 0.0;       // sup over interior nodes of |B|_H
  double energy_b = 0.0;    // int |B|^2 dvol
  double sigma_drift = 0.0; // sup sigma(H(t), H(t+tau)) at fixed lag tau; the
                            // explicit path uses the next sample as H(t+tau),
                            // the accelerated path one exponential move
  double dist_ratio = 0.0;  // max d(H, H_xi) / ln(1 - ln|z|)
};

struct FlowDiagnostics {
  std::vector<FlowSample> series;
  bool converged = false;
  std::string abort_reason;
};

// eta and its analytic w-derivative sampled once per node (they do not move
// during the flow), plus the CFL coefficient per (w,u) column.
class EtaCache {
 public:
  EtaCache(const ProductGrid& g, const EtaField& e);
  const MatrixField& eta() const { return eta_; }
  const MatrixField& deta_dw() const { return deta_; }
  bool zero() const { return zero_; }
  int n() const { return eta_.n(); }
  // Orbit exponents (diagonal of i xi0); define the analytic ghost
  // extension of the Dirichlet data past the grid edges.
  const std::vector<double>& a() const { return a_; }

 private:
  MatrixField eta_, deta_;
  std::vector<double> a_;
  bool zero_;
};

// H_xi = diag(|z|^{2 a_j}) for the constant diagonal orbit datum.
MatrixField initial_metric(const std::vector<double>& a, const ProductGrid& g);
MatrixField initial_metric(const LoopAlgebraElement& xi0, const ProductGrid& g);

// Hermitian-Yang-Mills tensor B(H, eta) per interior node (boundary nodes 0):
// B = u^2 d_zetabar(H^{-1} d_zeta H)
//     + (1+|w|^2)^2 { d_wbar(H^{-1} d_w H) - d_wbar(H^{-1} eta^* H)
//                     - d_w eta + [eta, H^{-1} d_w H - H^{-1} eta^* H] }.
// H-derivatives are second-order differences, eta-derivatives analytic.
MatrixField hym_tensor(const MatrixField& h, const EtaCache& cache);

// CFL bound: dt <= cfl_safety / max_i c_i with
// c = 4 (u^2 (1/h_u^2 + 1/h_phi^2) + (1+|w|^2)^2 / h_w^2).
double cfl_coefficient_max(const ProductGrid& g);

// One explicit step H -> H exp(dt Bhat) at interior nodes, Bhat the
// H-self-adjoint part of B; boundary nodes stay H_xi. Positivity and
// Hermiticity are preserved by construction.
MetricField flow_step(const MetricField& h, const EtaCache& cache, double dt);

// Drives H to a zero of B. Explicit path (accelerated = false): uniform
// steps under the CFL bound, monitors sampled every check_every iterations.
// Accelerated path: backward steps H_{n+1} = H_n exp(dt_n B(H_{n+1})) with a
// doubling dt_n schedule, each solved by momentum-accelerated node-local
// relaxation of G = B - log(H_n^{-1}H)/dt_n; monitors are sampled at the
// outer points, which follow the flow trajectory, so the monotonicity
// diagnostics apply to the recorded series even on stiff grids where the
// explicit step would be orders of magnitude below the flow timescale.
FlowDiagnostics run_flow(MetricField& h, const EtaCache& cache,
                         const std::vector<double>& a, const FlowConfig& cfg);

// Convenience: build grid-side objects and run.
std::pair<MetricField, FlowDiagnostics> run_flow(const EtaField& e,
                                                 const std::vector<double>& a,
                                                 const ProductGrid& g,
                                                 const FlowConfig& cfg);

struct ExhaustMember {
  GridSpec spec;
  FlowDiagnostics diag;
  double sup_dist_ratio = 0.0;
};

struct ExhaustPairReport {
  double sup_sigma = 0.0;  // between consecutive solutions on the common domain
  double ratio = 0.0;      // sup_sigma / |ln eps_i|
  double delta_ring_sigma = 0.0;  // sup sigma(H, H_xi) on the ring nearest |z| = delta
};

struct ExhaustReport {
  std::vector<ExhaustMember> members;
  std::vector<ExhaustPairReport> pairs;
};

// Runs the flow over a schedule of decreasing eps / increasing delta. Every
// member grid lives on one arithmetic u-lattice (eps, delta snapped) so the
// solutions can be compared node-by-node on the common domain.
ExhaustReport exhaust(const EtaField& e, const std::vector<double>& a,
                      const GridSpec& base, const std::vector<std::pair<double, double>>& schedule,
                      const FlowConfig& cfg);

// Checkpoint I/O (binary, versioned).
struct Checkpoint {
  GridSpec spec;
  int n = 0;
  double t = 0.0;
  long iter = 0;
  std::vector<cplx> data;
};
void write_checkpoint(const std::string& path, const GridSpec& spec, const MetricField& h);
Checkpoint read_checkpoint(const std::string& path);
MetricField checkpoint_field(const Checkpoint& c, const ProductGrid& g);

// sup over interior nodes of sigma(H1(x), H2(x)); fields on the same grid.
double sup_sigma(const MatrixField& h1, const MatrixField& h2);

// max over interior nodes of d(H, H_xi)/ln(1 - ln|z|).
double dist_ratio(const MatrixField& h, const std::vector<double>& a);

}  // namespace caloron

#endif
