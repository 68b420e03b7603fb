#include "caloron/runner.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "caloron/instanton.hpp"

namespace caloron {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json grid_json(const GridSpec& g) {
  return json{{"nw", g.nw}, {"rw", g.rw},   {"nu", g.nu},
              {"nphi", g.nphi}, {"eps", g.eps}, {"delta", g.delta}};
}

std::string hash_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_diagnostics_csv(const std::string& path, const RunConfig& cfg,
                           const FlowDiagnostics& d) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  os << "# config_hash=" << hash_hex(cfg.config_hash()) << "\n";
  os << "t,iter,sup_b,energy_b,sigma_drift,dist_ratio\n";
  for (const auto& s : d.series)
    os << fmt17(s.t) << ',' << s.iter << ',' << fmt17(s.sup_b) << ',' << fmt17(s.energy_b)
       << ',' << fmt17(s.sigma_drift) << ',' << fmt17(s.dist_ratio) << "\n";
}

}  // namespace

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string RunConfig::canonical() const {
  json j;
  j["map"] = json::parse(map_text);
  j["grid"] = grid_json(grid);
  j["flow"] = {{"dt", flow.dt},           {"cfl_safety", flow.cfl_safety},
               {"accelerated", flow.accelerated}, {"t_max", flow.t_max},
               {"tol_b", flow.tol_b},     {"check_every", flow.check_every},
               {"max_iters", flow.max_iters}};
  j["observables"] = {{"charge", obs_charge}, {"energy", obs_energy}, {"decay", obs_decay}};
  j["exhaust"] = exhaust_schedule;
  j["seed"] = seed;
  return j.dump();  // keys emitted in sorted order
}

std::uint64_t RunConfig::config_hash() const { return fnv1a(canonical()); }

RunConfig parse_run_config(const std::string& text, const std::string& base_dir) {
  json j = json::parse(text);
  RunConfig cfg;
  if (j.contains("map"))
    cfg.map_text = j.at("map").dump();
  else if (j.contains("map_file"))
    cfg.map_text = read_file((std::filesystem::path(base_dir) /
                              j.at("map_file").get<std::string>()).string());
  else
    throw std::invalid_argument("config: need 'map' or 'map_file'");

  if (j.contains("grid")) {
    const json& g = j.at("grid");
    if (g.contains("nw")) cfg.grid.nw = g.at("nw").get<int>();
    if (g.contains("rw")) cfg.grid.rw = g.at("rw").get<double>();
    if (g.contains("nu")) cfg.grid.nu = g.at("nu").get<int>();
    if (g.contains("nphi")) cfg.grid.nphi = g.at("nphi").get<int>();
    if (g.contains("eps")) cfg.grid.eps = g.at("eps").get<double>();
    if (g.contains("delta")) cfg.grid.delta = g.at("delta").get<double>();
  }
  cfg.grid.validate();

  if (j.contains("flow")) {
    const json& f = j.at("flow");
    if (f.contains("dt")) cfg.flow.dt = f.at("dt").get<double>();
    if (f.contains("cfl_safety")) cfg.flow.cfl_safety = f.at("cfl_safety").get<double>();
    if (f.contains("accelerated")) cfg.flow.accelerated = f.at("accelerated").get<bool>();
    if (f.contains("t_max")) cfg.flow.t_max = f.at("t_max").get<double>();
    if (f.contains("tol_b")) cfg.flow.tol_b = f.at("tol_b").get<double>();
    if (f.contains("check_every")) cfg.flow.check_every = f.at("check_every").get<int>();
    if (f.contains("max_iters")) cfg.flow.max_iters = f.at("max_iters").get<long>();
    if (cfg.flow.cfl_safety <= 0.0 || cfg.flow.check_every <= 0 || cfg.flow.max_iters <= 0)
      throw std::invalid_argument("config: flow steps must be positive");
  }
  if (j.contains("observables")) {
    const json& o = j.at("observables");
    if (o.contains("charge")) cfg.obs_charge = o.at("charge").get<bool>();
    if (o.contains("energy")) cfg.obs_energy = o.at("energy").get<bool>();
    if (o.contains("decay")) cfg.obs_decay = o.at("decay").get<bool>();
  }
  if (j.contains("exhaust"))
    cfg.exhaust_schedule =
        j.at("exhaust").get<std::vector<std::pair<double, double>>>();
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("resume")) cfg.resume = j.at("resume").get<std::string>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

int cmd_run(const RunConfig& cfg) {
  EtaField e;
  try {
    e = load_map_json(cfg.map_text);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "invalid map input: %s\n", ex.what());
    return 1;
  }
  ProductGrid g(cfg.grid);
  EtaCache cache(g, e);

  MetricField h;
  try {
    if (!cfg.resume.empty()) {
      Checkpoint c = read_checkpoint(cfg.resume);
      ProductGrid gc(c.spec);
      if (c.spec.nw != cfg.grid.nw || c.spec.nu != cfg.grid.nu ||
          c.spec.nphi != cfg.grid.nphi || c.n != e.dim)
        throw std::runtime_error("resume checkpoint does not match the configured grid");
      h = checkpoint_field(c, g);
    } else {
      h.h = initial_metric(e.a, g);
    }
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "invalid input: %s\n", ex.what());
    return 1;
  }

  FlowDiagnostics diag = run_flow(h, cache, e.a, cfg.flow);

  std::filesystem::create_directories(cfg.output_dir);
  auto out = [&](const std::string& name) {
    return (std::filesystem::path(cfg.output_dir) / name).string();
  };
  write_diagnostics_csv(out("diagnostics.csv"), cfg, diag);
  write_checkpoint(out("final.ckpt"), cfg.grid, h);

  json obs;
  obs["config_hash"] = hash_hex(cfg.config_hash());
  obs["grid"] = grid_json(cfg.grid);
  obs["map"] = {{"dim", e.dim}, {"mu", e.mu}, {"K", e.K}, {"a", e.a}};
  obs["seed"] = cfg.seed;
  obs["flow"] = {{"converged", diag.converged},
                 {"iters", h.iter},
                 {"t", h.t},
                 {"final_sup_b", diag.series.empty() ? 0.0 : diag.series.back().sup_b},
                 {"abort_reason", diag.abort_reason}};
  if (cfg.obs_charge) {
    QuadResult k = charge(e);
    QuadResult d = degree(e);
    obs["charge"] = {{"value", k.value}, {"error", k.error}};
    obs["degree"] = {{"value", d.value}, {"error", d.error}};
  }
  CurvatureField f;
  if (cfg.obs_energy || cfg.obs_decay) f = curvature(connection_from_pair(h.h, cache));
  if (cfg.obs_energy) {
    EnergyReport er = energy(f, h.h, cache);
    AsdResidual ar = asd_residual(f, h.h, cache);
    obs["energy"] = {{"total", er.energy},
                     {"sd_part", er.sd_energy},
                     {"charge_4d", er.charge_4d},
                     {"identity_gap", er.identity_gap}};
    obs["asd"] = {{"sup", ar.sup}, {"l2", ar.l2}, {"hym_gap", ar.hym_gap}};
  }
  if (cfg.obs_decay) {
    CaloronSample cs = caloron_fields(h.h, cache, e.a, e.mu, &f);
    DecayReport dr = decay_report(cs, e.a);
    obs["decay"] = {{"phi_dev_exponent", dr.phi_dev.exponent},
                    {"phi_dev_stderr", dr.phi_dev.stderr_exp},
                    {"f_norm_exponent", dr.f_norm.exponent},
                    {"f_norm_stderr", dr.f_norm.stderr_exp},
                    {"r_min", dr.r_min},
                    {"r_max", dr.r_max},
                    {"theta_spread", dr.theta_spread}};
  }
  if (!cfg.exhaust_schedule.empty()) {
    try {
      ExhaustReport ex = exhaust(e, e.a, cfg.grid, cfg.exhaust_schedule, cfg.flow);
      json pairs = json::array();
      for (const auto& p : ex.pairs)
        pairs.push_back({{"sup_sigma", p.sup_sigma},
                         {"ratio", p.ratio},
                         {"delta_ring_sigma", p.delta_ring_sigma}});
      json members = json::array();
      for (const auto& m : ex.members)
        members.push_back({{"eps", m.spec.eps},
                           {"delta", m.spec.delta},
                           {"nu", m.spec.nu},
                           {"sup_dist_ratio", m.sup_dist_ratio}});
      obs["exhaust"] = {{"members", members}, {"pairs", pairs}};
    } catch (const std::exception& ex2) {
      obs["exhaust"] = {{"error", ex2.what()}};
    }
  }
  std::ofstream os(out("observables.json"));
  os << obs.dump(2) << "\n";

  return diag.converged ? 0 : 2;
}

namespace {

struct CheckTable {
  bool all_pass = true;
  void row(const std::string& name, bool pass, double value) {
    std::printf("%-44s %s  %.3e\n", name.c_str(), pass ? "PASS" : "FAIL", value);
    if (!pass) all_pass = false;
  }
};

}  // namespace

int cmd_verify(const RunConfig& cfg) {
  EtaField e;
  try {
    e = load_map_json(cfg.map_text);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "invalid map input: %s\n", ex.what());
    return 1;
  }
  ProductGrid g(cfg.grid);
  CheckTable t;

  // Stationarity of the boundary metric without source.
  {
    EtaField zero;
    zero.dim = e.dim;
    zero.mu = e.mu;
    zero.a = e.a;
    EtaCache zc(g, zero);
    MatrixField hxi = initial_metric(e.a, g);
    MatrixField b = hym_tensor(hxi, zc);
    double sup = 0.0;
    for (size_t id = 0; id < g.num_nodes(); ++id)
      sup = std::max(sup, h_norm(hxi.at(id), b.at(id)));
    t.row("stationarity sup|B(H_xi,0)|", sup <= 1e-10, sup);
  }

  EtaCache cache(g, e);

  // Unitarity of the source connection where the reference metric is trivial.
  {
    std::vector<double> a0(static_cast<size_t>(e.dim), 0.0);
    ConnectionField ac = approx_connection(a0, cache);
    double sup = 0.0;
    for (size_t id = 0; id < g.num_nodes(); ++id)
      sup = std::max(sup,
                     (CMat(ac.aw.at(id)) + CMat(ac.awbar.at(id)).adjoint()).norm());
    t.row("unitary frame A_w = -(A_wbar)*", sup <= 1e-12, sup);
  }

  // Charge equals degree within combined quadrature error.
  if (!e.is_zero()) {
    QuadResult k = charge(e);
    QuadResult d = degree(e);
    double gap = std::abs(k.value - d.value);
    double tol = k.error + d.error + 2e-2;
    t.row("charge vs degree", gap <= tol, gap);
  }

  // Short flow: positivity kept, sup|B| non-increasing within slack.
  {
    FlowConfig fc = cfg.flow;
    fc.max_iters = std::min<long>(fc.max_iters, 20L * fc.check_every);
    MetricField h;
    h.h = initial_metric(e.a, g);
    bool ok = true;
    double worst = 0.0;
    try {
      FlowDiagnostics d = run_flow(h, cache, e.a, fc);
      for (size_t i = 1; i < d.series.size(); ++i) {
        double rise = d.series[i].sup_b - d.series[i - 1].sup_b;
        worst = std::max(worst, rise);
      }
      ok = worst <= 1e-8;
    } catch (const std::exception&) {
      ok = false;
    }
    t.row("flow monitor sup|B| non-increasing", ok, worst);
  }

  // Gauge invariance of the topological density under a random constant
  // unitary frame rotation (exactly covariant for the sampled operator).
  {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    CMat x = CMat::Zero(e.dim, e.dim);
    for (int r = 0; r < e.dim; ++r)
      for (int c = 0; c < e.dim; ++c) x(r, c) = cplx(nd(rng), nd(rng));
    CMat gg = expm(0.5 * (x - CMat(x.adjoint())));
    CMat gi = gg.inverse();

    MatrixField hxi = initial_metric(e.a, g);
    ConnectionField a1 = connection_from_pair(hxi, cache);
    ConnectionField a2 = a1;
    for (size_t id = 0; id < g.num_nodes(); ++id) {
      a2.aw.at(id) = gg * CMat(a1.aw.at(id)) * gi;
      a2.awbar.at(id) = gg * CMat(a1.awbar.at(id)) * gi;
      a2.az.at(id) = gg * CMat(a1.az.at(id)) * gi;
      a2.azbar.at(id) = gg * CMat(a1.azbar.at(id)) * gi;
    }
    CurvatureField f1 = curvature(a1);
    CurvatureField f2 = curvature(a2);
    double sup = 0.0, scale = 0.0;
    for (size_t id = 0; id < g.num_nodes(); ++id) {
      auto dens = [&](const CurvatureField& f) {
        return 2.0 * ((CMat(f.f12.at(id)) * CMat(f.f34.at(id))).trace() -
                      (CMat(f.f13.at(id)) * CMat(f.f24.at(id))).trace() +
                      (CMat(f.f14.at(id)) * CMat(f.f23.at(id))).trace())
                         .real();
      };
      double d1 = dens(f1), d2 = dens(f2);
      sup = std::max(sup, std::abs(d1 - d2));
      scale = std::max(scale, std::abs(d1));
    }
    double rel = sup / std::max(scale, 1e-300);
    t.row("gauge invariance tr(F^F) density", rel <= 1e-10, rel);
  }

  return t.all_pass ? 0 : 3;
}

int cmd_export(const std::string& checkpoint, const std::string& format,
               const std::string& out_path, double mu) {
  Checkpoint c;
  try {
    c = read_checkpoint(checkpoint);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "export: %s\n", ex.what());
    return 1;
  }
  ProductGrid g(c.spec);
  const MetricField h = checkpoint_field(c, g);
  const int n = c.n;

  if (format == "csv") {
    std::ofstream os(out_path);
    if (!os) {
      std::fprintf(stderr, "export: cannot write '%s'\n", out_path.c_str());
      return 1;
    }
    os << "i,j,k,l,xw,yw,u,phi,t,x1,x2,x3";
    for (int r = 0; r < n; ++r)
      for (int cc = 0; cc < n; ++cc) os << ",re_h" << r << cc << ",im_h" << r << cc;
    os << "\n";
    for (int i = 0; i < g.nw(); ++i)
      for (int j = 0; j < g.nw(); ++j)
        for (int k = 0; k < g.nu(); ++k)
          for (int l = 0; l < g.nphi(); ++l) {
            CaloronPoint p = to_caloron_coords(g.w(i, j), g.z(k, l), mu);
            os << i << ',' << j << ',' << k << ',' << l << ',' << fmt17(g.xw(i)) << ','
               << fmt17(g.yw(j)) << ',' << fmt17(g.u(k)) << ',' << fmt17(g.phi(l)) << ','
               << fmt17(p.t) << ',' << fmt17(p.x[0]) << ',' << fmt17(p.x[1]) << ','
               << fmt17(p.x[2]);
            CMapConst m = h.h.at(i, j, k, l);
            for (int r = 0; r < n; ++r)
              for (int cc = 0; cc < n; ++cc)
                os << ',' << fmt17(m(r, cc).real()) << ',' << fmt17(m(r, cc).imag());
            os << "\n";
          }
    return 0;
  }
  if (format == "json") {
    json j;
    j["grid"] = grid_json(c.spec);
    j["n"] = n;
    j["t"] = c.t;
    j["iter"] = c.iter;
    std::vector<double> flat;
    flat.reserve(c.data.size() * 2);
    for (cplx v : c.data) {
      flat.push_back(v.real());
      flat.push_back(v.imag());
    }
    j["h_interleaved"] = flat;
    std::ofstream os(out_path);
    if (!os) {
      std::fprintf(stderr, "export: cannot write '%s'\n", out_path.c_str());
      return 1;
    }
    os << j.dump() << "\n";
    return 0;
  }
  if (format == "vtk") {
    // Legacy structured grid of the phi = 0 slice in (xw, yw, u).
    std::ofstream os(out_path);
    if (!os) {
      std::fprintf(stderr, "export: cannot write '%s'\n", out_path.c_str());
      return 1;
    }
    os << "# vtk DataFile Version 3.0\n";
    os << "metric field, phi=0 slice\nASCII\nDATASET STRUCTURED_GRID\n";
    os << "DIMENSIONS " << g.nu() << ' ' << g.nw() << ' ' << g.nw() << "\n";
    size_t npts = static_cast<size_t>(g.nu()) * g.nw() * g.nw();
    os << "POINTS " << npts << " double\n";
    for (int i = 0; i < g.nw(); ++i)
      for (int j = 0; j < g.nw(); ++j)
        for (int k = 0; k < g.nu(); ++k)
          os << fmt17(g.xw(i)) << ' ' << fmt17(g.yw(j)) << ' ' << fmt17(g.u(k)) << "\n";
    os << "POINT_DATA " << npts << "\n";
    os << "SCALARS tr_h double 1\nLOOKUP_TABLE default\n";
    for (int i = 0; i < g.nw(); ++i)
      for (int j = 0; j < g.nw(); ++j)
        for (int k = 0; k < g.nu(); ++k)
          os << fmt17(CMat(h.h.at(i, j, k, 0)).trace().real()) << "\n";
    os << "SCALARS log_det_h double 1\nLOOKUP_TABLE default\n";
    for (int i = 0; i < g.nw(); ++i)
      for (int j = 0; j < g.nw(); ++j)
        for (int k = 0; k < g.nu(); ++k) {
          double ld = std::log(std::abs(CMat(h.h.at(i, j, k, 0)).determinant()));
          os << fmt17(ld) << "\n";
        }
    return 0;
  }
  std::fprintf(stderr, "export: unknown format '%s' (csv, json, vtk)\n", format.c_str());
  return 1;
}

}  // namespace caloron
