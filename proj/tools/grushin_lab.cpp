// grushin-lab: command-line front end for the spectral checks.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <boost/version.hpp>
#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "grushin_lab/error.hpp"
#include "grushin_lab/grushin.hpp"
#include "grushin_lab/io.hpp"
#include "grushin_lab/parallel.hpp"
#include "grushin_lab/semiclassics.hpp"
#include "grushin_lab/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace grushin_lab;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { ok = 0, solver_error = 1, check_failed = 2, config_error = 64, io_error = 74 };

struct RunConfig {
  std::string command;
  std::string potential;
  std::string cls = "P1";
  double alpha = 0.5;
  std::vector<double> vartheta{0.0, 0.25};
  std::vector<double> r{0.5, 1.0, 2.0};
  std::vector<double> x_prime{0.0, 1.0, 4.0};
  double lambda = 100;
  double A = 1;
  std::vector<double> x;
  int n_max = 10;
  std::string inequality = "pointwise_psi";
  double eps = 0.1;
  double delta = 1.0;
  double kappa_max = 64;
  int grid_points = 1024;
  double rel_tol = 1e-10;
  double residual_target = 1e-6;
  std::string multiplier = "bump";
  double order = 1.0;
  int piece = 2;
  int fiber_cap = 32;
  bool slice = false;
  std::string out_dir = ".";
  int threads = default_threads();
};

// Fields that change results; paths and thread count are excluded so that
// the hash identifies the computation.
json to_json(const RunConfig& c) {
  return {{"command", c.command},
          {"potential", c.potential},
          {"class", c.cls},
          {"alpha", c.alpha},
          {"vartheta", c.vartheta},
          {"r", c.r},
          {"x_prime", c.x_prime},
          {"lambda", c.lambda},
          {"A", c.A},
          {"x", c.x},
          {"n_max", c.n_max},
          {"inequality", c.inequality},
          {"eps", c.eps},
          {"delta", c.delta},
          {"kappa_max", c.kappa_max},
          {"grid_points", c.grid_points},
          {"rel_tol", c.rel_tol},
          {"residual_target", c.residual_target},
          {"multiplier", c.multiplier},
          {"order", c.order},
          {"piece", c.piece},
          {"fiber_cap", c.fiber_cap},
          {"slice", c.slice}};
}

void from_json_file(const fs::path& path, RunConfig& c) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, "config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "command") c.command = v.get<std::string>();
      else if (key == "potential") c.potential = v.get<std::string>();
      else if (key == "class") c.cls = v.get<std::string>();
      else if (key == "alpha") c.alpha = v.get<double>();
      else if (key == "vartheta") c.vartheta = v.get<std::vector<double>>();
      else if (key == "r") c.r = v.get<std::vector<double>>();
      else if (key == "x_prime") c.x_prime = v.get<std::vector<double>>();
      else if (key == "lambda") c.lambda = v.get<double>();
      else if (key == "A") c.A = v.get<double>();
      else if (key == "x") c.x = v.get<std::vector<double>>();
      else if (key == "n_max") c.n_max = v.get<int>();
      else if (key == "inequality") c.inequality = v.get<std::string>();
      else if (key == "eps") c.eps = v.get<double>();
      else if (key == "delta") c.delta = v.get<double>();
      else if (key == "kappa_max") c.kappa_max = v.get<double>();
      else if (key == "grid_points") c.grid_points = v.get<int>();
      else if (key == "rel_tol") c.rel_tol = v.get<double>();
      else if (key == "residual_target") c.residual_target = v.get<double>();
      else if (key == "multiplier") c.multiplier = v.get<std::string>();
      else if (key == "order") c.order = v.get<double>();
      else if (key == "piece") c.piece = v.get<int>();
      else if (key == "fiber_cap") c.fiber_cap = v.get<int>();
      else if (key == "slice") c.slice = v.get<bool>();
      else if (key == "out_dir") c.out_dir = v.get<std::string>();
      else if (key == "threads") c.threads = v.get<int>();
      else throw Error(ErrorKind::ConfigError, "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("bad config value: ") + e.what());
  }
}

void validate(const RunConfig& c) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw Error(ErrorKind::ConfigError, msg);
  };
  need(!c.potential.empty(), "--potential is required");
  need(c.n_max >= 1, "n_max must be at least 1");
  need(c.threads >= 1, "threads must be at least 1");
  need(c.rel_tol > 0 && c.residual_target > 0, "tolerances must be positive");
  need(c.kappa_max >= 1, "kappa_max must be at least 1");
  need(c.grid_points >= 16, "grid_points must be at least 16");
  need(c.lambda > 0 && c.A > 0, "lambda and A must be positive");
  need(c.eps > 0 && c.eps < 1, "eps must lie in (0, 1)");
  need(c.delta > 0, "delta must be positive");
  need(c.fiber_cap >= 1, "fiber_cap must be positive");
  for (double t : c.vartheta) need(t >= 0 && t < 0.5, "vartheta must lie in [0, 1/2)");
  for (double r : c.r) need(r > 0, "r must be positive");
}

EigenSolveConfig eig_config(const RunConfig& c) {
  EigenSolveConfig e;
  e.rel_tol_eigenvalue = c.rel_tol;
  e.residual_target = c.residual_target;
  e.validate();
  return e;
}

std::string family_name(const Potential& V) { return to_string(V.spec().family()); }

// Returns the command's exit status; output files are appended to `outputs`.
struct Context {
  RunConfig cfg;
  Potential V;
  fs::path dir;
  std::vector<std::string> outputs;

  void emit(const std::string& name, const std::string& text, bool echo = true) {
    write_text(dir / name, text);
    outputs.push_back(name);
    if (echo) std::cout << text;
  }
};

int cmd_certify(Context& ctx) {
  std::string name = ctx.cfg.cls;
  int k = 3;
  if (name.size() == 2 && name[0] == 'P' && name[1] >= '2' && name[1] <= '9') k = name[1] - '0';
  const PotentialClass cls = class_from_string(name);
  const auto cert = certify(ctx.V, cls, ctx.cfg.kappa_max, ctx.cfg.grid_points, k);
  ctx.emit("certificate.json", certificate_to_json(cert));
  return cert.pass ? ok : check_failed;
}

int cmd_spectrum(Context& ctx) {
  const auto eig = eig_config(ctx.cfg);
  const int N = ctx.cfg.n_max;
  std::vector<EigenPair> pairs(static_cast<std::size_t>(N));
  std::vector<std::size_t> zc(pairs.size());
  parallel_for(pairs.size(), ctx.cfg.threads, [&](std::size_t i) {
    pairs[i] = cached_eigenfunction(ctx.V, static_cast<int>(i) + 1, eig);
    zc[i] = zeros(pairs[i]).size();
  });
  CsvWriter csv({"n", "E", "residual", "norm_defect", "zeros_count"});
  int status = ok;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    csv.row(p.n, p.E, p.residual, p.norm_defect, zc[i]);
    if (zc[i] != i) status = check_failed;
  }
  ctx.emit("spectrum.csv", csv.str());
  return status;
}

int cmd_bs(Context& ctx) {
  const auto eig = eig_config(ctx.cfg);
  const int N = ctx.cfg.n_max;
  std::vector<BsError> rows(static_cast<std::size_t>(N));
  parallel_for(rows.size(), ctx.cfg.threads,
               [&](std::size_t i) { rows[i] = bs_log_error(ctx.V, static_cast<int>(i) + 1, eig); });
  CsvWriter csv({"n", "E", "phase", "err", "ratio"});
  int status = ok;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& b = rows[i];
    csv.row(i + 1, b.E, b.phase, b.err, b.ratio);
    if (!std::isfinite(b.ratio)) status = check_failed;
  }
  ctx.emit("bs.csv", csv.str());

  // scaling sweep at the configured lambda
  std::vector<std::pair<double, double>> sc(rows.size());
  parallel_for(sc.size(), ctx.cfg.threads, [&](std::size_t i) {
    const int n = static_cast<int>(i) + 1;
    const double tau = xi(ctx.V, n, ctx.cfg.lambda, eig);
    sc[i] = {tau, virial_ratio(ctx.V, n, tau, eig)};
  });
  CsvWriter scaling({"n", "lambda", "xi", "virial"});
  for (std::size_t i = 0; i < sc.size(); ++i) scaling.row(i + 1, ctx.cfg.lambda, sc[i].first, sc[i].second);
  ctx.emit("scaling.csv", scaling.str(), false);
  return status;
}

int cmd_bounds(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto eig = eig_config(c);
  BoundReport rep;
  rep.family = family_name(ctx.V);
  rep.alpha = c.alpha;
  int status = ok;
  CsvWriter csv({"inequality", "n", "x", "ratio"});

  if (c.inequality == "pointwise_psi" || c.inequality == "pointwise_dpsi") {
    rep.id = c.inequality == "pointwise_psi" ? Inequality::pointwise_psi : Inequality::pointwise_dpsi;
    rep.cls = to_string(require_class_for_alpha(ctx.V, c.alpha, c.kappa_max));
    const Quantity q = rep.id == Inequality::pointwise_psi ? Quantity::psi : Quantity::dpsi;
    rep.per_n.resize(static_cast<std::size_t>(c.n_max));
    parallel_for(rep.per_n.size(), c.threads, [&](std::size_t i) {
      const int n = static_cast<int>(i) + 1;
      const auto r = pointwise_ratio(ctx.V, cached_eigenfunction(ctx.V, n, eig), c.alpha, q);
      rep.per_n[i] = {n, r.sup_ratio, r.argmax_x};
    });
  } else if (c.inequality == "sonin_C3" || c.inequality == "sonin_power") {
    const bool c3 = c.inequality == "sonin_C3";
    rep.id = c3 ? Inequality::sonin_C3 : Inequality::sonin_power;
    rep.cls = c3 ? "P3" : to_string(require_class_for_alpha(ctx.V, c.alpha, c.kappa_max));
    rep.params["eps_or_delta"] = c3 ? c.eps : c.delta;
    if (c.n_max < 2) throw Error(ErrorKind::ConfigError, "Sonin checks need n_max >= 2");
    rep.per_n.resize(static_cast<std::size_t>(c.n_max - 1));
    parallel_for(rep.per_n.size(), c.threads, [&](std::size_t i) {
      const int n = static_cast<int>(i) + 2;
      const auto p = cached_eigenfunction(ctx.V, n, eig);
      const auto s = sonin_profile(ctx.V, p, c3 ? SoninVariant::C3 : SoninVariant::power, c3 ? c.eps : c.delta,
                                   c.alpha);
      double xm = 0, sm = -1;
      for (std::size_t j = 0; j < s.s.size(); ++j)
        if (s.s[j] > sm) sm = s.s[j], xm = s.x[j];
      rep.per_n[i] = {n, static_cast<double>(s.violations), xm};
    });
    for (const auto& e : rep.per_n)
      if (e.sup_ratio > 0) status = check_failed;
  } else if (c.inequality == "exp_decay") {
    rep.id = Inequality::exp_decay;
    rep.cls = "P1";
    std::vector<DecayFit> fits(static_cast<std::size_t>(c.n_max));
    parallel_for(fits.size(), c.threads, [&](std::size_t i) {
      fits[i] = exp_decay_fit(ctx.V, cached_eigenfunction(ctx.V, static_cast<int>(i) + 1, eig));
    });
    double cmin = INFINITY;
    for (std::size_t i = 0; i < fits.size(); ++i) {
      rep.per_n.push_back({static_cast<int>(i) + 1, fits[i].max_violation, fits[i].c_fit});
      cmin = std::min(cmin, fits[i].c_fit);
    }
    rep.params["min_c_fit"] = cmin;
    if (!(cmin > 0)) status = check_failed;
  } else {
    throw Error(ErrorKind::ConfigError, "unknown inequality '" + c.inequality + "'");
  }
  rep.finalize();
  for (const auto& e : rep.per_n) {
    csv.row(to_string(rep.id), e.n, e.argmax_x, e.sup_ratio);
    if (!std::isfinite(e.sup_ratio)) status = check_failed;
  }
  ctx.emit("bounds.csv", csv.str());
  ctx.emit("report.json", report_to_json(rep), false);
  return status;
}

int cmd_projector(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto eig = eig_config(c);
  const auto window = projector_window(ctx.V, c.lambda, c.A, eig);
  std::vector<double> xs = c.x;
  if (xs.empty()) {
    const double hi = 1.5 * half_inverse(ctx.V, Side::plus, 8 * c.A);
    const double lo = -1.5 * half_inverse(ctx.V, Side::minus, 8 * c.A);
    for (int i = 0; i <= 32; ++i) xs.push_back(lo + (hi - lo) * i / 32.0);
  }
  // decay rate from the ground state: higher states fall below the fit's
  // amplitude floor before reaching {V >= 4E}
  const double c_decay = exp_decay_fit(ctx.V, cached_eigenfunction(ctx.V, 1, eig)).c_fit;
  const auto res = projector_sum(ctx.V, c.lambda, c.A, xs, c_decay, eig);
  CsvWriter csv({"x", "sum", "ratio", "inside"});
  int status = ok;
  for (const auto& r : res) {
    csv.row(r.x, r.sum, r.ratio, r.inside ? 1 : 0);
    if (!std::isfinite(r.ratio)) status = check_failed;
  }
  ctx.emit("projector.csv", csv.str());

  json rep{{"inequality_id", "projector"}, {"family", family_name(ctx.V)}, {"lambda", c.lambda}, {"A", c.A},
           {"c_decay", c_decay}, {"window", json::array()}};
  for (const auto& w : window) rep["window"].push_back({{"n", w.n}, {"xi", w.xi}});
  if (!window.empty()) {
    const auto g = gap_log_check(ctx.V, c.lambda, c.A, eig);
    rep["gap_log"] = {{"max_ratio", g.max_ratio}, {"max_err", g.max_err}};
    if (!std::isfinite(g.max_ratio)) status = check_failed;
  }
  ctx.emit("report.json", rep.dump(2) + "\n", false);
  return status;
}

int cmd_plancherel(Context& ctx) {
  const auto& c = ctx.cfg;
  MultiplierSpec m;
  if (c.multiplier == "bump") m = bump();
  else if (c.multiplier == "riesz") m = riesz_fragment(c.order, c.piece);
  else throw Error(ErrorKind::ConfigError, "unknown multiplier '" + c.multiplier + "'");
  GrushinConfig g;
  g.fiber_cap = c.fiber_cap;
  g.threads = c.threads;
  const auto sweep = plancherel_sweep(m, ctx.V, c.vartheta, c.r, c.x_prime, g);
  CsvWriter csv({"r", "x_prime", "vartheta", "lhs", "sobolev_sq", "ratio"});
  int status = ok;
  for (const auto& row : sweep.rows) {
    csv.row(row.r, row.x_prime, row.vartheta, row.lhs, row.sobolev_sq, row.ratio);
    if (!std::isfinite(row.ratio)) status = check_failed;
  }
  ctx.emit("plancherel.csv", csv.str());
  json rep{{"max_ratio", sweep.max_ratio},
           {"min_ratio", sweep.min_ratio},
           {"median_ratio", sweep.median_ratio},
           {"max_over_min", sweep.uniformity},
           {"max_over_median", sweep.max_over_median}};
  ctx.emit("report.json", rep.dump(2) + "\n", false);

  if (c.slice) {
    const auto s = kernel_slice(m, ctx.V, c.r.front(), c.x_prime.front(), g);
    CsvWriter k({"x", "u", "K"});
    Grid grid{s.x.size(), s.u.size(), s.K};
    for (std::size_t i = 0; i < s.x.size(); ++i)
      for (std::size_t j = 0; j < s.u.size(); ++j) k.row(s.x[i], s.u[j], s.at(i, j));
    ctx.emit("kernel.csv", k.str(), false);
    write_grid(ctx.dir / "kernel.bin", grid);
    ctx.outputs.push_back("kernel.bin");
  }
  return status;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidSpec:
    case ErrorKind::NonPositiveInput:
    case ErrorKind::PreconditionViolated:
      return config_error;
    case ErrorKind::IoError: return io_error;
    case ErrorKind::MissingCertificate:
    case ErrorKind::NotCertified:
    case ErrorKind::InterlacingViolation:
      return check_failed;
    default: return solver_error;
  }
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"Spectral checks for doubling potentials and Grushin multipliers", "grushin-lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  std::string config_path;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run config; flags given on the command line take precedence");
    sub->add_option("--potential", cfg.potential, "potential JSON file");
    sub->add_option("--out-dir", cfg.out_dir, "directory for reports and the manifest");
    sub->add_option("--threads", cfg.threads, "worker threads");
    sub->add_option("--n-max", cfg.n_max, "largest eigenvalue index");
    sub->add_option("--rel-tol", cfg.rel_tol, "relative eigenvalue tolerance");
    sub->add_option("--residual-target", cfg.residual_target, "eigenfunction residual target");
  };
  auto* certify_cmd = app.add_subcommand("certify", "certify membership in a potential class");
  common(certify_cmd);
  certify_cmd->add_option("--class", cfg.cls, "P1, P1_uc, P1_cv, P3, ...");
  certify_cmd->add_option("--kappa-max", cfg.kappa_max, "largest accepted doubling constant");
  certify_cmd->add_option("--grid-points", cfg.grid_points, "log-spaced test points per half-line");
  auto* spectrum_cmd = app.add_subcommand("spectrum", "eigenvalues and eigenfunction diagnostics");
  common(spectrum_cmd);
  auto* bs_cmd = app.add_subcommand("bs", "Bohr-Sommerfeld errors and the scaling inverse");
  common(bs_cmd);
  bs_cmd->add_option("--lambda", cfg.lambda, "energy for the scaling sweep");
  auto* bounds_cmd = app.add_subcommand("bounds", "pointwise, Sonin and decay checks");
  common(bounds_cmd);
  bounds_cmd->add_option("--inequality", cfg.inequality,
                         "pointwise_psi, pointwise_dpsi, sonin_C3, sonin_power or exp_decay");
  bounds_cmd->add_option("--alpha", cfg.alpha, "exponent of the pointwise bound");
  bounds_cmd->add_option("--eps", cfg.eps, "width of the C3 Sonin region");
  bounds_cmd->add_option("--delta", cfg.delta, "log-width of the power Sonin region");
  bounds_cmd->add_option("--kappa-max", cfg.kappa_max, "largest accepted doubling constant");
  auto* projector_cmd = app.add_subcommand("projector", "spectral projector sums over an energy window");
  common(projector_cmd);
  projector_cmd->add_option("--lambda", cfg.lambda, "spectral parameter");
  projector_cmd->add_option("-A,--A", cfg.A, "window is lambda / Xi_n in [A, 2A]");
  projector_cmd->add_option("--x", cfg.x, "evaluation points");
  auto* plancherel_cmd = app.add_subcommand("plancherel", "weighted Plancherel sweep for the Grushin kernel");
  common(plancherel_cmd);
  plancherel_cmd->add_option("--multiplier", cfg.multiplier, "bump or riesz");
  plancherel_cmd->add_option("--order", cfg.order, "Riesz order");
  plancherel_cmd->add_option("--piece", cfg.piece, "Riesz dyadic piece, at least 2");
  plancherel_cmd->add_option("--vartheta", cfg.vartheta, "weight exponents in [0, 1/2)");
  plancherel_cmd->add_option("--r", cfg.r, "scales");
  plancherel_cmd->add_option("--x-prime", cfg.x_prime, "base points");
  plancherel_cmd->add_option("--fiber-cap", cfg.fiber_cap, "initial number of fibers");
  plancherel_cmd->add_flag("--slice", cfg.slice, "also export the kernel slice at the first (r, x')");

  // a config file supplies defaults, so load it before the flags are applied
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      try {
        from_json_file(argv[i + 1], cfg);
      } catch (const Error& e) {
        std::cerr << "grushin-lab: " << e.what() << "\n";
        return exit_code_for(e.kind());
      }
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return config_error;
  }
  cfg.command = app.get_subcommands().front()->get_name();

  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  int status = ok;
  std::string error_text;
  std::optional<Context> ctx;
  try {
    validate(cfg);
    ctx.emplace(Context{cfg, Potential(load_potential(cfg.potential)), fs::path(cfg.out_dir), {}});
    if (cfg.command == "certify") status = cmd_certify(*ctx);
    else if (cfg.command == "spectrum") status = cmd_spectrum(*ctx);
    else if (cfg.command == "bs") status = cmd_bs(*ctx);
    else if (cfg.command == "bounds") status = cmd_bounds(*ctx);
    else if (cfg.command == "projector") status = cmd_projector(*ctx);
    else status = cmd_plancherel(*ctx);
  } catch (const Error& e) {
    error_text = e.what();
    status = exit_code_for(e.kind());
  } catch (const std::exception& e) {
    error_text = e.what();
    status = solver_error;
  }
  const std::vector<std::string> outputs = ctx ? ctx->outputs : std::vector<std::string>{};
  if (!error_text.empty()) std::cerr << "grushin-lab: " << error_text << "\n";
  if (status == check_failed && error_text.empty()) std::cerr << "grushin-lab: check failed\n";

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const json cj = to_json(cfg);
  json manifest{{"tool", "grushin-lab"},
                {"version", kVersion},
                {"command", cfg.command},
                {"config", cj},
                {"config_hash", fmt::format("{:016x}", fnv1a(cj.dump()))},
                {"versions",
                 {{"grushin_lab", kVersion},
                  {"boost", BOOST_LIB_VERSION},
                  {"fmt", FMT_VERSION},
                  {"compiler", __VERSION__}}},
                {"threads", cfg.threads},
                {"started_at", started},
                {"wall_time_s", wall},
                {"outputs", outputs},
                {"exit_code", status}};
  if (!error_text.empty()) manifest["error"] = error_text;
  try {
    write_text(fs::path(cfg.out_dir) / "manifest.json", manifest.dump(2) + "\n");
  } catch (const Error& e) {
    std::cerr << "grushin-lab: " << e.what() << "\n";
    if (status == ok) status = io_error;
  }
  return status;
}
