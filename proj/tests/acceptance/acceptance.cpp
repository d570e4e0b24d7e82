// Acceptance run: one PASS/FAIL line per criterion. Arguments select a
// subset of criteria by number; the default runs all of them.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/special_functions/airy.hpp>
#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include "grushin_lab/error.hpp"
#include "grushin_lab/grushin.hpp"
#include "grushin_lab/io.hpp"
#include "grushin_lab/parallel.hpp"
#include "grushin_lab/potential.hpp"
#include "grushin_lab/schrodinger.hpp"
#include "grushin_lab/semiclassics.hpp"
#include "grushin_lab/verify.hpp"

namespace fs = std::filesystem;
using namespace grushin_lab;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------- oracles

// |x| levels: even states at -a'_k (zeros of Ai'), odd states at -a_k.
double airy_level(int n) {
  const int k = (n + 1) / 2;
  if (n % 2 == 0) return -boost::math::airy_ai_zero<double>(k);
  // zero of Ai' between a_{k} and a_{k-1} (or above a_1)
  const double hi = k == 1 ? 0.0 : boost::math::airy_ai_zero<double>(k - 1);
  const double lo = boost::math::airy_ai_zero<double>(k);
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve([](double x) { return boost::math::airy_ai_prime(x); }, lo, hi,
                                                   boost::math::tools::eps_tolerance<double>(50), iters);
  return -0.5 * (r.first + r.second);
}

// ---------------------------------------------------------------- families

struct Family {
  std::string name;
  PotentialSpec spec;
  bool convex = false;     // P1_cv certified
  bool smooth = false;     // smooth power d >= 2, P3 pairing
  bool logp = false;       // P1_uc pairing with alpha 0.3, 0.4
  bool envelope = false;   // criterion 5
  bool sonin_c3 = false;   // criterion 9, C3 variant
  bool ortho = false;      // criterion 3
};

std::vector<Family> families() {
  std::vector<Family> f;
  auto add = [&](std::string name, PotentialSpec s) {
    Family fam;
    fam.name = std::move(name);
    fam.spec = std::move(s);
    f.push_back(fam);
    return &f.back();
  };
  add("|x|^0.5", power(0.5));
  add("|x|", power(1))->ortho = true;
  add("|x|^1.5", power(1.5))->envelope = true;
  {
    auto* x2 = add("x^2", power(2));
    x2->envelope = x2->sonin_c3 = x2->ortho = x2->smooth = true;
  }
  {
    auto* x3 = add("|x|^3", power(3));
    x3->sonin_c3 = x3->ortho = x3->smooth = true;
  }
  {
    auto* x4 = add("|x|^4", power(4));
    x4->sonin_c3 = x4->smooth = true;
  }
  add("two_power(1,3)", two_power(1, 3))->ortho = true;
  add("power_asym(2,4)", power_asym(2, 4));
  add("power_logperturbed(2,0.2)", power_logperturbed(2, 0.2))->logp = true;
  for (auto& fam : f) fam.convex = certify(Potential(fam.spec), PotentialClass::P1_cv, 64, 1024).pass;
  return f;
}

struct Pairing {
  std::string family;
  std::string cls;
  double alpha;
  Quantity which;
  std::vector<BoundEntry> per_n;
};

struct SharedRun {
  bool done = false;
  double seconds = 0;
  // criterion 3
  std::map<std::string, double> ortho_defect;
  // criterion 4
  std::map<std::string, int> zero_failures;
  // criterion 5
  std::map<std::string, std::pair<int, int>> envelope_violations;
  // criterion 8
  std::vector<Pairing> pairings;
  std::vector<std::string> class_failures;
  // criterion 9
  std::map<std::string, int> sonin_violations;
  std::vector<std::string> errors;
};

SharedRun& shared_run() {
  static SharedRun run;
  if (run.done) return run;
  const auto t0 = Clock::now();
  const int n_max = 200;
  const EigenSolveConfig cfg;
  for (const auto& fam : families()) {
    const Potential V(fam.spec);
    struct Alpha {
      double alpha;
      std::vector<std::string> classes;
    };
    std::vector<Alpha> alphas{{0.5, {"P1"}}};
    if (fam.convex && fam.spec.family() == grushin_lab::Family::power) {
      alphas.push_back({0.25, {"P1_cv"}});
      if (fam.smooth) alphas.back().classes.push_back("P3");
    }
    if (fam.logp) {
      alphas.push_back({0.3, {"P1_uc"}});
      alphas.push_back({0.4, {"P1_uc"}});
    }
    for (const auto& a : alphas) {
      for (const auto& cls : a.classes) {
        const PotentialClass pc = class_from_string(cls);
        if (!certify(V, pc, 64, 1024, 3).pass) run.class_failures.push_back(fam.name + " " + cls);
      }
    }

    struct PerN {
      bool zeros_ok = true;
      std::vector<SupRatio> ratios;  // (alpha, which) in order
      int g = 0, h = 0;
      std::map<std::string, int> sonin;
      std::string error;
    };
    std::vector<PerN> per(static_cast<std::size_t>(n_max));
    std::vector<EigenPair> kept(fam.ortho ? 50 : 0);
    parallel_for(per.size(), default_threads(), [&](std::size_t i) {
      const int n = static_cast<int>(i) + 1;
      auto& out = per[i];
      try {
        const EigenPair p = eigenfunction(V, n, cfg);
        out.zeros_ok = zeros(p).size() == static_cast<std::size_t>(n - 1);
        try {
          check_interlacing(p);
        } catch (const Error&) {
          out.zeros_ok = false;
        }
        for (const auto& a : alphas)
          for (Quantity q : {Quantity::psi, Quantity::dpsi}) out.ratios.push_back(pointwise_ratio(V, p, a.alpha, q));
        if (fam.envelope && n <= 100) {
          const auto e = envelope_check(V, p);
          out.g = e.g_violations;
          out.h = e.h_violations;
        }
        if (n >= 2 && n <= 100) {
          if (fam.sonin_c3)
            for (double eps : {0.05, 0.1})
              out.sonin[fmt::format("C3 eps={}", eps)] = sonin_profile(V, p, SoninVariant::C3, eps).violations;
          if (fam.convex) out.sonin["power"] = sonin_profile(V, p, SoninVariant::power, 1.0, 0.25).violations;
        }
        if (fam.ortho && n <= 50) kept[i] = p;
      } catch (const std::exception& e) {
        out.error = fmt::format("{} n={}: {}", fam.name, n, e.what());
      }
    });

    int zf = 0, g = 0, h = 0;
    for (const auto& pn : per) {
      if (!pn.error.empty()) {
        run.errors.push_back(pn.error);
        ++zf;
        continue;
      }
      zf += pn.zeros_ok ? 0 : 1;
      g += pn.g;
      h += pn.h;
      for (const auto& [k, v] : pn.sonin) run.sonin_violations[fam.name + " " + k] += v;
    }
    run.zero_failures[fam.name] = zf;
    if (fam.envelope) run.envelope_violations[fam.name] = {g, h};
    std::size_t slot = 0;
    for (const auto& a : alphas) {
      for (Quantity q : {Quantity::psi, Quantity::dpsi}) {
        for (const auto& cls : a.classes) {
          Pairing pr{fam.name, cls, a.alpha, q, {}};
          for (std::size_t i = 0; i < per.size(); ++i)
            if (per[i].error.empty())
              pr.per_n.push_back({static_cast<int>(i) + 1, per[i].ratios[slot].sup_ratio, per[i].ratios[slot].argmax_x});
          run.pairings.push_back(std::move(pr));
        }
        ++slot;
      }
    }
    if (fam.ortho) {
      double worst = 0;
      for (std::size_t a = 0; a < kept.size(); ++a)
        for (std::size_t b = a; b < kept.size(); ++b)
          worst = std::max(worst, std::abs(inner_product(kept[a], kept[b]) - (a == b ? 1.0 : 0.0)));
      run.ortho_defect[fam.name] = worst;
    }
    std::fprintf(stderr, "  [shared pass] %s done at %.1fs\n", fam.name.c_str(), seconds_since(t0));
  }
  run.seconds = seconds_since(t0);
  run.done = true;
  return run;
}

// ---------------------------------------------------------------- criteria

Outcome c1() {
  const auto t0 = Clock::now();
  const Potential V(power(2));
  double worst = 0;
  for (int n = 1; n <= 100; ++n) worst = std::max(worst, std::abs(eigenvalue(V, n) / (2 * n - 1) - 1));
  const double t = seconds_since(t0);
  return {worst <= 1e-8 && t <= 10, fmt::format("max rel err {:.2e} over n<=100, {:.2f}s", worst, t)};
}

Outcome c2() {
  const Potential V(power(1));
  double worst = 0;
  for (int n = 1; n <= 40; ++n) worst = std::max(worst, std::abs(eigenvalue(V, n) / airy_level(n) - 1));
  const bool anchors = std::abs(airy_level(1) - 1.0187930) < 1e-7 && std::abs(airy_level(2) - 2.3381074) < 1e-7;
  return {worst <= 1e-7 && anchors, fmt::format("max rel err {:.2e} over n<=40; E1, E2 anchors {}", worst,
                                                anchors ? "match" : "differ")};
}

Outcome c3() {
  auto& run = shared_run();
  double worst = 0;
  std::string s;
  for (const auto& [name, d] : run.ortho_defect) {
    worst = std::max(worst, d);
    s += fmt::format(" {}={:.1e}", name, d);
  }
  return {run.ortho_defect.size() == 4 && worst <= 1e-6, "max |<psi_n,psi_m> - delta|:" + s};
}

Outcome c4() {
  auto& run = shared_run();
  int total = 0;
  for (const auto& [name, f] : run.zero_failures) total += f;
  for (const auto& e : run.errors) std::fprintf(stderr, "  error: %s\n", e.c_str());
  return {total == 0 && run.errors.empty(),
          fmt::format("{} families x n<=200: {} count/interlacing failures, {} solver errors", run.zero_failures.size(),
                      total, run.errors.size())};
}

Outcome c5() {
  auto& run = shared_run();
  int total = 0;
  std::string s;
  for (const auto& [name, gh] : run.envelope_violations) {
    total += gh.first + gh.second;
    s += fmt::format(" {}: g={} h={}", name, gh.first, gh.second);
  }
  return {run.envelope_violations.size() == 2 && total == 0, "violations for n<=100:" + s};
}

Outcome c6() {
  const auto t0 = Clock::now();
  std::vector<std::pair<std::string, PotentialSpec>> fams{
      {"|x|^0.5", power(0.5)}, {"|x|", power(1)},   {"|x|^1.5", power(1.5)},          {"x^2", power(2)},
      {"|x|^3", power(3)},     {"|x|^4", power(4)}, {"two_power(1,3)", two_power(1, 3)}};
  bool ok = true;
  double x2_dev = 0, worst_growth = 0;
  for (const auto& [name, spec] : fams) {
    const Potential V(spec);
    std::vector<BsError> rows(200);
    parallel_for(rows.size(), default_threads(),
                 [&](std::size_t i) { rows[i] = bs_log_error(V, static_cast<int>(i) + 1); });
    double lo = 0, all = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!std::isfinite(rows[i].ratio)) ok = false;
      all = std::max(all, rows[i].ratio);
      if (i < 100) lo = std::max(lo, rows[i].ratio);
      if (name == "x^2") x2_dev = std::max(x2_dev, std::abs(rows[i].err - kPi / 2));
    }
    worst_growth = std::max(worst_growth, all / lo);
  }
  const double t = seconds_since(t0);
  ok = ok && x2_dev <= 1e-7 && worst_growth <= 1.1 && t <= 300;
  return {ok, fmt::format("x^2 max |err - pi/2| {:.2e}; worst growth n<=200 vs n<=100 {:.4f}; {:.1f}s", x2_dev,
                          worst_growth, t)};
}

Outcome c7() {
  double worst = 0, worst_hf = 0;
  for (double d : {1.0, 2.0, 4.0}) {
    const Potential V(power(d));
    for (int n : {1, 10, 50})
      for (double tau : {0.25, 1.0, 4.0}) {
        const auto v = virial(V, n, tau);
        worst = std::max(worst, std::abs(v.ratio - 2 / (d + 2)));
        worst_hf = std::max(worst_hf, std::abs(v.ratio - v.hellmann_feynman));
      }
  }
  return {worst <= 1e-5 && worst_hf <= 1e-6,
          fmt::format("max |ratio - 2/(d+2)| {:.2e}; finite difference vs Hellmann-Feynman {:.2e}", worst, worst_hf)};
}

Outcome c8() {
  auto& run = shared_run();
  bool ok = run.class_failures.empty() && !run.pairings.empty();
  double worst_trend = 0, worst_const = 0;
  std::string bad;
  for (auto& p : run.pairings) {
    BoundReport r;
    r.per_n = p.per_n;
    r.finalize();
    const bool good = std::isfinite(r.uniform_constant) && r.per_n.size() == 200 && r.trend <= 1.1;
    if (!good) {
      ok = false;
      bad += fmt::format(" [{} {} a={} {}: C={:.3g} trend={:.3g}]", p.family, p.cls, p.alpha,
                         p.which == Quantity::psi ? "psi" : "dpsi", r.uniform_constant, r.trend);
    }
    worst_trend = std::max(worst_trend, r.trend);
    worst_const = std::max(worst_const, r.uniform_constant);
  }
  for (const auto& c : run.class_failures) bad += " [missing certificate " + c + "]";
  return {ok, fmt::format("{} (family, class, alpha, quantity) reports; max constant {:.3f}, max trend {:.4f}{}", run.pairings.size(),
                          worst_const, worst_trend, bad)};
}

Outcome c9() {
  auto& run = shared_run();
  int total = 0;
  std::string bad;
  for (const auto& [k, v] : run.sonin_violations) {
    total += v;
    if (v) bad += fmt::format(" [{}: {}]", k, v);
  }
  return {total == 0 && run.sonin_violations.size() >= 9,
          fmt::format("{} (family, variant) runs over n in [2,100], {} violations{}", run.sonin_violations.size(),
                      total, bad)};
}

Outcome c10() {
  const Potential V(power(2));
  const auto w = projector_window(V, 100, 1);
  const bool window_ok = w.size() == 2 && w[0].n == 6 && w[1].n == 7;
  const auto g = gap_log_check(V, 100, 1);
  const bool gap_ok = std::abs(g.max_err - kPi / 2) <= 1e-6;
  const double c_decay = exp_decay_fit(V, 1).c_fit;
  bool finite = true;
  double worst_trend = 0;
  for (double A : {0.25, 1.0, 4.0}) {
    std::vector<double> xs;
    const double xm = std::sqrt(8 * A);
    for (int i = 0; i <= 16; ++i) xs.push_back(-xm + 2 * xm * i / 16.0);
    std::vector<double> sup(7, 0.0);
    for (int k = 0; k < 7; ++k) {
      const double lambda = std::pow(10.0, 1 + 0.5 * k);
      for (const auto& r : projector_sum(V, lambda, A, xs, c_decay)) {
        if (!std::isfinite(r.ratio)) finite = false;
        sup[static_cast<std::size_t>(k)] = std::max(sup[static_cast<std::size_t>(k)], r.ratio);
      }
    }
    // growth of the sup when the log-lambda range doubles from [10, 10^2.5] to [10, 10^4]
    const double lo = *std::max_element(sup.begin(), sup.begin() + 4);
    const double all = *std::max_element(sup.begin(), sup.end());
    worst_trend = std::max(worst_trend, lo > 0 ? all / lo : INFINITY);
  }
  return {window_ok && gap_ok && finite && worst_trend <= 1.2,
          fmt::format("window {}; gap err {:.9f}; ratios finite {}; worst trend {:.4f}", window_ok ? "{6,7}" : "wrong",
                      g.max_err, finite ? "yes" : "no", worst_trend)};
}

Outcome c11() {
  bool ok = true;
  std::string s;
  for (const SummationParams prm : {SummationParams{1, 2, 0.5, 0.5}, SummationParams{2, 1.5, 0.25, 0.0},
                                    SummationParams{0.5, 3, 0.75, 0.25}}) {
    const auto t1 = random_gap_sequence(prm, 40000, 101);
    const auto t2 = random_gap_sequence(prm, 40000, 202);
    const double s1 = summation_sup(t1, prm, 100, 1, 5000, 303);
    const double s2 = summation_sup(t2, prm, 100, 1, 5000, 404);
    ok = ok && std::isfinite(s1) && std::isfinite(s2) && s2 <= 1.5 * s1;
    s += fmt::format(" [theta={} beta={}: {:.4f} / {:.4f}]", prm.theta, prm.beta, s1, s2);
  }
  return {ok, "sup over 2 x 100 random instances:" + s};
}

Outcome c12() {
  const auto t0 = Clock::now();
  const Potential V(power(2));
  const auto m = bump();
  const GrushinConfig cfg;
  FiberSource src(V, cfg.eig);
  // fiber Plancherel identity
  double id_err = 0;
  for (double xp : {0.0, 1.0, 4.0}) {
    const auto s = kernel_slice(m, src, 1.0, xp, cfg, 0.0);
    const double u_space = weighted_plancherel_lhs(s, V, 0.0) / plancherel_prefactor(V, 1.0, 0.0, xp);
    id_err = std::max(id_err, std::abs(u_space / plancherel_oracle(m, src, 1.0, xp, s.fiber_cap) - 1));
  }
  // rescaling covariance
  double cov_err = 0;
  for (double r : {0.5, 1.0, 2.0}) {
    const Potential Vr(rescale(power(2), r));
    const auto a = kernel_slice(m, src, r, 1.0, cfg, 0.25);
    const auto b = kernel_slice(m, Vr, 1.0, 1.0 / r, cfg, 0.25);
    for (double th : {0.0, 0.25})
      cov_err = std::max(cov_err, std::abs(weighted_plancherel_lhs(a, V, th) / weighted_plancherel_lhs(b, Vr, th) - 1));
  }
  // sweep
  bool finite = true;
  double uni = 0;
  for (double th : {0.0, 0.25}) {
    const auto sw = plancherel_sweep(m, V, {th}, {0.5, 1.0, 2.0}, {0.0, 1.0, 4.0}, cfg);
    for (const auto& row : sw.rows) finite = finite && std::isfinite(row.ratio);
    uni = std::max(uni, sw.max_over_median);
  }
  const double t = seconds_since(t0);
  return {id_err <= 0.01 && cov_err <= 0.02 && finite && uni <= 10 && t <= 600,
          fmt::format("identity err {:.2e}; covariance err {:.2e}; max/median {:.3f}; {:.1f}s", id_err, cov_err, uni,
                      t)};
}

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run_cli(const std::string& args, const fs::path& dir) {
  fs::create_directories(dir);
  const fs::path log = dir / "stdout.txt";
  const std::string cmd = fmt::format("\"{}\" {} --out-dir \"{}\" > \"{}\" 2>&1", GRUSHIN_LAB_CLI, args, dir.string(),
                                      log.string());
  const int raw = std::system(cmd.c_str());
  CliRun r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = read_text(log);
  return r;
}

std::vector<std::string> column(const std::string& csv, std::size_t col) {
  std::istringstream ss(csv);
  std::string line;
  std::getline(ss, line);
  std::vector<std::string> out;
  while (std::getline(ss, line)) {
    std::istringstream ls(line);
    std::string cell;
    for (std::size_t i = 0; i <= col && std::getline(ls, cell, ','); ++i) {
    }
    out.push_back(cell);
  }
  return out;
}

Outcome c13() {
  const fs::path root = fs::temp_directory_path() / fmt::format("grushin_lab_acceptance_{}", ::getpid());
  const std::string fx = GRUSHIN_LAB_FIXTURES;
  std::string s;
  bool ok = true;

  const auto sp = run_cli("spectrum --potential " + fx + "/pow2.json --n-max 5", root / "spectrum");
  const auto E = column(read_text(root / "spectrum" / "spectrum.csv"), 1);
  const bool sp_ok = sp.code == 0 && E == std::vector<std::string>{"1", "3", "5", "7", "9"};
  ok = ok && sp_ok;
  s += fmt::format(" spectrum E={} exit {};", fmt::join(E, ","), sp.code);

  const auto ce = run_cli("certify --potential " + fx + "/pow05.json --class P1", root / "certify");
  const std::string cert = read_text(root / "certify" / "certificate.json");
  const auto kpos = cert.find("\"kappa_hat\": ");
  const double kappa = kpos == std::string::npos ? NAN : std::strtod(cert.c_str() + kpos + 13, nullptr);
  const bool ce_ok = ce.code == 0 && cert.find("\"verdict\": \"pass\"") != std::string::npos &&
                     std::abs(kappa - 2) < 1e-9;
  ok = ok && ce_ok;
  s += fmt::format(" certify kappa_hat={:.10g} exit {};", kappa, ce.code);

  const auto bs = run_cli("bs --potential " + fx + "/pow2.json --n-max 3", root / "bs");
  const auto err = column(read_text(root / "bs" / "bs.csv"), 3);
  const bool bs_ok = bs.code == 0 && err == std::vector<std::string>{"1.570796327", "1.570796327", "1.570796327"};
  ok = ok && bs_ok;
  s += fmt::format(" bs err={} exit {};", fmt::join(err, ","), bs.code);

  // byte-identical reruns, serial and threaded
  const auto again = run_cli("spectrum --potential " + fx + "/pow2.json --n-max 5 --threads 1", root / "spectrum2");
  const bool idem = again.code == 0 &&
                    read_text(root / "spectrum" / "spectrum.csv") == read_text(root / "spectrum2" / "spectrum.csv");
  ok = ok && idem;
  s += fmt::format(" rerun identical {};", idem ? "yes" : "no");

  const auto broken = run_cli("certify --potential " + fx + "/broken_tabulated.json --class P1", root / "broken");
  ok = ok && broken.code == 2;
  s += fmt::format(" broken fixture exit {}", broken.code);
  ok = ok && fs::exists(root / "broken" / "manifest.json");

  std::error_code ec;
  fs::remove_all(root, ec);
  return {ok, s};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"harmonic oscillator spectrum", c1},
      {"|x| spectrum against Airy zeros", c2},
      {"orthonormality", c3},
      {"zero counts and interlacing", c4},
      {"monotone envelopes", c5},
      {"Bohr-Sommerfeld", c6},
      {"virial", c7},
      {"pointwise bounds", c8},
      {"Sonin monotonicity", c9},
      {"projector bound", c10},
      {"summation lemma", c11},
      {"weighted Plancherel", c12},
      {"command line", c13},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %2d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(), o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
