// Acceptance suite: every criterion runs at its stated tolerance and
// prints one pass/fail line. Use --criterion N to run a single one.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "rcshape/io.hpp"
#include "rcshape/parallel.hpp"
#include "rcshape/quadrature.hpp"
#include "rcshape/rng.hpp"
#include "rcshape/study.hpp"

using namespace rcshape;

namespace {

int g_jobs = 2;

const KernelTable& table2() {
  static KernelTable kt = build_kernel_table(TestFunction::default_poly(), 2);
  return kt;
}

const KernelTable& table3() {
  static KernelTable kt = build_kernel_table(TestFunction::default_poly(), 3);
  return kt;
}

std::string cli_path() {
  const char* p = std::getenv("RCSHAPE_CLI");
  return p ? p : "";
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- 1: kernel normalization ------------------------------------------

bool criterion1(std::ostream& log) {
  double b[4] = {1.0, 6.0, 21.0, 56.0};
  double integral = 0.0;
  for (int k = 0; k <= 3; ++k) {
    double fact_k = 1.0, fact_7k = 1.0;
    for (int i = 2; i <= k; ++i) fact_k *= i;
    for (int i = 2; i <= k + 7; ++i) fact_7k *= i;
    integral += b[k] * fact_k * 720.0 / fact_7k;
  }
  double c_oracle = 1.0 / integral;
  TestFunction phi = TestFunction::default_poly();
  double c = phi.normalizing_constant();
  double mass = integrate_adaptive([&](double x) { return phi.value(x); },
                                   0.0, 1.0, 1e-13);
  log << "c=" << c << " oracle=" << c_oracle << " mass=" << mass;
  return std::abs(c - 2.5) <= 1e-12 && std::abs(c_oracle - 2.5) <= 1e-12 &&
         std::abs(mass - 1.0) <= 1e-10;
}

// ---- 2: Hilbert transform ----------------------------------------------

bool criterion2(std::ostream& log) {
  TestFunction phi = TestFunction::default_poly();
  int n = 4096;
  double a = 12.0, dx = 2.0 * a / (n - 1);
  std::vector<double> f(n);
  for (int j = 0; j < n; ++j) {
    double x = -a + j * dx;
    f[j] = std::abs(x) >= 1.0 ? 0.0 : phi_tilde_deriv(phi, x, 2, 1);
  }
  auto hf = hilbert_transform(f, dx);
  auto hhf = hilbert_transform(hf, dx);
  auto l2 = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s * dx);
  };
  double iso = std::abs(l2(hf) - l2(f)) / l2(f);
  double fmax = 0.0;
  for (double v : f) fmax = std::max(fmax, std::abs(v));
  double invol = 0.0;
  for (int j = 0; j < n; ++j) {
    double x = -a + j * dx;
    if (std::abs(x) > 0.9 * a) continue;
    invol = std::max(invol, std::abs(hhf[j] + f[j]));
  }
  invol /= fmax;
  log << "isometry rel err=" << iso << " involution rel err=" << invol;
  return iso <= 1e-3 && invol <= 1e-3;
}

// ---- 3: expectation identity -------------------------------------------

bool criterion3(std::ostream& log) {
  double h = 0.5;
  Eigen::Vector2d t(0.3, 0.0);
  double s2 = 0.2;
  TestFunction phi = TestFunction::default_poly();
  auto dfx = [&](double x, double y) {
    double f = std::exp(-(x * x + y * y) / (2.0 * s2)) / (2.0 * M_PI * s2);
    return -(x / s2) * f;
  };
  auto bump = [&](double x, double y) {
    double r = std::hypot(x - t(0), y - t(1)) / h;
    return r >= 1.0 ? 0.0 : phi.value(r) / (h * h * 2.0);
  };
  auto inner = [&](double y) {
    return integrate_adaptive([&](double x) { return bump(x, y) * dfx(x, y); },
                              t(0) - h, t(0) + h, 1e-11);
  };
  double functional = integrate_adaptive(inner, t(1) - h, t(1) + h, 1e-10);
  double expect = -inversion_constant(2) * std::pow(h, 2.5) * functional;

  int reps = 200;
  long n = 100000;
  TestPoint tp;
  tp.t = t;
  tp.h = h;
  tp.v = Eigen::Vector2d(1.0, 0.0);
  std::vector<double> vals(reps);
  parallel_for(reps, g_jobs, [&](long r) {
    std::mt19937_64 eng(stream_seed(8800, r));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> angle(-M_PI, M_PI);
    ProjectedSample ps;
    ps.Theta.resize(2 * n, 2);
    ps.S.resize(2 * n);
    for (long i = 0; i < 2 * n; ++i) {
      double aa = angle(eng);
      ps.Theta(i, 0) = std::cos(aa);
      ps.Theta(i, 1) = std::sin(aa);
      Eigen::Vector2d beta(std::sqrt(s2) * gauss(eng),
                           std::sqrt(s2) * gauss(eng));
      ps.S(i) = ps.Theta.row(i).dot(beta);
    }
    ps.n_stat = n;
    FittedDesign fd = FittedDesign::fit(ps, {});
    vals[r] = local_statistic(ps, fd, table2(), tp);
  });
  double mean = 0.0, var = 0.0;
  for (double v : vals) mean += v;
  mean /= reps;
  for (double v : vals) var += (v - mean) * (v - mean);
  var /= (reps - 1.0);
  double se = std::sqrt(var / reps);
  log << "mc mean=" << mean << " expected=" << expect << " se=" << se
      << " |diff|/se=" << std::abs(mean - expect) / se;
  return std::abs(mean - expect) <= 3.0 * se;
}

// ---- 4: closed-form design density ---------------------------------------

bool criterion4(std::ostream& log) {
  Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
  double truth = 1.0 / (4.0 * M_PI);
  double closed_worst = 0.0;
  for (const auto& th : sphere_grid(3, 64))
    closed_worst = std::max(
        closed_worst,
        std::abs(cauchy_direction_density(th, mu0, id, 3) - truth));

  DgpSpec s = find_scenario("sec4.2-cauchy-normal");
  s.n = 10000;
  s.seed = 505;
  RawDataset raw = sample_dgp(s);
  ProjectedSample ps = normalize(raw, stream_seed(505, 7));
  FittedDesign fd = FittedDesign::fit(ps, {});
  double worst = 0.0;
  for (const auto& th : sphere_grid(3, 200))
    worst = std::max(worst, std::abs(fd.ftheta_raw(th) - truth));
  log << "closed-form sup err=" << closed_worst
      << " estimate sup err=" << worst << " bound=" << 0.15 * truth;
  return closed_worst <= 1e-12 && worst <= 0.15 * truth;
}

// ---- 5/6: level and power at desk scale -----------------------------------

bool criterion5(std::ostream& log) {
  ModeStudySpec spec;
  spec.null_scenario = "sec4.2-cauchy-null";
  spec.n = 250;
  spec.cal_reps = 400;
  spec.eval_reps = 200;
  spec.seed = 1215;
  spec.jobs = g_jobs;
  ModeStudyResult r = run_mode_study(spec, table3());
  log << "false-detection rate=" << 100.0 * r.level << "% (reported 4.8)";
  return r.level >= 0.015 && r.level <= 0.09;
}

bool criterion6(std::ostream& log) {
  ModeStudySpec spec;
  spec.null_scenario = "sec4.2-cauchy-null";
  spec.alt_scenario = "sec4.2-cauchy-normal";
  spec.n = 500;
  spec.cal_reps = 400;
  spec.eval_reps = 200;
  spec.seed = 1999;
  spec.jobs = g_jobs;
  ModeStudyResult r = run_mode_study(spec, table3());
  log << "detection rate=" << 100.0 * r.power << "% (reported 99.0)";
  return r.power >= 0.90;
}

// ---- 7: design dependence ---------------------------------------------------

bool criterion7(std::ostream& log) {
  ModeStudySpec cube;
  cube.null_scenario = "sec4.2-uniform-null";
  cube.alt_scenario = "sec4.2-uniform-normal";
  cube.n = 500;
  cube.cal_reps = 400;
  cube.eval_reps = 200;
  cube.seed = 777;
  cube.jobs = g_jobs;
  ModeStudyResult rc = run_mode_study(cube, table3());

  ModeStudySpec shifted = cube;
  shifted.null_scenario = "sec4.2-normal3-null";
  shifted.alt_scenario = "sec4.2-normal3-normal";
  shifted.seed = 778;
  ModeStudyResult rs = run_mode_study(shifted, table3());

  log << "cube power=" << 100.0 * rc.power << "% (reported 99.1), shifted "
      << "normal power=" << 100.0 * rs.power << "% (reported 78.8)";
  return rc.power >= rs.power + 0.10;
}

// ---- 8: multiscale separation ------------------------------------------------

bool criterion8(std::ostream& log) {
  MultiscaleStudySpec spec;
  spec.n = 2000;
  spec.cal_reps = 400;
  spec.eval_reps = 100;
  spec.seed = 4321;
  spec.jobs = g_jobs;
  MultiscaleStudyResult r = run_multiscale_study(spec, table2());
  log << "h=2.5: " << 100.0 * r.rate_h25 << "%, h=1: " << 100.0 * r.rate_h1
      << "%, h=0.5: " << 100.0 * r.rate_h05
      << "%, combined {0.5,1}: " << 100.0 * r.rate_combined
      << "% (reported 100 / 0 / 0 / 25)";
  return r.rate_h25 >= 0.85 && r.rate_h1 <= 0.10 &&
         r.rate_combined >= r.rate_h1 + 0.10;
}

// ---- 9: family-wise error -----------------------------------------------------

bool criterion9(std::ostream& log) {
  FwerStudySpec spec;
  spec.null_scenario = "sec4.2-uniform-null";
  spec.n = 500;
  spec.reps = 200;
  spec.n_mc = 2000;
  spec.seed = 90;
  spec.jobs = g_jobs;
  FwerStudyResult r = run_fwer_study(spec, table3());
  double bound = 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / spec.reps);
  log << "family-wise rejection rate=" << 100.0 * r.rate << "% bound="
      << 100.0 * bound << "%";
  return r.rate <= bound;
}

// ---- 10: parametric baseline ---------------------------------------------------

bool criterion10(std::ostream& log) {
  DgpSpec s = find_scenario("sec4.4-i");
  s.n = 500;  // 1000 observations in total
  s.seed = 111;
  OlsResult r = ols_baseline(sample_dgp(s));
  bool ok = true;
  log << "gamma=(";
  for (int k = 0; k < 3; ++k) {
    log << (k ? "," : "") << r.gamma(k);
    ok = ok && std::abs(r.gamma(k)) <= 3.0 * r.se(k);
  }
  log << ") se=(";
  for (int k = 0; k < 3; ++k) log << (k ? "," : "") << r.se(k);
  log << ")";
  return ok;
}

// ---- 11: determinism ------------------------------------------------------------

bool criterion11(std::ostream& log) {
  if (cli_path().empty()) {
    log << "RCSHAPE_CLI not set";
    return false;
  }
  auto run = [&](const std::string& args) {
    std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
  };
  if (run("simulate --scenario sec4.2-cauchy-normal --n 200 --seed 12 --out "
          "acc11.csv") != 0) {
    log << "simulate failed";
    return false;
  }
  std::string tm =
      "test-mode --data acc11.csv --intercept --b0 0 0 0 --scales 1 "
      "--offset 1 --n-mc 300 --seed 9 --out acc11.json";
  if (run("--jobs 1 " + tm) != 0) return false;
  std::string first = slurp("acc11.json");
  if (run("--jobs 2 " + tm) != 0) return false;
  std::string second = slurp("acc11.json");
  if (run("--jobs 1 " + tm) != 0) return false;
  std::string third = slurp("acc11.json");

  std::string cal =
      "calibrate --scenario-null sec4.2-cauchy-null --n 150 --family 1 "
      "--offset 1 --reps 200 --seed 4 --out acc11k.json";
  if (run("--jobs 1 " + cal) != 0) return false;
  std::string k1 = slurp("acc11k.json");
  if (run("--jobs 2 " + cal) != 0) return false;
  std::string k2 = slurp("acc11k.json");

  for (const char* f : {"acc11.csv", "acc11.csv.manifest.json", "acc11.json",
                        "acc11.json.manifest.json", "acc11k.json",
                        "acc11k.json.manifest.json"})
    std::remove(f);
  bool ok = !first.empty() && first == second && second == third &&
            !k1.empty() && k1 == k2;
  log << (ok ? "result bytes identical across reruns and worker counts"
             : "byte mismatch between reruns");
  return ok;
}

struct Criterion {
  int id;
  const char* label;
  double budget_seconds;
  std::function<bool(std::ostream&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
      only = std::atoi(argv[++i]);
    else if (std::strcmp(argv[i], "--jobs") == 0 && i + 1 < argc)
      g_jobs = std::atoi(argv[++i]);
  }

  std::vector<Criterion> criteria = {
      {1, "kernel normalization (beta-integral oracle, unit mass)", 1.0,
       criterion1},
      {2, "Hilbert transform isometry and involution", 10.0, criterion2},
      {3, "expectation identity against 2-d quadrature", 300.0, criterion3},
      {4, "closed-form and estimated Cauchy design density", 60.0,
       criterion4},
      {5, "calibrated level at n=250 (Cauchy design)", 1200.0, criterion5},
      {6, "calibrated power at n=500 (Cauchy design)", 1200.0, criterion6},
      {7, "design dependence of the power", 2400.0, criterion7},
      {8, "multiscale separation of close modes", 1800.0, criterion8},
      {9, "family-wise error of the uncalibrated test", 1800.0, criterion9},
      {10, "parametric baseline centers at the mean", 60.0, criterion10},
      {11, "byte-identical reruns at any parallelism", 120.0, criterion11},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    std::ostringstream log;
    auto start = std::chrono::steady_clock::now();
    bool ok = false;
    try {
      ok = c.run(log);
    } catch (const std::exception& e) {
      log << "exception: " << e.what();
    }
    double secs = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start)
                      .count();
    bool in_budget = secs <= c.budget_seconds;
    std::printf("[%s] criterion %2d: %s — %s (%.1fs, budget %.0fs%s)\n",
                ok && in_budget ? "PASS" : "FAIL", c.id, c.label,
                log.str().c_str(), secs, c.budget_seconds,
                in_budget ? "" : " EXCEEDED");
    if (!(ok && in_budget)) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
