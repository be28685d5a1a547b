#include <doctest.h>

#include <cmath>
#include <random>

#include "rcshape/io.hpp"
#include "rcshape/parallel.hpp"
#include "rcshape/rng.hpp"
#include "rcshape/testing.hpp"

using namespace rcshape;

namespace {

const KernelTable& table2() {
  static KernelTable kt = build_kernel_table(TestFunction::default_poly(), 2);
  return kt;
}

// short-tail table for quantile-heavy integration tests
const KernelTable& table2_short() {
  static KernelTable kt = [] {
    KernelGridSpec spec;
    spec.u_max = 4.0;
    spec.n_points = 65537;
    return build_kernel_table(TestFunction::default_poly(), 2, spec);
  }();
  return kt;
}

ProjectedSample scenario_sample(const std::string& name, long n,
                                std::uint64_t seed) {
  DgpSpec s = find_scenario(name);
  s.n = n;
  s.seed = seed;
  RawDataset raw = sample_dgp(s);
  return normalize(raw, stream_seed(seed, 7));
}

}  // namespace

TEST_CASE("decision rule follows the sign of the inversion constant") {
  // d = 3: negative constant
  auto [p3, m3] = decide_rejections(0.5, 0.2, 3);
  CHECK(p3);
  CHECK_FALSE(m3);
  auto [p0, m0] = decide_rejections(0.0, 0.2, 3);
  CHECK_FALSE(p0);
  CHECK_FALSE(m0);
  // d = 2: positive constant
  auto [p2, m2] = decide_rejections(0.5, 0.2, 2);
  CHECK_FALSE(p2);
  CHECK(m2);
  CHECK_THROWS(decide_rejections(0.5, 0.0, 2));
}

TEST_CASE("detection functionals combine scales and directions") {
  // layout: scale-major, 2 scales x 3 directions
  std::vector<double> x = {5.0, -1.0, 2.0,   // scale 0
                           -2.0, 3.0, 1.0};  // scale 1
  auto per_dir = detection_functional(
      CombineRule::per_direction_any_scale, 2, 3);
  // direction maxima: max(5,-2)=5, max(-1,3)=3, max(2,1)=2 -> min = 2
  CHECK(per_dir(x) == doctest::Approx(2.0));
  auto any_full = detection_functional(CombineRule::any_scale_full, 2, 3);
  // scale minima: min(5,-1,2)=-1, min(-2,3,1)=-2 -> max = -1
  CHECK(any_full(x) == doctest::Approx(-1.0));
  auto all_full = detection_functional(CombineRule::all_scales_full, 2, 3);
  CHECK(all_full(x) == doctest::Approx(-2.0));
  CHECK_THROWS(per_dir(std::vector<double>{1.0, 2.0}));
}

TEST_CASE("mode test: deterministic outcome and decision antisymmetry") {
  ProjectedSample ps = scenario_sample("sec4.3-bimodal", 2000, 12);
  FittedDesign fd = FittedDesign::fit(ps, {});
  Eigen::VectorXd b0 = Eigen::VectorXd::Zero(2);
  std::vector<Eigen::VectorXd> dirs = {Eigen::Vector2d(1, 0),
                                       Eigen::Vector2d(-1, 0),
                                       Eigen::Vector2d(0, 1),
                                       Eigen::Vector2d(0, -1)};
  QuantileChoice cal;
  cal.kind = QuantileChoice::Kind::calibrated;
  cal.threshold = 1.3;
  ModeTestOptions opt;
  opt.offset_multiplier = 1.0;
  TestOutcome a = mode_test(ps, fd, table2_short(), b0, {1.0}, dirs, 0.05,
                            cal, opt);
  TestOutcome b = mode_test(ps, fd, table2_short(), b0, {1.0}, dirs, 0.05,
                            cal, opt);
  REQUIRE(a.entries.size() == 4);
  for (size_t j = 0; j < 4; ++j) {
    CHECK(a.entries[j].t_hat == b.entries[j].t_hat);
    CHECK(a.entries[j].kappa == b.entries[j].kappa);
    CHECK(a.entries[j].reject_minus == b.entries[j].reject_minus);
  }
  CHECK(a.mode_detected == b.mode_detected);
  CHECK(a.quantile_mode == "calibrated");

  for (size_t j = 0; j < 4; ++j) {
    bool both = a.entries[j].reject_minus && a.entries[j].reject_plus;
    CHECK_FALSE(both);
  }

  // same location, opposite directions, shared threshold: rejecting the
  // minus hypothesis one way rejects the plus hypothesis the other way
  TestPoint tp;
  tp.t = Eigen::Vector2d(0.8, 0.2);
  tp.h = 0.5;
  tp.v = Eigen::Vector2d(1.0, 0.0);
  TestPoint tm = tp;
  tm.v = -tp.v;
  double tplus = local_statistic(ps, fd, table2_short(), tp);
  double tminus = local_statistic(ps, fd, table2_short(), tm);
  double sp = local_stddev(fd, table2_short(), tp, {});
  double sm = local_stddev(fd, table2_short(), tm, {});
  CHECK(sp == doctest::Approx(sm).epsilon(1e-12));
  double kappa = 1.1 * sp / std::sqrt(static_cast<double>(ps.n_stat));
  auto [rp_p, rm_p] = decide_rejections(tplus, kappa, 2);
  auto [rp_m, rm_m] = decide_rejections(tminus, kappa, 2);
  CHECK(rm_p == rp_m);
  CHECK(rp_p == rm_m);
}

TEST_CASE("mode test: rejection sets grow with the level") {
  ProjectedSample ps = scenario_sample("sec4.3-bimodal", 2500, 4);
  FittedDesign fd = FittedDesign::fit(ps, {});
  Eigen::VectorXd b0 = Eigen::VectorXd::Zero(2);
  std::vector<Eigen::VectorXd> dirs = {Eigen::Vector2d(1, 0),
                                       Eigen::Vector2d(-1, 0),
                                       Eigen::Vector2d(0, 1),
                                       Eigen::Vector2d(0, -1)};
  QuantileChoice q;
  q.kind = QuantileChoice::Kind::theoretical;
  q.mc.n_mc = 400;
  q.mc.seed = 5;
  ModeTestOptions opt;
  opt.offset_multiplier = 1.0;
  TestOutcome a05 = mode_test(ps, fd, table2_short(), b0, {0.5, 1.0}, dirs,
                              0.05, q, opt);
  TestOutcome a10 = mode_test(ps, fd, table2_short(), b0, {0.5, 1.0}, dirs,
                              0.10, q, opt);
  for (size_t j = 0; j < a05.entries.size(); ++j) {
    CHECK(a10.entries[j].kappa <= a05.entries[j].kappa);
    if (a05.entries[j].reject_minus)
      CHECK(a10.entries[j].reject_minus == true);
    if (a05.entries[j].reject_plus) CHECK(a10.entries[j].reject_plus == true);
  }
}

TEST_CASE("monotonicity map: trimodal data points away from the modes") {
  ProjectedSample ps = scenario_sample("sec4.1-trimodal", 20000, 31);
  FittedDesign fd = FittedDesign::fit(ps, {});
  QuantileChoice q;
  q.kind = QuantileChoice::Kind::theoretical;
  q.mc.n_mc = 500;
  q.mc.seed = 9;
  MonotonicityMapOptions opt;
  opt.grid_step = 1.0;
  TestOutcome out = monotonicity_map(
      ps, fd, table2_short(), 0.5, Eigen::Vector2d(-1.0, -1.0),
      Eigen::Vector2d(2.0, 2.0), 0.05, q, opt);
  CHECK(out.entries.size() == 64);  // 16 vertices, 4 directions

  auto arrows = outcome_arrows(out);
  CHECK(arrows.size() >= 6);

  std::vector<Eigen::Vector2d> modes = {Eigen::Vector2d(-0.4, -0.57),
                                        Eigen::Vector2d(1.5, -0.52),
                                        Eigen::Vector2d(0.45, 1.6)};
  int away = 0;
  for (const auto& ar : arrows) {
    double best = 1e300;
    Eigen::Vector2d nearest;
    for (const auto& m : modes) {
      double dist = (ar.t - m).norm();
      if (dist < best) {
        best = dist;
        nearest = m;
      }
    }
    if (ar.v.dot(ar.t - nearest) > 0.0) ++away;
  }
  CHECK(away >= static_cast<int>(0.75 * arrows.size()));

  // structural symmetry: a location never carries opposite arrows
  for (size_t i = 0; i < out.entries.size(); ++i)
    for (size_t j = i + 1; j < out.entries.size(); ++j) {
      const auto& a = out.entries[i];
      const auto& b = out.entries[j];
      if ((a.tp.t - b.tp.t).norm() < 1e-12 &&
          (a.tp.v + b.tp.v).norm() < 1e-12) {
        bool contradiction = a.reject_minus && b.reject_minus;
        CHECK_FALSE(contradiction);
      }
    }
}

TEST_CASE("monotonicity map: wrong dimension is rejected") {
  DgpSpec s = find_scenario("sec4.2-uniform-null");
  s.n = 200;
  RawDataset raw = sample_dgp(s);
  ProjectedSample ps = normalize(raw, 3);
  FittedDesign fd = FittedDesign::fit(ps, {});
  KernelTable kt3 = build_kernel_table(TestFunction::default_poly(), 3);
  QuantileChoice q;
  CHECK_THROWS(monotonicity_map(ps, fd, kt3, 0.5,
                                Eigen::Vector2d(-1.0, -1.0),
                                Eigen::Vector2d(1.0, 1.0), 0.05, q, {}));
}

TEST_CASE("global scan: finds the three modes, rejects empty regions") {
  // the all-directions certification needs a large sample before every
  // ring test around a mode clears the joint threshold
  ProjectedSample ps = scenario_sample("sec4.1-trimodal", 1000000, 8);
  FittedDesign fd = FittedDesign::fit(ps, {});
  QuantileChoice q;
  q.kind = QuantileChoice::Kind::theoretical;
  q.mc.n_mc = 200;
  q.mc.seed = 17;
  q.mc.jobs = 2;
  GlobalScanOptions opt;
  opt.direction_resolution = 4;
  TestOutcome out = global_mode_scan(
      ps, fd, table2_short(), Eigen::Vector2d(-1.6, -1.6),
      Eigen::Vector2d(2.6, 2.6), {0.3}, 0.05, q, opt);
  std::vector<Eigen::Vector2d> modes = {Eigen::Vector2d(-0.4, -0.57),
                                        Eigen::Vector2d(1.5, -0.52),
                                        Eigen::Vector2d(0.45, 1.6)};
  for (const auto& m : modes) {
    double best = 1e300;
    for (const auto& c : out.candidates) best = std::min(best, (c - m).norm());
    CHECK(best <= 0.5);
  }
  CHECK(out.diagnostics.find("scale floor") != std::string::npos);

  CHECK_THROWS(global_mode_scan(ps, fd, table2_short(),
                                Eigen::Vector2d(-0.4, -0.4),
                                Eigen::Vector2d(0.4, 0.4), {0.5}, 0.05, q,
                                opt));
}

TEST_CASE("global scan: uniform null certifies nothing almost always") {
  GlobalScanOptions opt;
  opt.direction_resolution = 4;
  int reps = 200;
  std::vector<int> empty(reps, 0);
  parallel_for(reps, 2, [&](long r) {
    QuantileChoice q;
    q.kind = QuantileChoice::Kind::theoretical;
    q.mc.n_mc = 150;
    q.mc.grid.circle_cells = 96;
    q.mc.grid.s_step = 0.25;
    DgpSpec s = find_scenario("sec4.3-null");
    s.n = 1500;
    s.seed = stream_seed(4242, r);
    RawDataset raw = sample_dgp(s);
    ProjectedSample ps = normalize(raw, stream_seed(s.seed, 3));
    FittedDesign fd = FittedDesign::fit(ps, {});
    q.mc.seed = stream_seed(171717, r);
    TestOutcome out = global_mode_scan(
        ps, fd, table2_short(), Eigen::Vector2d(-2.0, -2.0),
        Eigen::Vector2d(2.0, 2.0), {0.5}, 0.05, q, opt);
    empty[r] = out.candidates.empty() ? 1 : 0;
  });
  int total = 0;
  for (int e : empty) total += e;
  CHECK(total >= static_cast<int>(0.95 * reps));
}

TEST_CASE("monotonicity map: few arrows on average under the null") {
  MonotonicityMapOptions opt;
  int reps = 100;
  std::vector<long> arrows(reps, 0);
  std::vector<long> fam(reps, 0);
  parallel_for(reps, 2, [&](long r) {
    QuantileChoice q;
    q.kind = QuantileChoice::Kind::theoretical;
    q.mc.n_mc = 150;
    q.mc.grid.circle_cells = 96;
    q.mc.grid.s_step = 0.25;
    DgpSpec s = find_scenario("sec4.3-null");
    s.n = 1000;
    s.seed = stream_seed(999, r);
    RawDataset raw = sample_dgp(s);
    ProjectedSample ps = normalize(raw, stream_seed(s.seed, 3));
    FittedDesign fd = FittedDesign::fit(ps, {});
    q.mc.seed = stream_seed(31337, r);
    TestOutcome out = monotonicity_map(
        ps, fd, table2_short(), 0.5, Eigen::Vector2d(-1.0, -1.0),
        Eigen::Vector2d(1.0, 1.0), 0.05, q, opt);
    fam[r] = static_cast<long>(out.entries.size());
    arrows[r] = static_cast<long>(outcome_arrows(out).size());
  });
  long total_arrows = 0;
  for (long a : arrows) total_arrows += a;
  double avg = static_cast<double>(total_arrows) / reps;
  CHECK(avg <= 0.05 * fam[0]);
}

TEST_CASE("ols baseline: exact fit, reference accuracy, rank errors") {
  // deterministic coefficients are recovered exactly
  DgpSpec fixed;
  fixed.d = 3;
  fixed.model = ModelKind::with_intercept;
  fixed.beta.kind = BetaSpec::Kind::mixture;
  Eigen::Vector3d b(1.5, -0.5, 2.0);
  fixed.beta.components = {{1.0, b, Eigen::MatrixXd::Zero(3, 3)}};
  fixed.design.kind = DesignSpec::Kind::cauchy;
  fixed.design.mu = Eigen::VectorXd::Zero(2);
  fixed.design.sigma = Eigen::MatrixXd::Identity(2, 2);
  fixed.n = 200;
  fixed.seed = 61;
  OlsResult exact = ols_baseline(sample_dgp(fixed));
  for (int k = 0; k < 3; ++k)
    CHECK(exact.gamma(k) == doctest::Approx(b(k)).epsilon(1e-10));

  // standard gaussian coefficients center the estimate at zero
  DgpSpec s = find_scenario("sec4.4-i");
  s.n = 500;  // 1000 rows
  s.seed = 33;
  OlsResult r = ols_baseline(sample_dgp(s));
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(r.gamma(k)) <= 3.0 * r.se(k));
    CHECK(r.se(k) > 0.005);
    CHECK(r.se(k) < 0.06);
  }

  // bimodal mixture: the estimate sits at the mean, not at a mode
  DgpSpec s2 = find_scenario("sec4.4-ii");
  s2.n = 500;
  s2.seed = 71;
  OlsResult r2 = ols_baseline(sample_dgp(s2));
  CHECK(r2.gamma(0) == doctest::Approx(1.0).epsilon(0.12));

  // skewed first coefficient: mean two
  DgpSpec s3 = find_scenario("sec4.4-iii");
  s3.n = 500;
  s3.seed = 72;
  OlsResult r3 = ols_baseline(sample_dgp(s3));
  CHECK(r3.gamma(0) == doctest::Approx(2.0).epsilon(0.12));

  // rank-deficient transformed design
  RawDataset flat;
  flat.X.resize(10, 2);
  flat.Y.resize(10);
  for (int i = 0; i < 10; ++i) {
    flat.X(i, 0) = 1.0 + i;
    flat.X(i, 1) = 3.0 * (1.0 + i);
    flat.Y(i) = i;
  }
  CHECK_THROWS_AS(ols_baseline(flat), std::invalid_argument);
}
