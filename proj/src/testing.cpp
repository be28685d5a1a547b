#include "rcshape/testing.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

namespace rcshape {

void HypothesisFamily::validate() const {
  if (points.size() != sides.size())
    throw std::invalid_argument("family: points/sides length mismatch");
  if (region_lo.size() > 0) {
    for (const auto& tp : points)
      for (int k = 0; k < tp.t.size(); ++k)
        if (tp.t(k) < region_lo(k) + tp.h - 1e-12 ||
            tp.t(k) > region_hi(k) - tp.h + 1e-12)
          throw std::invalid_argument(
              "family: test location violates the region constraint");
  }
  for (const auto& tp : points) tp.validate();
}

std::pair<bool, bool> decide_rejections(double t_hat, double kappa, int d) {
  if (kappa <= 0.0) throw std::invalid_argument("decide: kappa must be > 0");
  double sgn = inversion_constant(d) >= 0.0 ? 1.0 : -1.0;
  bool reject_minus = sgn * t_hat > kappa;
  bool reject_plus = sgn * t_hat < -kappa;
  return {reject_plus, reject_minus};
}

std::function<double(const std::vector<double>&)> detection_functional(
    CombineRule rule, size_t n_scales, size_t n_directions) {
  return [rule, n_scales, n_directions](const std::vector<double>& x) {
    if (x.size() != n_scales * n_directions)
      throw std::invalid_argument("detection statistic: layout mismatch");
    auto at = [&](size_t is, size_t id) { return x[is * n_directions + id]; };
    double out;
    switch (rule) {
      case CombineRule::per_direction_any_scale: {
        out = std::numeric_limits<double>::infinity();
        for (size_t id = 0; id < n_directions; ++id) {
          double best = -std::numeric_limits<double>::infinity();
          for (size_t is = 0; is < n_scales; ++is)
            best = std::max(best, at(is, id));
          out = std::min(out, best);
        }
        return out;
      }
      case CombineRule::any_scale_full: {
        out = -std::numeric_limits<double>::infinity();
        for (size_t is = 0; is < n_scales; ++is) {
          double worst = std::numeric_limits<double>::infinity();
          for (size_t id = 0; id < n_directions; ++id)
            worst = std::min(worst, at(is, id));
          out = std::max(out, worst);
        }
        return out;
      }
      case CombineRule::all_scales_full:
        return *std::min_element(x.begin(), x.end());
    }
    throw std::logic_error("unreachable");
  };
}

namespace {

std::vector<TestEntry> evaluate_family(const ProjectedSample& sample,
                                       const FittedDesign& design,
                                       const KernelTable& kt,
                                       const std::vector<TestPoint>& family,
                                       double alpha,
                                       const QuantileChoice& quant,
                                       std::string* mode_out) {
  std::vector<double> t_hats =
      local_statistic_family(sample, design, kt, family);
  std::vector<double> kappas(family.size());
  std::vector<double> sigmas;
  if (quant.kind == QuantileChoice::Kind::theoretical &&
      quant.per_test_override.size() == family.size()) {
    kappas = quant.per_test_override;
    sigmas = local_stddev_family(design, kt, family, quant.mc.sigma_quad);
    if (mode_out) *mode_out = "theoretical";
  } else if (quant.kind == QuantileChoice::Kind::theoretical) {
    QuantileSpec spec = quant.mc;
    spec.alpha = alpha;
    QuantileResult qr =
        multiscale_quantile(family, design, kt, sample.n_stat, spec);
    kappas = qr.per_test;
    sigmas = qr.sigma;
    if (mode_out) *mode_out = "theoretical";
  } else {
    sigmas = local_stddev_family(design, kt, family, quant.mc.sigma_quad);
    double root_n = std::sqrt(static_cast<double>(sample.n_stat));
    for (size_t j = 0; j < family.size(); ++j)
      kappas[j] = quant.threshold * sigmas[j] / root_n;
    if (mode_out) *mode_out = "calibrated";
  }
  std::vector<TestEntry> entries(family.size());
  int d = kt.dimension();
  for (size_t j = 0; j < family.size(); ++j) {
    TestEntry& e = entries[j];
    e.tp = family[j];
    e.t_hat = t_hats[j];
    e.sigma_hat = sigmas[j];
    e.kappa = kappas[j];
    // a calibrated threshold can come out nonpositive on easy nulls;
    // rejection then only needs the right sign
    if (e.kappa > 0.0) {
      auto [rp, rm] = decide_rejections(e.t_hat, e.kappa, d);
      e.reject_plus = rp;
      e.reject_minus = rm;
    } else {
      double sgn = inversion_constant(d) >= 0.0 ? 1.0 : -1.0;
      e.reject_minus = sgn * e.t_hat > e.kappa;
      e.reject_plus = sgn * e.t_hat < -std::abs(e.kappa);
    }
  }
  return entries;
}

bool combined_mode_verdict(const std::vector<TestEntry>& entries,
                           CombineRule rule, size_t n_scales,
                           size_t n_directions) {
  auto rej = [&](size_t is, size_t id) {
    return entries[is * n_directions + id].reject_minus;
  };
  switch (rule) {
    case CombineRule::per_direction_any_scale: {
      for (size_t id = 0; id < n_directions; ++id) {
        bool any = false;
        for (size_t is = 0; is < n_scales && !any; ++is) any = rej(is, id);
        if (!any) return false;
      }
      return true;
    }
    case CombineRule::any_scale_full: {
      for (size_t is = 0; is < n_scales; ++is) {
        bool full = true;
        for (size_t id = 0; id < n_directions && full; ++id)
          full = rej(is, id);
        if (full) return true;
      }
      return false;
    }
    case CombineRule::all_scales_full: {
      for (const auto& e : entries)
        if (!e.reject_minus) return false;
      return true;
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace

TestOutcome mode_test(const ProjectedSample& sample,
                      const FittedDesign& design, const KernelTable& kt,
                      const Eigen::VectorXd& b0,
                      const std::vector<double>& scales,
                      const std::vector<Eigen::VectorXd>& directions,
                      double alpha, const QuantileChoice& quant,
                      const ModeTestOptions& opt) {
  if (scales.empty()) throw std::invalid_argument("mode_test: no scales");
  if (directions.empty())
    throw std::invalid_argument("mode_test: no directions");
  ModeScanOptions mso;
  mso.c_factor = opt.c_factor;
  mso.offset_multiplier = opt.offset_multiplier;
  std::vector<TestPoint> family = mode_scan_points(b0, scales, directions, mso);

  TestOutcome out;
  out.procedure = ProcedureKind::mode_at_point;
  out.alpha = alpha;
  out.entries = evaluate_family(sample, design, kt, family, alpha, quant,
                                &out.quantile_mode);
  out.mode_detected = combined_mode_verdict(out.entries, opt.combine,
                                            scales.size(), directions.size());
  out.verdict = out.mode_detected ? "mode detected" : "no mode detected";
  return out;
}

TestOutcome global_mode_scan(const ProjectedSample& sample,
                             const FittedDesign& design, const KernelTable& kt,
                             const Eigen::VectorXd& region_lo,
                             const Eigen::VectorXd& region_hi,
                             const std::vector<double>& scales, double alpha,
                             const QuantileChoice& quant,
                             const GlobalScanOptions& opt) {
  int d = kt.dimension();
  if (region_lo.size() != d || region_hi.size() != d)
    throw std::invalid_argument("scan: region dimension mismatch");
  for (double h : scales)
    if (region_lo.maxCoeff() + h > region_hi.minCoeff() - h)
      throw std::invalid_argument(
          "scan: region too small for any admissible location at scale " +
          std::to_string(h));

  auto directions = sphere_grid(
      d, opt.direction_resolution > 0 ? opt.direction_resolution
                                      : (d == 2 ? 8 : 18));
  // ring points must stay inside the admissible location box
  auto admissible = [&](const Eigen::VectorXd& t, double h) {
    for (int k = 0; k < d; ++k)
      if (t(k) < region_lo(k) + h - 1e-9 || t(k) > region_hi(k) - h + 1e-9)
        return false;
    return true;
  };

  struct Vertex {
    Eigen::VectorXd b0;
    double h;
    size_t first, count;
  };
  std::vector<Vertex> vertices;
  std::vector<TestPoint> family;
  for (double h : scales) {
    std::vector<std::vector<double>> axes(d);
    for (int k = 0; k < d; ++k) {
      double lo = region_lo(k) + h, hi = region_hi(k) - h;
      for (double x = lo; x <= hi + 1e-9; x += h) axes[k].push_back(x);
    }
    std::vector<int> idx(d, 0);
    for (;;) {
      Eigen::VectorXd b0(d);
      for (int k = 0; k < d; ++k) b0(k) = axes[k][idx[k]];
      ModeScanOptions mso;
      mso.c_factor = opt.c_factor;
      mso.offset_multiplier = opt.offset_multiplier;
      auto ring = mode_scan_points(b0, {h}, directions, mso);
      bool full = true;
      for (const auto& tp : ring)
        if (!admissible(tp.t, h)) {
          full = false;
          break;
        }
      if (full) {
        vertices.push_back({b0, h, family.size(), ring.size()});
        family.insert(family.end(), ring.begin(), ring.end());
      }
      int k = 0;
      while (k < d && ++idx[k] == static_cast<int>(axes[k].size())) {
        idx[k] = 0;
        ++k;
      }
      if (k == d) break;
    }
  }
  if (family.empty())
    throw std::invalid_argument(
        "scan: no vertex admits a full ring inside the region");

  TestOutcome out;
  out.procedure = ProcedureKind::global_scan;
  out.alpha = alpha;
  out.entries = evaluate_family(sample, design, kt, family, alpha, quant,
                                &out.quantile_mode);
  for (const auto& vx : vertices) {
    bool all = true;
    for (size_t j = vx.first; j < vx.first + vx.count && all; ++j)
      all = out.entries[j].reject_minus;
    if (all) out.candidates.push_back(vx.b0);
  }
  double hmin = *std::min_element(scales.begin(), scales.end());
  double n = static_cast<double>(sample.n_stat);
  double floor_rate = std::pow(std::log(n) / n, 1.0 / (2.0 * d + 3.0));
  std::ostringstream diag;
  diag << "scale floor check: h_min=" << hmin << ", (log n / n)^(1/(2d+3))="
       << floor_rate << ", ratio=" << hmin / floor_rate;
  out.diagnostics = diag.str();
  out.mode_detected = !out.candidates.empty();
  std::ostringstream v;
  v << out.candidates.size() << " candidate mode location(s)";
  out.verdict = v.str();
  return out;
}

TestOutcome monotonicity_map(const ProjectedSample& sample,
                             const FittedDesign& design, const KernelTable& kt,
                             double h0, const Eigen::VectorXd& region_lo,
                             const Eigen::VectorXd& region_hi, double alpha,
                             const QuantileChoice& quant,
                             const MonotonicityMapOptions& opt) {
  if (kt.dimension() != 2)
    throw std::invalid_argument("monotonicity map: d must be 2");
  double step = opt.grid_step > 0.0 ? opt.grid_step : 2.0 * h0;
  std::vector<Eigen::VectorXd> dirs(4, Eigen::VectorXd(2));
  double r = 1.0 / std::sqrt(2.0);
  dirs[0] << r, r;
  dirs[1] << -r, r;
  dirs[2] << -r, -r;
  dirs[3] << r, -r;

  std::vector<TestPoint> family;
  for (double y = region_lo(1); y <= region_hi(1) + 1e-9; y += step)
    for (double x = region_lo(0); x <= region_hi(0) + 1e-9; x += step)
      for (const auto& v : dirs) {
        TestPoint tp;
        tp.t = Eigen::Vector2d(x, y);
        tp.h = h0;
        tp.v = v;
        family.push_back(tp);
      }
  if (family.empty())
    throw std::invalid_argument("monotonicity map: empty location grid");

  TestOutcome out;
  out.procedure = ProcedureKind::monotonicity_map;
  out.alpha = alpha;
  out.entries = evaluate_family(sample, design, kt, family, alpha, quant,
                                &out.quantile_mode);
  size_t arrows = 0;
  for (const auto& e : out.entries) arrows += e.reject_minus ? 1 : 0;
  std::ostringstream v;
  v << arrows << " certified directional decrease(s)";
  out.verdict = v.str();
  return out;
}

std::vector<Arrow> outcome_arrows(const TestOutcome& outcome) {
  std::vector<Arrow> arrows;
  for (const auto& e : outcome.entries)
    if (e.reject_minus) arrows.push_back({e.tp.t, e.tp.v});
  return arrows;
}

OlsResult ols_baseline(const RawDataset& raw) {
  raw.validate();
  ProjectedSample ps =
      normalize_with_signs(raw, Eigen::VectorXd::Ones(raw.rows()));
  long n = ps.rows();
  int d = ps.dim();
  Eigen::MatrixXd gram = ps.Theta.transpose() * ps.Theta;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("ols: transformed design is rank deficient");
  Eigen::VectorXd gamma = llt.solve(ps.Theta.transpose() * ps.S);
  Eigen::VectorXd resid = ps.S - ps.Theta * gamma;
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(d, d);
  for (long i = 0; i < n; ++i) {
    Eigen::VectorXd row = ps.Theta.row(i);
    meat += resid(i) * resid(i) * row * row.transpose();
  }
  Eigen::MatrixXd cov = llt.solve(llt.solve(meat).transpose());
  OlsResult out;
  out.gamma = gamma;
  out.se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  out.n = n;
  return out;
}

}  // namespace rcshape
