#include "rcshape/statistics.hpp"

#include <cmath>
#include <stdexcept>

#include "rcshape/errors.hpp"
#include "rcshape/quadrature.hpp"

namespace rcshape {

SphereRule sphere_rule(int d, const SigmaQuadSpec& spec) {
  SphereRule rule;
  if (d == 2) {
    int n = spec.circle_nodes;
    rule.nodes.reserve(n);
    rule.weights.assign(n, 2.0 * M_PI / n);
    for (int k = 0; k < n; ++k) {
      double a = 2.0 * M_PI * k / n;
      Eigen::VectorXd v(2);
      v << std::cos(a), std::sin(a);
      rule.nodes.push_back(v);
    }
  } else if (d == 3) {
    const GaussRule& gl = gauss_legendre(spec.z_nodes);
    rule.nodes.reserve(spec.z_nodes * spec.phi_nodes);
    rule.weights.reserve(spec.z_nodes * spec.phi_nodes);
    for (int i = 0; i < spec.z_nodes; ++i) {
      double z = gl.nodes[i];
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      double wz = gl.weights[i] * 2.0 * M_PI / spec.phi_nodes;
      for (int j = 0; j < spec.phi_nodes; ++j) {
        double a = 2.0 * M_PI * (j + 0.5) / spec.phi_nodes;
        Eigen::VectorXd v(3);
        v << r * std::cos(a), r * std::sin(a), z;
        rule.nodes.push_back(v);
        rule.weights.push_back(wz);
      }
    }
  } else {
    throw std::invalid_argument("sphere_rule: d must be 2 or 3");
  }
  return rule;
}

std::vector<double> local_statistic_family(
    const ProjectedSample& sample, const FittedDesign& design,
    const KernelTable& kt, const std::vector<TestPoint>& family) {
  long n = sample.n_stat;
  if (n == 0) throw std::invalid_argument("local_statistic: empty half");
  int d = sample.dim();
  if (d != kt.dimension())
    throw std::invalid_argument("local_statistic: kernel dimension mismatch");
  bool odd = d % 2 == 1;

  Eigen::VectorXd inv_f(n);
  for (long i = 0; i < n; ++i)
    inv_f(i) = 1.0 / design.ftheta(sample.Theta.row(i));

  std::vector<double> out;
  out.reserve(family.size());
  for (const auto& tp : family) {
    tp.validate();
    Eigen::VectorXd proj_t = sample.Theta.topRows(n) * tp.t;
    Eigen::VectorXd proj_v = sample.Theta.topRows(n) * tp.v;
    double acc = 0.0;
    for (long i = 0; i < n; ++i) {
      double u = (sample.S(i) - proj_t(i)) / tp.h;
      if (odd && std::abs(u) >= 1.0) continue;
      acc += proj_v(i) * inv_f(i) * kt.eval(u);
    }
    out.push_back(acc / (n * std::sqrt(tp.h)));
  }
  return out;
}

double local_statistic(const ProjectedSample& sample,
                       const FittedDesign& design, const KernelTable& kt,
                       const TestPoint& tp) {
  return local_statistic_family(sample, design, kt, {tp}).front();
}

namespace {

// 1-d quadrature segments on the kernel scale. Odd dimensions keep the
// compact support; even dimensions add graded panels out to the table end.
std::vector<std::pair<double, int>> s_segments(const KernelTable& kt,
                                               const SigmaQuadSpec& spec) {
  std::vector<std::pair<double, int>> segs;  // (right endpoint, panels)
  if (kt.dimension() % 2 == 1) {
    segs = {{1.0, spec.s_panels}};
  } else {
    double um = kt.u_max();
    segs = {{1.0, spec.s_panels},
            {std::min(3.0, um), std::max(2, spec.s_panels / 2)}};
    if (um > 3.0) segs.push_back({um, std::max(2, spec.s_panels / 2)});
  }
  return segs;
}

}  // namespace

std::vector<double> local_stddev_family(const FittedDesign& design,
                                        const KernelTable& kt,
                                        const std::vector<TestPoint>& family,
                                        const SigmaQuadSpec& quad) {
  int d = kt.dimension();
  SphereRule rule = sphere_rule(d, quad);
  auto segs = s_segments(kt, quad);
  const GaussRule& gl = gauss_legendre(quad.s_order);
  bool even = d % 2 == 0;

  std::vector<DesignSlice> slices;
  slices.reserve(rule.nodes.size());
  for (const auto& th : rule.nodes) slices.push_back(design.slice(th));

  std::vector<double> out;
  out.reserve(family.size());
  for (const auto& tp : family) {
    tp.validate();
    double total = 0.0;
    for (size_t k = 0; k < rule.nodes.size(); ++k) {
      const auto& th = rule.nodes[k];
      double cv = th.dot(tp.v);
      if (cv == 0.0) continue;
      const DesignSlice& sl = slices[k];
      double center = th.dot(tp.t);
      double inner = 0.0;
      double left = 0.0;
      for (auto [right, panels] : segs) {
        double width = (right - left) / panels;
        for (int p = 0; p < panels; ++p) {
          double lo = left + p * width;
          double c = lo + 0.5 * width, half = 0.5 * width;
          for (size_t q = 0; q < gl.nodes.size(); ++q) {
            double s = c + half * gl.nodes[q];
            double psi = kt.eval(s);
            double term = psi * psi *
                          (sl.fstheta(center + tp.h * s) +
                           sl.fstheta(center - tp.h * s));
            inner += gl.weights[q] * half * term;
          }
        }
        left = right;
      }
      if (even) {
        // fitted cubic tail beyond the table, joint density at its floor
        double um = kt.u_max();
        inner += 2.0 * kt.tail_coef() * kt.tail_coef() /
                 (5.0 * std::pow(um, 5)) * design.floor_joint();
      }
      total += rule.weights[k] * cv * cv / (sl.ftheta * sl.ftheta) * inner;
    }
    double sig = std::sqrt(std::max(0.0, total));
    if (sig < 1e-6)
      throw NumericalDiagnosticError(
          "local_stddev: value below 1e-6; degenerate design or mis-set "
          "region");
    out.push_back(sig);
  }
  return out;
}

double local_stddev(const FittedDesign& design, const KernelTable& kt,
                    const TestPoint& tp, const SigmaQuadSpec& quad) {
  return local_stddev_family(design, kt, {tp}, quad).front();
}

StatResult stat_result(const ProjectedSample& sample,
                       const FittedDesign& design, const KernelTable& kt,
                       const TestPoint& tp, const SigmaQuadSpec& quad) {
  StatResult r;
  r.tp = tp;
  r.n = sample.n_stat;
  r.t_hat = local_statistic(sample, design, kt, tp);
  r.sigma_hat = local_stddev(design, kt, tp, quad);
  r.standardized = std::sqrt(static_cast<double>(r.n)) * r.t_hat / r.sigma_hat;
  return r;
}

ScaleCalibration scale_calibration(double h, int d) {
  if (h <= 0.0 || h > 1.0)
    throw std::invalid_argument("scale_calibration: h must be in (0, 1]");
  ScaleCalibration c;
  c.alpha = std::sqrt((3.0 * d - 1.0) * std::log(1.0 / h));
  c.beta = std::sqrt(std::log(std::exp(1.0) / h)) /
           std::log(std::log(std::exp(std::exp(1.0)) / h));
  return c;
}

}  // namespace rcshape
