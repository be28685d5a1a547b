#include "rcshape/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "rcshape/quadrature.hpp"

namespace rcshape {

namespace {

// Laurent polynomial in u as (power -> coefficient); powers may go
// negative for odd monomials under repeated application of f -> f'(u)/u.
using Laurent = std::map<int, double>;

Laurent laurent_from_coef(const std::vector<double>& coef) {
  Laurent out;
  for (int p = 0; p < static_cast<int>(coef.size()); ++p)
    if (coef[p] != 0.0) out[p] = coef[p];
  return out;
}

// f -> f'(u)/u on monomials: u^p -> p u^{p-2}.
Laurent apply_radial_derivative(const Laurent& in) {
  Laurent out;
  for (auto [p, c] : in)
    if (p != 0) out[p - 2] += p * c;
  return out;
}

double laurent_eval(const Laurent& poly, double u) {
  double acc = 0.0;
  for (auto [p, c] : poly) acc += c * std::pow(u, p);
  return acc;
}

// Coefficients A_{m,j} in D_z^m f(sqrt(z^2+r^2)) =
//   sum_j A_{m,j} z^{2j-m} (L^j f)(sqrt(z^2+r^2)),
// with L the radial derivative above. Recurrence:
//   A_{m+1,j} = (2j-m) A_{m,j} + A_{m,j-1}.
std::vector<std::vector<double>> chain_coefficients(int m_max) {
  std::vector<std::vector<double>> a(m_max + 1);
  for (int m = 0; m <= m_max; ++m) a[m].assign(m + 1, 0.0);
  if (m_max >= 1) a[1][1] = 1.0;
  for (int m = 1; m < m_max; ++m)
    for (int j = 1; j <= m + 1; ++j) {
      double val = 0.0;
      if (j <= m) val += (2.0 * j - m) * a[m][j];
      if (j - 1 >= 1 && j - 1 <= m) val += a[m][j - 1];
      a[m + 1][j] = val;
    }
  return a;
}

}  // namespace

TestFunction::TestFunction(std::vector<double> raw_coef) {
  if (raw_coef.empty()) throw std::invalid_argument("empty polynomial");
  double integral = 0.0;  // exact monomial integrals over [0,1]
  for (size_t p = 0; p < raw_coef.size(); ++p)
    integral += raw_coef[p] / static_cast<double>(p + 1);
  if (integral <= 0.0)
    throw std::invalid_argument("test function must have positive mass");
  norm_const_ = 1.0 / integral;
  coef_ = std::move(raw_coef);
  for (double& c : coef_) c *= norm_const_;
}

TestFunction TestFunction::default_poly() {
  // (56x^3+21x^2+6x+1)(1-x)^6 expanded
  std::vector<double> inner = {1.0, 6.0, 21.0, 56.0};
  std::vector<double> binom = {1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0};
  std::vector<double> prod(inner.size() + binom.size() - 1, 0.0);
  for (size_t i = 0; i < inner.size(); ++i)
    for (size_t j = 0; j < binom.size(); ++j) prod[i + j] += inner[i] * binom[j];
  return TestFunction(std::move(prod));
}

double TestFunction::value(double x) const {
  if (x < 0.0) throw std::invalid_argument("phi: negative argument");
  if (x >= 1.0) return 0.0;
  double acc = 0.0;
  for (auto it = coef_.rbegin(); it != coef_.rend(); ++it) acc = acc * x + *it;
  return acc;
}

double TestFunction::deriv(double x, int k) const {
  if (k < 0) throw std::invalid_argument("phi: negative derivative order");
  if (x >= 1.0) return 0.0;
  double acc = 0.0;
  for (int p = static_cast<int>(coef_.size()) - 1; p >= k; --p) {
    double fall = 1.0;
    for (int i = 0; i < k; ++i) fall *= (p - i);
    acc = acc * x + coef_[p] * fall;
  }
  return acc;
}

double sphere_volume(int m) {
  if (m < 0) throw std::invalid_argument("sphere_volume: negative dimension");
  return 2.0 * std::pow(M_PI, 0.5 * (m + 1)) / std::tgamma(0.5 * (m + 1));
}

void TestPoint::validate() const {
  if (h <= 0.0) throw std::invalid_argument("test point: scale must be > 0");
  if (t.size() != v.size())
    throw std::invalid_argument("test point: dimension mismatch");
  if (std::abs(v.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("test point: direction must be unit norm");
}

double phi_bump(const TestFunction& phi, const Eigen::VectorXd& b,
                const TestPoint& tp, int d) {
  if (d < 2) throw std::invalid_argument("phi_bump: d must be >= 2");
  if (b.size() != tp.t.size())
    throw std::invalid_argument("phi_bump: dimension mismatch");
  double r = (b - tp.t).norm() / tp.h;
  if (r >= 1.0) return 0.0;
  return phi.value(r) / (std::pow(tp.h, d) * sphere_volume(d - 2));
}

double phi_tilde(const TestFunction& phi, double z, int d) {
  if (d < 2) throw std::invalid_argument("phi_tilde: d must be >= 2");
  double az = std::abs(z);
  if (az >= 1.0 || z == 0.0) return 0.0;
  double rmax = std::sqrt(1.0 - z * z);
  auto integrand = [&](double r) {
    double u = std::sqrt(z * z + r * r);
    if (u >= 1.0 || u == 0.0) return 0.0;
    return std::pow(r, d - 2) * phi.deriv(u, 1) * z / u;
  };
  return integrate_adaptive(integrand, 0.0, rmax, 1e-12);
}

double phi_tilde_deriv(const TestFunction& phi, double z, int d, int order) {
  if (d < 2) throw std::invalid_argument("phi_tilde_deriv: d must be >= 2");
  if (order < 0 || order > d + 1)
    throw std::invalid_argument(
        "phi_tilde_deriv: order outside the smoothness guarantee 0..d+1");
  if (order == 0) return phi_tilde(phi, z, d);
  if (std::abs(z) >= 1.0) return 0.0;

  int m = order + 1;  // total z-derivatives applied to phi(sqrt(z^2+r^2))
  auto a = chain_coefficients(m);
  std::vector<Laurent> lpows(m + 1);
  lpows[0] = laurent_from_coef(phi.coefficients());
  for (int j = 1; j <= m; ++j)
    lpows[j] = apply_radial_derivative(lpows[j - 1]);

  if (z == 0.0) {
    // Even-order derivatives of an odd function vanish; for odd order only
    // the j = m/2 term survives in the limit.
    if (order % 2 == 0) return 0.0;
    const Laurent& lp = lpows[m / 2];
    auto integrand = [&](double r) {
      if (r <= 0.0 || r >= 1.0) return 0.0;
      return std::pow(r, d - 2) * laurent_eval(lp, r);
    };
    return a[m][m / 2] * integrate_gauss(integrand, 0.0, 1.0, 32, 16);
  }

  // Substitute r = |z| sinh(tau): every term becomes smooth and bounded.
  double az = std::abs(z);
  double tmax = std::asinh(std::sqrt(1.0 - z * z) / az);
  auto integrand = [&](double tau) {
    double sh = std::sinh(tau), ch = std::cosh(tau);
    double u = az * ch;
    if (u >= 1.0) return 0.0;
    double dm = 0.0;
    for (int j = (m + 1) / 2; j <= m; ++j) {
      if (a[m][j] == 0.0) continue;
      dm += a[m][j] * std::pow(z, 2 * j - m) * laurent_eval(lpows[j], u);
    }
    return std::pow(az * sh, d - 2) * dm * az * ch;
  };
  int panels = std::max(8, static_cast<int>(std::ceil(4.0 * tmax)));
  return integrate_gauss(integrand, 0.0, tmax, panels, 16);
}

std::vector<double> hilbert_transform(const std::vector<double>& f,
                                      double dx) {
  if (dx <= 0.0)
    throw std::invalid_argument("hilbert_transform: grid step must be > 0");
  size_t n = f.size();
  std::vector<double> out(n, 0.0);
  for (size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (size_t k = 0; k < n; ++k) {
      if (k == j) continue;
      acc += f[k] / (static_cast<double>(j) - static_cast<double>(k));
    }
    // Singular cell via the odd pairing f(u-x)-f(u+x) with linear samples.
    double fp = j + 1 < n ? f[j + 1] : 0.0;
    double fm = j >= 1 ? f[j - 1] : 0.0;
    out[j] = (acc - 0.5 * (fp - fm)) / M_PI;
  }
  return out;
}

double hilbert_eval(const std::vector<double>& f, double x0, double dx,
                    double u) {
  // Exact principal value of the piecewise-linear interpolant of f
  // (zero outside the grid). Telescoping the per-segment closed form
  // leaves one x*log|x| term per interior node plus boundary terms:
  //   pi H(u) = flin_0(u) ln|u-s_0| - flin_{n-2}(u) ln|u-s_{n-1}|
  //           + sum_k (b_k - b_{k-1}) (u-s_k) ln|u-s_k|
  //           - (f_{n-1} - f_0),
  // with b_k the segment slopes. Exact for the interpolant at any u,
  // including points inside the singular cell.
  long n = static_cast<long>(f.size());
  if (n < 2) return 0.0;
  auto xlog = [](double x) {
    return x == 0.0 ? 0.0 : x * std::log(std::abs(x));
  };
  auto safe_log = [](double x) {
    double ax = std::abs(x);
    return ax == 0.0 ? 0.0 : std::log(ax);
  };
  double inv = 1.0 / dx;
  double acc = 0.0;
  double b_prev = 0.0;
  for (long k = 0; k < n; ++k) {
    double b_k = k + 1 < n ? (f[k + 1] - f[k]) * inv : 0.0;
    double diff = b_k - b_prev;
    if (diff != 0.0) acc += diff * xlog(u - (x0 + k * dx));
    b_prev = b_k;
  }
  if (f[0] != 0.0) acc += f[0] * safe_log(u - x0);
  if (f[n - 1] != 0.0) acc -= f[n - 1] * safe_log(u - (x0 + (n - 1) * dx));
  acc -= f[n - 1] - f[0];
  return acc / M_PI;
}

double inversion_constant(int d) {
  if (d < 2) throw std::invalid_argument("inversion_constant: d must be >= 2");
  double mag = std::pow(2.0, d) * std::pow(M_PI, d - 1);
  if (d % 2 == 1) {
    int sign = ((d - 1) / 2) % 2 == 0 ? 1 : -1;
    return sign * mag;
  }
  int sign = (d / 2) % 2 == 0 ? -1 : 1;
  return sign * mag;
}

double KernelTable::eval(double u) const {
  double au = std::abs(u);
  if (au <= u_max_) {
    double pos = (u + u_max_) / step_;
    auto k = static_cast<size_t>(pos);
    if (k + 1 >= psi_.size()) return psi_.back();
    double w = pos - k;
    return (1.0 - w) * psi_[k] + w * psi_[k + 1];
  }
  if (d_ % 2 == 1) return 0.0;
  return tail_coef_ / (u * u * u);
}

KernelTable build_kernel_table(const TestFunction& phi, int d,
                               const KernelGridSpec& spec) {
  if (d < 2)
    throw std::invalid_argument("build_kernel_table: d must be >= 2");
  KernelTable kt;
  kt.d_ = d;
  kt.phi_ = phi;
  kt.c_d_ = inversion_constant(d);
  bool even = d % 2 == 0;
  kt.u_max_ = spec.u_max > 0.0 ? spec.u_max : (even ? 12.0 : 1.0);
  // The transformed kernel carries curvature up to ~3e4 for d = 2, so the
  // 1e-4 interpolation target needs a step near 1.5e-4.
  int n = spec.n_points > 0 ? spec.n_points : (even ? 262145 : 4097);
  if (n < 4) throw std::invalid_argument("build_kernel_table: n_points < 4");
  kt.step_ = 2.0 * kt.u_max_ / (n - 1);
  kt.psi_.resize(n);

  if (!even) {
    for (int j = 0; j < n; ++j) {
      double u = -kt.u_max_ + j * kt.step_;
      kt.psi_[j] = std::abs(u) >= 1.0 ? 0.0 : phi_tilde_deriv(phi, u, d, d - 1);
    }
  } else {
    // Sample the (d-1)-th reduced-kernel derivative on a symmetric grid
    // and push it through the principal-value transform: the exact
    // interpolant transform near the support, a plain midpoint sum in the
    // far field where the integrand is smooth.
    int nf_half = 2048;
    double dxf = 1.05 / nf_half;
    int nf = 2 * nf_half + 1;
    double x0 = -1.05;
    std::vector<double> fgrid(nf);
    for (int j = 0; j < nf; ++j) {
      double x = x0 + j * dxf;
      fgrid[j] = std::abs(x) >= 1.0 ? 0.0 : phi_tilde_deriv(phi, x, d, d - 1);
    }
    for (int j = 0; j < n; ++j) {
      double u = -kt.u_max_ + j * kt.step_;
      if (std::abs(u) <= 1.0 + 16.0 * dxf) {
        kt.psi_[j] = hilbert_eval(fgrid, x0, dxf, u);
      } else {
        double acc = 0.0;
        for (int k = 0; k < nf; ++k) {
          if (fgrid[k] == 0.0) continue;
          acc += fgrid[k] / (u - (x0 + k * dxf));
        }
        kt.psi_[j] = acc * dxf / M_PI;
      }
    }
    // Cubic tail fitted over the outer part of the table. The first two
    // moments of the transformed input vanish, so the transform decays
    // like 1/u^3; the fit window starts past the kernel core.
    double lo = std::max(kt.u_max_ / 10.0, 2.0);
    double num = 0.0, den = 0.0;
    for (int j = 0; j < n; ++j) {
      double u = -kt.u_max_ + j * kt.step_;
      if (std::abs(u) < lo) continue;
      double b = 1.0 / (u * u * u);
      num += kt.psi_[j] * b;
      den += b * b;
    }
    kt.tail_coef_ = den > 0.0 ? num / den : 0.0;
  }

  double l2 = 0.0;
  for (int j = 0; j < n; ++j) {
    double w = (j == 0 || j == n - 1) ? 0.5 : 1.0;
    l2 += w * kt.psi_[j] * kt.psi_[j];
    kt.psi_sup_ = std::max(kt.psi_sup_, std::abs(kt.psi_[j]));
  }
  kt.psi_l2sq_ = l2 * kt.step_;
  if (even && kt.u_max_ > 0.0)
    kt.psi_l2sq_ += 2.0 * kt.tail_coef_ * kt.tail_coef_ /
                    (5.0 * std::pow(kt.u_max_, 5));
  return kt;
}

}  // namespace rcshape
