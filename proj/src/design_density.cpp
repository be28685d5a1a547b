#include "rcshape/design_density.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>

#include "rcshape/errors.hpp"
#include "rcshape/quadrature.hpp"

namespace rcshape {

double smoothing_kernel(double u) {
  double au = std::abs(u);
  return au >= 1.0 ? 0.0 : 0.75 * (1.0 - u * u);
}

namespace {

// chord radius of the spherical kernel support: 1-<a,b> <= h^2
double support_chord(double h) { return std::sqrt(std::min(2.0, 2.0 * h * h)); }

double cap_angle(double h) {
  double c = 1.0 - h * h;
  return c <= -1.0 ? M_PI : std::acos(c);
}

double normalizer_integral(double h, int d) {
  double usup = cap_angle(h);
  auto f = [&](double u) {
    return smoothing_kernel((1.0 - std::cos(u)) / (h * h)) *
           std::pow(std::sin(u), d - 2);
  };
  return sphere_volume(d - 2) * integrate_adaptive(f, 0.0, usup, 1e-12);
}

struct NormKey {
  double h;
  int d;
  bool operator<(const NormKey& o) const {
    return h < o.h || (h == o.h && d < o.d);
  }
};

// hemisphere normalizer as a function of the polar angle towards e1,
// cached on a fine grid per (h, d)
struct HemiTable {
  double h = 0.0;
  int d = 0;
  double full = 0.0;             // full-hemisphere value away from the rim
  double alpha_lo = 0.0;         // below this angle the cap fits inside
  std::vector<double> values;    // on [alpha_lo, pi/2]

  double integral(double alpha) const {
    if (alpha <= alpha_lo || values.size() < 2) return full;
    double pos = (alpha - alpha_lo) / (M_PI / 2.0 - alpha_lo) *
                 (values.size() - 1);
    size_t k = std::min(values.size() - 2, static_cast<size_t>(pos));
    double w = pos - k;
    return (1.0 - w) * values[k] + w * values[k + 1];
  }
};

double hemisphere_integral_direct(double h, int d, double alpha) {
  double usup = cap_angle(h);
  if (d == 2) {
    auto f = [&](double phi) {
      return smoothing_kernel((1.0 - std::cos(phi - alpha)) / (h * h));
    };
    double lo = std::max(-M_PI / 2.0, alpha - usup);
    double hi = std::min(M_PI / 2.0, alpha + usup);
    return integrate_adaptive(f, lo, hi, 1e-12);
  }
  if (d == 3) {
    double ca = std::cos(alpha), sa = std::sin(alpha);
    auto outer = [&](double u) {
      double cu = std::cos(u), su = std::sin(u);
      auto inner = [&](double w) {
        return smoothing_kernel((1.0 - cu * ca - su * sa * std::cos(w)) /
                                (h * h));
      };
      return su * integrate_adaptive(inner, 0.0, 2.0 * M_PI, 1e-12);
    };
    double lo = std::max(0.0, alpha - usup);
    double hi = std::min(M_PI / 2.0, alpha + usup);
    return integrate_adaptive(outer, lo, hi, 1e-10);
  }
  throw std::invalid_argument(
      "hemisphere normalizer implemented for d in {2,3}");
}

const HemiTable& hemi_table(double h, int d) {
  static std::map<NormKey, HemiTable> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find({h, d});
  if (it != cache.end()) return it->second;
  HemiTable tab;
  tab.h = h;
  tab.d = d;
  tab.full = normalizer_integral(h, d);
  double usup = cap_angle(h);
  tab.alpha_lo = std::max(0.0, M_PI / 2.0 - usup - 0.05);
  int m = 257;
  tab.values.resize(m);
  for (int k = 0; k < m; ++k) {
    double alpha = tab.alpha_lo + (M_PI / 2.0 - tab.alpha_lo) * k / (m - 1);
    tab.values[k] = hemisphere_integral_direct(h, d, alpha);
  }
  auto [pos, ok] = cache.emplace(NormKey{h, d}, std::move(tab));
  (void)ok;
  return pos->second;
}

double cached_normalizer_integral(double h, int d) {
  static std::map<NormKey, double> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find({h, d});
  if (it != cache.end()) return it->second;
  double v = normalizer_integral(h, d);
  cache.emplace(NormKey{h, d}, v);
  return v;
}

}  // namespace

double kde_normalizer(double h, int d) {
  if (h <= 0.0) throw std::invalid_argument("kde_normalizer: bandwidth <= 0");
  if (d < 2) throw std::invalid_argument("kde_normalizer: d must be >= 2");
  return std::pow(h, d - 1) / cached_normalizer_integral(h, d);
}

double kde_normalizer_hemisphere(double h, int d, double theta1) {
  if (h <= 0.0) throw std::invalid_argument("kde_normalizer: bandwidth <= 0");
  double alpha = std::acos(std::clamp(std::abs(theta1), 0.0, 1.0));
  return std::pow(h, d - 1) / hemi_table(h, d).integral(alpha);
}

double spherical_kde(const Eigen::MatrixXd& theta_rows, double h_star,
                     const Eigen::VectorXd& theta) {
  if (h_star <= 0.0) throw std::invalid_argument("spherical_kde: h_star <= 0");
  long n = theta_rows.rows();
  if (n == 0) throw std::invalid_argument("spherical_kde: empty sample");
  double h2 = h_star * h_star;
  double acc = 0.0;
  for (long i = 0; i < n; ++i) {
    double u = (1.0 - theta_rows.row(i).dot(theta)) / h2;
    if (u < 1.0) acc += smoothing_kernel(u);
  }
  int d = static_cast<int>(theta_rows.cols());
  return kde_normalizer(h_star, d) / (n * std::pow(h_star, d - 1)) * acc;
}

double joint_kde(const Eigen::MatrixXd& theta_rows, const Eigen::VectorXd& s,
                 double h_plus, double s_query, const Eigen::VectorXd& theta) {
  if (h_plus <= 0.0) throw std::invalid_argument("joint_kde: h_plus <= 0");
  long n = theta_rows.rows();
  if (n == 0) throw std::invalid_argument("joint_kde: empty sample");
  double h2 = h_plus * h_plus;
  double acc = 0.0;
  for (long i = 0; i < n; ++i) {
    double u = (1.0 - theta_rows.row(i).dot(theta)) / h2;
    if (u >= 1.0) continue;
    double w = (s(i) - s_query) / h_plus;
    if (std::abs(w) < 1.0) acc += smoothing_kernel(u) * smoothing_kernel(w);
  }
  int d = static_cast<int>(theta_rows.cols());
  return kde_normalizer(h_plus, d) / (n * std::pow(h_plus, d)) * acc;
}

double default_h_star(long n, int d) {
  double ln = std::log(static_cast<double>(n));
  double v = 2.0 * std::pow(ln, 7.0 / (d - 1)) *
             std::pow(static_cast<double>(n), -1.0 / (d - 1));
  return std::min(v, 0.5);
}

double default_h_plus(long n, int d) {
  double ln = std::log(static_cast<double>(n));
  double v = 2.0 * std::pow(ln, 3.0 / d) *
             std::pow(static_cast<double>(n), -1.0 / (2.0 * d));
  return std::min(v, 0.5);
}

double DesignSlice::fstheta(double s) const {
  if (known_joint) return known_joint(s);
  return std::max(fstheta_raw(s), floor_joint);
}

double DesignSlice::fstheta_raw(double s) const {
  if (known_joint) return known_joint(s);
  if (grid_vals.empty()) return 0.0;
  double pos = (s - grid_lo) / grid_step;
  if (pos <= 0.0 || pos >= static_cast<double>(grid_vals.size() - 1))
    return 0.0;
  auto k = static_cast<size_t>(pos);
  double w = pos - k;
  return (1.0 - w) * grid_vals[k] + w * grid_vals[k + 1];
}

Eigen::VectorXd FittedDesign::reflect(const Eigen::VectorXd& theta,
                                      double* flip) const {
  if (model_ == ModelKind::with_intercept && theta(0) < 0.0) {
    if (flip) *flip = -1.0;
    return -theta;
  }
  if (flip) *flip = 1.0;
  return theta;
}

void FittedDesign::build_index() {
  long n = theta_rows_.rows();
  if (d_ == 2) {
    angle_order_.resize(n);
    std::iota(angle_order_.begin(), angle_order_.end(), 0L);
    std::vector<double> ang(n);
    for (long i = 0; i < n; ++i)
      ang[i] = std::atan2(theta_rows_(i, 1), theta_rows_(i, 0));
    std::sort(angle_order_.begin(), angle_order_.end(),
              [&](long a, long b) { return ang[a] < ang[b]; });
    sorted_angles_.resize(n);
    for (long i = 0; i < n; ++i) sorted_angles_[i] = ang[angle_order_[i]];
  } else {
    lat_order_.resize(n);
    std::iota(lat_order_.begin(), lat_order_.end(), 0L);
    std::sort(lat_order_.begin(), lat_order_.end(), [&](long a, long b) {
      return theta_rows_(a, 0) < theta_rows_(b, 0);
    });
    sorted_lat_.resize(n);
    for (long i = 0; i < n; ++i) sorted_lat_[i] = theta_rows_(lat_order_[i], 0);
  }
}

void FittedDesign::gather(const Eigen::VectorXd& theta, double chord,
                          std::vector<long>& out) const {
  out.clear();
  long n = theta_rows_.rows();
  if (d_ == 2) {
    double qa = std::atan2(theta(1), theta(0));
    // angular window matching the chord radius
    double width = 2.0 * std::asin(std::min(1.0, 0.5 * chord));
    auto emit_range = [&](double lo, double hi) {
      auto it = std::lower_bound(sorted_angles_.begin(), sorted_angles_.end(),
                                 lo);
      for (; it != sorted_angles_.end() && *it <= hi; ++it)
        out.push_back(angle_order_[it - sorted_angles_.begin()]);
    };
    double lo = qa - width, hi = qa + width;
    emit_range(std::max(lo, -M_PI), std::min(hi, M_PI));
    if (lo < -M_PI) emit_range(lo + 2.0 * M_PI, M_PI + 1e-12);
    if (hi > M_PI) emit_range(-M_PI - 1e-12, hi - 2.0 * M_PI);
  } else {
    double z = theta(0);
    auto lo = std::lower_bound(sorted_lat_.begin(), sorted_lat_.end(),
                               z - chord);
    auto hi = std::upper_bound(sorted_lat_.begin(), sorted_lat_.end(),
                               z + chord);
    double limit = chord * chord;
    for (auto it = lo; it != hi; ++it) {
      long idx = lat_order_[it - sorted_lat_.begin()];
      if ((theta_rows_.row(idx).transpose() - theta).squaredNorm() <= limit)
        out.push_back(idx);
    }
    return;
  }
  (void)n;
}

FittedDesign FittedDesign::fit(const ProjectedSample& sample,
                               const DesignConfig& cfg) {
  long n = sample.n_est();
  if (n < cfg.min_rows)
    throw std::invalid_argument(
        "fit_design: estimation half has fewer than the required rows");
  FittedDesign fd;
  fd.d_ = sample.dim();
  fd.model_ = sample.model;
  fd.n_ = n;
  fd.h_star_ = cfg.h_star > 0.0 ? cfg.h_star : default_h_star(n, fd.d_);
  fd.h_plus_ = cfg.h_plus > 0.0 ? cfg.h_plus : default_h_plus(n, fd.d_);
  double ln = std::log(static_cast<double>(n));
  fd.floor_theta_ = 1.0 / ln;
  fd.floor_joint_ = 1.0 / (ln * ln);

  fd.theta_rows_.resize(n, fd.d_);
  fd.s_vals_.resize(n);
  for (long i = 0; i < n; ++i) {
    long src = sample.n_stat + i;
    Eigen::VectorXd th = sample.Theta.row(src);
    double s = sample.S(src);
    if (fd.model_ == ModelKind::with_intercept && th(0) < 0.0) {
      th = -th;
      s = -s;
    }
    fd.theta_rows_.row(i) = th;
    fd.s_vals_(i) = s;
  }
  fd.build_index();

  if (fd.d_ == 2 && cfg.circle_cache > 0) {
    int m = cfg.circle_cache;
    fd.circle_cache_.resize(m + 1);
    for (int k = 0; k < m; ++k) {
      double a = -M_PI + 2.0 * M_PI * k / m;
      Eigen::VectorXd th(2);
      th << std::cos(a), std::sin(a);
      fd.circle_cache_[k] = fd.ftheta_exact(th);
    }
    fd.circle_cache_[m] = fd.circle_cache_[0];
  }
  return fd;
}

FittedDesign FittedDesign::fit_known_direction(
    const ProjectedSample& sample,
    std::function<double(const Eigen::VectorXd&)> ftheta,
    const DesignConfig& cfg) {
  FittedDesign fd = fit(sample, cfg);
  fd.known_ftheta_ = std::move(ftheta);
  fd.circle_cache_.clear();
  return fd;
}

FittedDesign FittedDesign::known_closed_form(
    int d, ModelKind model, long n,
    std::function<double(const Eigen::VectorXd&)> ftheta,
    std::function<double(double, const Eigen::VectorXd&)> fstheta) {
  FittedDesign fd;
  fd.d_ = d;
  fd.model_ = model;
  fd.n_ = n;
  fd.h_star_ = default_h_star(n, d);
  fd.h_plus_ = default_h_plus(n, d);
  double ln = std::log(static_cast<double>(n));
  fd.floor_theta_ = 1.0 / ln;
  fd.floor_joint_ = 1.0 / (ln * ln);
  fd.known_ftheta_ = std::move(ftheta);
  fd.known_fstheta_ = std::move(fstheta);
  return fd;
}

double FittedDesign::ftheta_exact(const Eigen::VectorXd& theta) const {
  double flip = 1.0;
  Eigen::VectorXd th = reflect(theta, &flip);
  double h2 = h_star_ * h_star_;
  std::vector<long> idx;
  gather(th, support_chord(h_star_), idx);
  double acc = 0.0;
  for (long i : idx) {
    double u = (1.0 - theta_rows_.row(i).dot(th)) / h2;
    if (u < 1.0) acc += smoothing_kernel(u);
  }
  double norm;
  double half = 1.0;
  if (model_ == ModelKind::with_intercept) {
    norm = kde_normalizer_hemisphere(h_star_, d_, th(0));
    half = 0.5;
  } else {
    norm = kde_normalizer(h_star_, d_);
  }
  return half * norm / (n_ * std::pow(h_star_, d_ - 1)) * acc;
}

double FittedDesign::ftheta_raw(const Eigen::VectorXd& theta) const {
  if (known_ftheta_) return known_ftheta_(theta);
  if (!circle_cache_.empty()) {
    double flip = 1.0;
    Eigen::VectorXd th = reflect(theta, &flip);
    double a = std::atan2(th(1), th(0));
    int m = static_cast<int>(circle_cache_.size()) - 1;
    double pos = (a + M_PI) / (2.0 * M_PI) * m;
    int k = std::min(m - 1, std::max(0, static_cast<int>(pos)));
    double w = pos - k;
    return (1.0 - w) * circle_cache_[k] + w * circle_cache_[k + 1];
  }
  return ftheta_exact(theta);
}

double FittedDesign::ftheta(const Eigen::VectorXd& theta) const {
  if (known_ftheta_) return known_ftheta_(theta);
  return std::max(ftheta_raw(theta), floor_theta_);
}

double FittedDesign::fstheta_raw(double s, const Eigen::VectorXd& theta) const {
  if (known_fstheta_) return known_fstheta_(s, theta);
  double flip = 1.0;
  Eigen::VectorXd th = reflect(theta, &flip);
  double h2 = h_plus_ * h_plus_;
  std::vector<long> idx;
  gather(th, support_chord(h_plus_), idx);
  double acc = 0.0;
  double sq = flip * s;
  for (long i : idx) {
    double u = (1.0 - theta_rows_.row(i).dot(th)) / h2;
    if (u >= 1.0) continue;
    double w = (s_vals_(i) - sq) / h_plus_;
    if (std::abs(w) < 1.0) acc += smoothing_kernel(u) * smoothing_kernel(w);
  }
  double norm, half = 1.0;
  if (model_ == ModelKind::with_intercept) {
    norm = kde_normalizer_hemisphere(h_plus_, d_, th(0));
    half = 0.5;
  } else {
    norm = kde_normalizer(h_plus_, d_);
  }
  return half * norm / (n_ * std::pow(h_plus_, d_)) * acc;
}

double FittedDesign::fstheta(double s, const Eigen::VectorXd& theta) const {
  if (known_fstheta_) return known_fstheta_(s, theta);
  return std::max(fstheta_raw(s, theta), floor_joint_);
}

DesignSlice FittedDesign::slice(const Eigen::VectorXd& theta) const {
  DesignSlice sl;
  sl.ftheta = ftheta(theta);
  sl.h_plus = h_plus_;
  sl.floor_joint = floor_joint_;
  if (known_fstheta_) {
    Eigen::VectorXd th = theta;
    sl.known_joint = [f = known_fstheta_, th](double s) { return f(s, th); };
    return sl;
  }
  double flip = 1.0;
  Eigen::VectorXd th = reflect(theta, &flip);
  double h2 = h_plus_ * h_plus_;
  std::vector<long> idx;
  gather(th, support_chord(h_plus_), idx);
  std::vector<std::pair<double, double>> neighbors;  // (S_i in query frame, w)
  neighbors.reserve(idx.size());
  for (long i : idx) {
    double u = (1.0 - theta_rows_.row(i).dot(th)) / h2;
    if (u < 1.0)
      neighbors.emplace_back(flip * s_vals_(i), smoothing_kernel(u));
  }
  std::sort(neighbors.begin(), neighbors.end());
  double norm, half = 1.0;
  if (model_ == ModelKind::with_intercept) {
    norm = kde_normalizer_hemisphere(h_plus_, d_, th(0));
    half = 0.5;
  } else {
    norm = kde_normalizer(h_plus_, d_);
  }
  double prefactor = half * norm / (n_ * std::pow(h_plus_, d_));
  if (neighbors.empty()) return sl;

  sl.grid_step = h_plus_ / 16.0;
  double lo = neighbors.front().first - h_plus_ - sl.grid_step;
  double hi = neighbors.back().first + h_plus_ + sl.grid_step;
  auto m = static_cast<size_t>(std::ceil((hi - lo) / sl.grid_step)) + 1;
  sl.grid_lo = lo;
  sl.grid_vals.assign(m, 0.0);
  size_t start = 0;
  for (size_t g = 0; g < m; ++g) {
    double s = lo + g * sl.grid_step;
    while (start < neighbors.size() && neighbors[start].first < s - h_plus_)
      ++start;
    double acc = 0.0;
    for (size_t k = start;
         k < neighbors.size() && neighbors[k].first < s + h_plus_; ++k)
      acc += neighbors[k].second *
             smoothing_kernel((neighbors[k].first - s) / h_plus_);
    sl.grid_vals[g] = prefactor * acc;
  }
  return sl;
}

DesignDiagnostics FittedDesign::diagnostics(int resolution) const {
  DesignDiagnostics diag;
  diag.grid_size = resolution;
  auto grid = sphere_grid(d_ <= 3 ? d_ : 3, resolution);
  double mn = std::numeric_limits<double>::infinity();
  int below = 0;
  for (const auto& th : grid) {
    double v = ftheta_raw(th);
    mn = std::min(mn, v);
    if (v < floor_theta_) ++below;
  }
  diag.min_fhat = mn;
  diag.frac_below_floor = static_cast<double>(below) / grid.size();
  return diag;
}

double cauchy_direction_density(const Eigen::VectorXd& theta,
                                const Eigen::VectorXd& mu,
                                const Eigen::MatrixXd& sigma, int d) {
  if (theta.size() != d)
    throw std::invalid_argument("cauchy density: direction dimension");
  if (mu.size() != d - 1 || sigma.rows() != d - 1 || sigma.cols() != d - 1)
    throw std::invalid_argument("cauchy density: design dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("cauchy density: sigma must be SPD");
  double t1 = theta(0);
  double sgn = t1 >= 0.0 ? 1.0 : -1.0;
  Eigen::VectorXd y(d - 1);
  for (int j = 1; j < d; ++j) y(j - 1) = sgn * theta(j) - std::abs(t1) * mu(j - 1);
  double quad = y.dot(llt.solve(y));
  double det = 1.0;
  for (int j = 0; j < d - 1; ++j) det *= llt.matrixL()(j, j);
  double denom = 2.0 * std::pow(M_PI, 0.5 * d) * det *
                 std::pow(t1 * t1 + quad, 0.5 * d);
  return std::tgamma(0.5 * d) / denom;
}

double direction_density_from_design(
    const std::function<double(const Eigen::VectorXd&)>& f_x,
    const Eigen::VectorXd& theta, ModelKind model) {
  int d = static_cast<int>(theta.size());
  if (model == ModelKind::with_intercept) {
    double t1 = theta(0);
    double at1 = std::max(std::abs(t1), 1e-8);  // continuity at the rim
    Eigen::VectorXd x(d - 1);
    double s = t1 >= 0.0 ? 1.0 : -1.0;
    for (int j = 1; j < d; ++j) x(j - 1) = theta(j) / (s * at1);
    return f_x(x) / (2.0 * std::pow(at1, d));
  }
  // radial integral over dyadic segments with a tail-convergence check
  auto g = [&](double r) { return std::pow(r, d - 1) * f_x(r * theta); };
  double total = integrate_adaptive(g, 0.0, 1.0, 1e-12);
  double lo = 1.0;
  double last = 0.0;
  for (int k = 0; k < 40; ++k) {
    last = integrate_adaptive(g, lo, 2.0 * lo, 1e-12);
    total += last;
    lo *= 2.0;
    if (total > 0.0 && std::abs(last) < 1e-9 * std::max(total, 1e-300) &&
        k >= 6)
      return total;
  }
  if (!(std::abs(last) < 1e-6 * std::max(total, 1e-300)))
    throw NumericalDiagnosticError(
        "direction density: radial quadrature did not converge (design "
        "tails too heavy beyond cutoff)");
  return total;
}

}  // namespace rcshape
