#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "rcshape/geometry.hpp"

namespace rcshape {

// Compactly supported smoothing kernel used by all density estimators:
// (3/4)(1-u^2) on [-1,1]. The spherical estimators apply it to the
// nonnegative argument (1-<theta',theta>)/h^2.
double smoothing_kernel(double u);

// Normalizing constant of the spherical estimator: h^{d-1} over the
// spherical integral of the kernel; independent of the pole.
double kde_normalizer(double h, int d);

// Hemisphere variant; depends on the pole only through |theta_1|.
double kde_normalizer_hemisphere(double h, int d, double theta1);

// Direction-density estimator at theta from estimation rows (full sphere).
double spherical_kde(const Eigen::MatrixXd& theta_rows, double h_star,
                     const Eigen::VectorXd& theta);

// Joint estimator of the (projection, direction) density.
double joint_kde(const Eigen::MatrixXd& theta_rows, const Eigen::VectorXd& s,
                 double h_plus, double s_query, const Eigen::VectorXd& theta);

struct DesignConfig {
  double h_star = 0.0;  // 0 = order-based default, capped at 0.5
  double h_plus = 0.0;
  int circle_cache = 4096;  // d=2 cache resolution for the direction
                            // density; 0 evaluates the sum exactly
  long min_rows = 50;
};

struct DesignDiagnostics {
  double min_fhat = 0.0;            // smallest pre-cutoff estimate on a grid
  double frac_below_floor = 0.0;    // fraction of grid directions at the floor
  int grid_size = 0;
};

// Repeated joint-density evaluations for a fixed direction. The
// per-direction kernel weights are accumulated once onto a fine s-grid
// (spacing h_plus/16), so scans over s cost one interpolation each; the
// gridding error is far below the quadrature tolerances that consume it.
struct DesignSlice {
  double ftheta = 0.0;       // floored direction density at the slice
  double h_plus = 0.0;
  double floor_joint = 0.0;
  std::function<double(double)> known_joint;  // closed form when present

  double grid_lo = 0.0, grid_step = 0.0;
  std::vector<double> grid_vals;  // pre-cutoff joint density samples

  double fstheta(double s) const;      // floored
  double fstheta_raw(double s) const;  // pre-cutoff
};

// Evaluable design densities with the cut-off floors. Immutable and
// shareable once fitted.
class FittedDesign {
 public:
  // Fit both estimators on the estimation half.
  static FittedDesign fit(const ProjectedSample& sample,
                          const DesignConfig& cfg = {});

  // Known direction density; the joint density is still estimated.
  static FittedDesign fit_known_direction(
      const ProjectedSample& sample,
      std::function<double(const Eigen::VectorXd&)> ftheta,
      const DesignConfig& cfg = {});

  // Fully closed-form plug-ins (testing and oracle work).
  static FittedDesign known_closed_form(
      int d, ModelKind model, long n,
      std::function<double(const Eigen::VectorXd&)> ftheta,
      std::function<double(double, const Eigen::VectorXd&)> fstheta);

  double ftheta(const Eigen::VectorXd& theta) const;
  double ftheta_raw(const Eigen::VectorXd& theta) const;
  double fstheta(double s, const Eigen::VectorXd& theta) const;
  double fstheta_raw(double s, const Eigen::VectorXd& theta) const;
  DesignSlice slice(const Eigen::VectorXd& theta) const;

  DesignDiagnostics diagnostics(int resolution = 200) const;

  int dim() const { return d_; }
  ModelKind model() const { return model_; }
  long n_est() const { return n_; }
  double h_star() const { return h_star_; }
  double h_plus() const { return h_plus_; }
  double floor_theta() const { return floor_theta_; }
  double floor_joint() const { return floor_joint_; }
  bool known_direction() const { return static_cast<bool>(known_ftheta_); }

 private:
  int d_ = 0;
  ModelKind model_ = ModelKind::no_intercept;
  long n_ = 0;
  double h_star_ = 0.0, h_plus_ = 0.0;
  double floor_theta_ = 0.0, floor_joint_ = 0.0;

  // estimation data (hemisphere-reflected for the intercept model)
  Eigen::MatrixXd theta_rows_;
  Eigen::VectorXd s_vals_;

  // neighbor lookup: d=2 sorted angles, d>=3 latitude-sorted rows
  std::vector<double> sorted_angles_;
  std::vector<long> angle_order_;
  std::vector<long> lat_order_;
  std::vector<double> sorted_lat_;

  // d=2 circle cache of the pre-cutoff direction density
  std::vector<double> circle_cache_;

  std::function<double(const Eigen::VectorXd&)> known_ftheta_;
  std::function<double(double, const Eigen::VectorXd&)> known_fstheta_;

  // gather indices within chord radius of theta (reflected coordinates)
  void gather(const Eigen::VectorXd& theta, double chord,
              std::vector<long>& out) const;
  double ftheta_exact(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd reflect(const Eigen::VectorXd& theta, double* flip) const;
  void build_index();
  friend struct DesignSlice;
};

// Bandwidth defaults of order log(n)^{7/(d-1)} n^{-1/(d-1)} and
// log(n)^{3/d} n^{-1/(2d)}, times 2, capped at 0.5.
double default_h_star(long n, int d);
double default_h_plus(long n, int d);

// Closed-form direction density for a Cauchy design in the intercept
// model; mu and sigma describe the (d-1)-dimensional design law.
double cauchy_direction_density(const Eigen::VectorXd& theta,
                                const Eigen::VectorXd& mu,
                                const Eigen::MatrixXd& sigma, int d);

// Direction density induced by a design density: radial integral for the
// model without intercept, change of variables for the intercept model.
double direction_density_from_design(
    const std::function<double(const Eigen::VectorXd&)>& f_x,
    const Eigen::VectorXd& theta, ModelKind model);

}  // namespace rcshape
