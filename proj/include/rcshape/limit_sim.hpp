#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rcshape/datagen.hpp"
#include "rcshape/design_density.hpp"
#include "rcshape/statistics.hpp"

namespace rcshape {

// Partition of the cylinder into equal-measure-friendly cells: angular
// arcs (d=2) or equal-area latitude bands times longitude arcs (d=3),
// crossed with a uniform s-grid.
struct NoiseGridSpec {
  int circle_cells = 256;  // d = 2
  int z_cells = 22;        // d = 3
  int phi_cells = 23;
  double s_step = 0.0;  // 0 = h_min / 4
  double s_lo = 0.0, s_hi = 0.0;

  NoiseGridSpec refined(int factor = 2) const {
    NoiseGridSpec r = *this;
    r.circle_cells *= factor;
    r.z_cells *= factor;
    r.phi_cells *= factor;
    r.s_step = s_step / factor;
    return r;
  }
};

// Gaussian nu-noise discretized on the cylinder. Cell draws are addressed
// by (seed, cell index), so evaluation is lazy, order-independent and
// identical under any parallel schedule.
class NoiseField {
 public:
  NoiseField(int d, const NoiseGridSpec& grid, std::uint64_t seed);

  // Coarse field derived from a finer one by summing child-cell noise;
  // used for common-random-number refinement checks.
  static NoiseField aggregated(const NoiseField& fine, int theta_factor,
                               int s_factor);

  int dim() const { return d_; }
  long n_theta() const { return n_theta_; }
  long n_s() const { return n_s_; }
  long n_cells() const { return n_theta_ * n_s_; }
  double s_lo() const { return grid_.s_lo; }
  double s_hi() const { return grid_.s_hi; }
  double s_step() const { return grid_.s_step; }
  double s_center(long is) const { return grid_.s_lo + (is + 0.5) * grid_.s_step; }
  Eigen::VectorXd theta_center(long it) const;
  double theta_measure(long it) const;  // surface measure of the patch
  double cell_measure(long it, long is) const {
    return theta_measure(it) * grid_.s_step;
  }
  // W(cell) = z * sqrt(measure)
  double cell_noise(long it, long is) const;

  const NoiseGridSpec& grid() const { return grid_; }

 private:
  int d_ = 2;
  NoiseGridSpec grid_;
  std::uint64_t seed_ = 0;
  long n_theta_ = 0, n_s_ = 0;
  std::vector<double> stored_;  // aggregated fields only
};

// Noise grid covering [lo - h_max u_max, hi + h_max u_max].
NoiseGridSpec plan_noise_grid(int d, double data_s_lo, double data_s_hi,
                              double h_min, double h_max, double u_max,
                              const NoiseGridSpec& base = {});

// One draw of the limit process at a test point: the discrete stochastic
// integral of the kernel against the noise field.
double draw_limit_process(const NoiseField& noise, const FittedDesign& design,
                          const KernelTable& kt, const TestPoint& tp);

struct QuantileSpec {
  double alpha = 0.05;
  int n_mc = 5000;
  std::uint64_t seed = 1;
  NoiseGridSpec grid;  // s-range planned automatically when unset
  SigmaQuadSpec sigma_quad;
  int jobs = 0;
};

struct QuantileResult {
  double kappa = 0.0;            // multiscale quantile
  std::vector<double> per_test;  // per-test thresholds on the T-hat scale
  std::vector<double> sigma;     // stddev estimates entering the thresholds
  double alpha = 0.0;
  int n_mc = 0;
  long n = 0;
  std::string mode;  // "theoretical" or "calibrated"
};

// Monte Carlo estimate of the multiscale quantile and the induced
// per-test thresholds. One fresh noise field per replication; all test
// points share a replication's field.
QuantileResult multiscale_quantile(const std::vector<TestPoint>& family,
                                   const FittedDesign& design,
                                   const KernelTable& kt, long n_stat,
                                   const QuantileSpec& spec);

// Lower-level variant used by refinement checks: evaluates the supremum
// statistic on caller-provided noise fields.
double multiscale_sup_statistic(
    const std::vector<TestPoint>& family, const std::vector<double>& sigma,
    const FittedDesign& design, const KernelTable& kt, const NoiseField& noise);

struct PipelineSimSpec {
  DgpSpec dgp;  // per-replication seeds derived from its seed
  DesignConfig design_cfg;
  int n_reps = 1000;
  SigmaQuadSpec sigma_quad;
  int jobs = 0;
  // closed-form direction density for the "known" variant
  std::function<double(const Eigen::VectorXd&)> known_ftheta;
};

// Full pipeline per replication: draw data, normalize, fit the design on
// the estimation half, and return the standardized statistics
// sgn(c_d) sqrt(n) T / sigma per family member.
std::vector<std::vector<double>> simulate_standardized(
    const std::vector<TestPoint>& family, const KernelTable& kt,
    const PipelineSimSpec& spec);

// k-th largest with k = ceil(alpha * n): the exceedance threshold whose
// crossing rate is the nominal level on the simulated null.
double threshold_from_null(std::vector<double> stats, double alpha);

struct CalibrationSpec {
  DgpSpec null_dgp;  // per-replication seeds derived from its seed
  DesignConfig design_cfg;
  double alpha = 0.05;
  int n_reps = 1000;
  SigmaQuadSpec sigma_quad;
  int jobs = 0;
  // closed-form direction density when calibrating the "known" variant
  std::function<double(const Eigen::VectorXd&)> known_ftheta;
  // maps the family's standardized statistics to the scalar whose
  // exceedance defines a detection; default: minimum over the family
  std::function<double(const std::vector<double>&)> detection_stat;
};

struct CalibrationResult {
  double threshold = 0.0;  // multiplier on the standardized scale
  double alpha = 0.0;
  int n_reps = 0;
  bool unstable = false;  // alpha * n_reps < 10
  std::vector<double> null_stats;  // detection statistic per replication
};

// Simulates the full pipeline under the null and returns the threshold
// multiplier whose exceedance has the nominal detection rate.
CalibrationResult calibrate_threshold(const std::vector<TestPoint>& family,
                                      const KernelTable& kt,
                                      const CalibrationSpec& spec);

}  // namespace rcshape
