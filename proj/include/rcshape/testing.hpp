#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rcshape/limit_sim.hpp"

namespace rcshape {

enum class ProcedureKind { single, mode_at_point, global_scan, monotonicity_map };

enum class HypothesisSide { plus, minus };

struct HypothesisFamily {
  std::vector<TestPoint> points;
  std::vector<HypothesisSide> sides;
  ProcedureKind procedure = ProcedureKind::single;
  Eigen::VectorXd region_lo, region_hi;  // empty when no region applies
  void validate() const;
};

struct TestEntry {
  TestPoint tp;
  double t_hat = 0.0;
  double sigma_hat = 0.0;
  double kappa = 0.0;
  bool reject_plus = false;
  bool reject_minus = false;
};

struct TestOutcome {
  ProcedureKind procedure = ProcedureKind::single;
  double alpha = 0.0;
  std::vector<TestEntry> entries;
  bool mode_detected = false;
  std::vector<Eigen::VectorXd> candidates;  // global scan: certified vertices
  std::string verdict;
  std::string quantile_mode;
  std::string diagnostics;
};

// Rejection flags for both one-sided hypotheses under the sign convention
// of the inversion constant: the minus hypothesis falls when
// sgn(c_d) t_hat exceeds kappa, the plus hypothesis when it drops below
// -kappa.
std::pair<bool, bool> decide_rejections(double t_hat, double kappa, int d);

// How the per-(scale, direction) rejections combine into a mode verdict
// when several scales run simultaneously.
enum class CombineRule {
  per_direction_any_scale,  // every direction rejected at some scale
  any_scale_full,           // some scale rejects all directions
  all_scales_full           // every scale rejects all directions
};

// Scalar whose exceedance reproduces the combined verdict; feeds the
// calibration of multiscale mode tests. Family layout: scale-major,
// direction-minor.
std::function<double(const std::vector<double>&)> detection_functional(
    CombineRule rule, size_t n_scales, size_t n_directions);

struct QuantileChoice {
  enum class Kind { theoretical, calibrated };
  Kind kind = Kind::theoretical;
  QuantileSpec mc;          // theoretical mode
  double threshold = 0.0;   // calibrated threshold multiplier
  // cached per-test thresholds (theoretical mode only); skips the
  // quantile simulation when the family matches
  std::vector<double> per_test_override;
};

struct ModeTestOptions {
  double offset_multiplier = 2.0;  // ring radius in units of h
  double c_factor = 4.0;
  CombineRule combine = CombineRule::per_direction_any_scale;
};

// Mode test at a fixed location: ring family around b0, one-sided minus
// hypotheses, detection when the combined rule holds.
TestOutcome mode_test(const ProjectedSample& sample,
                      const FittedDesign& design, const KernelTable& kt,
                      const Eigen::VectorXd& b0,
                      const std::vector<double>& scales,
                      const std::vector<Eigen::VectorXd>& directions,
                      double alpha, const QuantileChoice& quant,
                      const ModeTestOptions& opt = {});

struct GlobalScanOptions {
  double offset_multiplier = 2.0;
  double c_factor = 4.0;
  int direction_resolution = 8;  // ring directions per vertex
};

// Scan a hyperrectangle for modes: per scale, vertices on a mesh of width
// h; a vertex is certified when its whole ring rejects. One joint
// quantile covers every local test.
TestOutcome global_mode_scan(const ProjectedSample& sample,
                             const FittedDesign& design, const KernelTable& kt,
                             const Eigen::VectorXd& region_lo,
                             const Eigen::VectorXd& region_hi,
                             const std::vector<double>& scales, double alpha,
                             const QuantileChoice& quant,
                             const GlobalScanOptions& opt = {});

struct MonotonicityMapOptions {
  double grid_step = 0.0;  // 0 = twice the scale
};

struct Arrow {
  Eigen::VectorXd t;
  Eigen::VectorXd v;
};

// Bivariate map of certified directional decreases on a fixed scale.
TestOutcome monotonicity_map(const ProjectedSample& sample,
                             const FittedDesign& design, const KernelTable& kt,
                             double h0, const Eigen::VectorXd& region_lo,
                             const Eigen::VectorXd& region_hi, double alpha,
                             const QuantileChoice& quant,
                             const MonotonicityMapOptions& opt = {});

std::vector<Arrow> outcome_arrows(const TestOutcome& outcome);

struct OlsResult {
  Eigen::VectorXd gamma;
  Eigen::VectorXd se;  // heteroscedasticity-robust
  long n = 0;
};

// Least squares of the normalized response on the normalized design with
// sandwich standard errors; the parametric reference method.
OlsResult ols_baseline(const RawDataset& raw);

}  // namespace rcshape
