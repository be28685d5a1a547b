#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "rcshape/kernels.hpp"

namespace rcshape {

enum class ModelKind { no_intercept, with_intercept };

// Raw observations (X_i, Y_i); with-intercept data has first regressor 1.
struct RawDataset {
  Eigen::MatrixXd X;  // rows x d
  Eigen::VectorXd Y;
  ModelKind model = ModelKind::no_intercept;
  // Optional oracle payload retained by the data generator.
  Eigen::MatrixXd beta;             // rows x d or empty
  std::vector<int> component;       // mixture component per row or empty

  long rows() const { return X.rows(); }
  int dim() const { return static_cast<int>(X.cols()); }
  void validate() const;
};

// Observations normalized onto the cylinder R x S^{d-1}. The first
// `n_stat` rows feed the statistic, the remainder feeds the density
// estimators. Immutable after construction.
struct ProjectedSample {
  Eigen::VectorXd S;
  Eigen::MatrixXd Theta;  // rows x d, unit rows
  Eigen::VectorXd sign;   // recorded symmetrization signs
  long n_stat = 0;
  ModelKind model = ModelKind::no_intercept;

  long rows() const { return S.size(); }
  long n_est() const { return rows() - n_stat; }
  int dim() const { return static_cast<int>(Theta.cols()); }
};

struct NormalizeOptions {
  // Sign randomization is forced on for the intercept model; this switch
  // additionally enables it for the model without intercept.
  bool randomize_signs_without_intercept = false;
};

// Scale each row onto the cylinder, randomizing signs for the intercept
// model, and tag the half split (first half statistic, second half
// estimation).
ProjectedSample normalize(const RawDataset& raw, std::uint64_t seed,
                          const NormalizeOptions& opt = {});

// Deterministic core of normalize with caller-provided signs.
ProjectedSample normalize_with_signs(const RawDataset& raw,
                                     const Eigen::VectorXd& signs);

// Grid of unit vectors: equally spaced angles for d=2, Fibonacci points
// for d=3. Larger d requires caller-supplied directions.
std::vector<Eigen::VectorXd> sphere_grid(int d, int resolution);

// Largest distance from any direction to the grid (estimated by probing).
double covering_radius(const std::vector<Eigen::VectorXd>& grid,
                       int probes = 4096, std::uint64_t seed = 1);

struct ModeScanOptions {
  double c_factor = 4.0;        // admissible ring width bound, must be > 2
  double offset_multiplier = 2.0;  // ring radius in units of h
};

// Ring of local tests around b0: for each scale and direction, a test
// location offset along the direction with the direction aligned outward.
std::vector<TestPoint> mode_scan_points(
    const Eigen::VectorXd& b0, const std::vector<double>& scales,
    const std::vector<Eigen::VectorXd>& directions,
    const ModeScanOptions& opt = {});

}  // namespace rcshape
