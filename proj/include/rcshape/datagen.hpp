#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "rcshape/geometry.hpp"

namespace rcshape {

struct GaussComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // positive semi-definite; zero means a point mass
};

// Law of the random coefficients.
struct BetaSpec {
  enum class Kind { mixture, uniform_box, exp_times_normal };
  Kind kind = Kind::mixture;
  std::vector<GaussComponent> components;  // mixture
  Eigen::VectorXd box_lo, box_hi;          // uniform_box
  // exp_times_normal: first coordinate exponential, remaining Gaussian
  double exp_parameter = 2.0;
  bool exp_parameter_is_mean = true;
  Eigen::VectorXd tail_mean;
  Eigen::MatrixXd tail_cov;
};

// Law of the design vector. For the intercept model this describes the
// non-constant regressors (X_2,...,X_d).
struct DesignSpec {
  enum class Kind { uniform_box, gaussian, cauchy, uniform_sphere };
  Kind kind = Kind::uniform_box;
  Eigen::VectorXd lo, hi;  // uniform_box
  Eigen::VectorXd mu;      // gaussian / cauchy location
  Eigen::MatrixXd sigma;   // gaussian covariance / cauchy scale matrix
};

struct DgpSpec {
  std::string name;
  std::string note;
  BetaSpec beta;
  DesignSpec design;
  ModelKind model = ModelKind::no_intercept;
  int d = 2;       // dimension of beta
  long n = 1000;   // statistic-half size; the sampler emits 2n rows
  std::uint64_t seed = 1;
  bool retain_beta = false;

  void validate() const;
};

// Draw 2n rows (split-ready) with Y_i = <beta_i, X_i>.
RawDataset sample_dgp(const DgpSpec& spec);

// Named configurations of the simulation studies.
const std::vector<DgpSpec>& builtin_scenarios();
const DgpSpec& find_scenario(const std::string& name);

}  // namespace rcshape
