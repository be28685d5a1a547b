#pragma once

#include <vector>

#include "rcshape/design_density.hpp"
#include "rcshape/geometry.hpp"
#include "rcshape/kernels.hpp"

namespace rcshape {

struct StatResult {
  TestPoint tp;
  double t_hat = 0.0;
  double sigma_hat = 0.0;
  double standardized = 0.0;  // sqrt(n) t_hat / sigma_hat
  long n = 0;
};

// Product quadrature for the variance integral: a sphere rule times a 1-d
// rule over the kernel variable. Doubling every count below must move the
// result by well under a percent.
struct SigmaQuadSpec {
  int circle_nodes = 256;  // d = 2
  int z_nodes = 24;        // d = 3: Gauss-Legendre latitudes
  int phi_nodes = 48;      //        times equally spaced longitudes
  int s_panels = 12;       // panels on the unit kernel interval
  int s_order = 8;

  SigmaQuadSpec refined(int factor = 2) const {
    SigmaQuadSpec r = *this;
    r.circle_nodes *= factor;
    r.z_nodes *= factor;
    r.phi_nodes *= factor;
    r.s_panels *= factor;
    return r;
  }
};

struct SphereRule {
  std::vector<Eigen::VectorXd> nodes;
  std::vector<double> weights;  // sum to the sphere volume
};

// d=2: trapezoid on the circle; d=3: Gauss-Legendre in latitude times
// trapezoid in longitude (exact on quadratics, so the variance integral
// keeps its rotational symmetry).
SphereRule sphere_rule(int d, const SigmaQuadSpec& spec);

// Plug-in local statistic at one test point.
double local_statistic(const ProjectedSample& sample,
                       const FittedDesign& design, const KernelTable& kt,
                       const TestPoint& tp);

// Same over a family, sharing the estimated-density evaluations.
std::vector<double> local_statistic_family(const ProjectedSample& sample,
                                           const FittedDesign& design,
                                           const KernelTable& kt,
                                           const std::vector<TestPoint>& family);

// Standard-deviation estimate of the standardized statistic.
double local_stddev(const FittedDesign& design, const KernelTable& kt,
                    const TestPoint& tp, const SigmaQuadSpec& quad = {});

std::vector<double> local_stddev_family(const FittedDesign& design,
                                        const KernelTable& kt,
                                        const std::vector<TestPoint>& family,
                                        const SigmaQuadSpec& quad = {});

StatResult stat_result(const ProjectedSample& sample,
                       const FittedDesign& design, const KernelTable& kt,
                       const TestPoint& tp, const SigmaQuadSpec& quad = {});

// Multiscale calibration pair (alpha_h, beta_h).
struct ScaleCalibration {
  double alpha = 0.0;
  double beta = 1.0;
};

ScaleCalibration scale_calibration(double h, int d);

}  // namespace rcshape
