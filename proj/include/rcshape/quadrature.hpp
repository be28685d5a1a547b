#pragma once

#include <functional>
#include <vector>

namespace rcshape {

// Adaptive Simpson integration on [a, b] with absolute tolerance.
double integrate_adaptive(const std::function<double(double)>& f, double a,
                          double b, double tol = 1e-10, int max_depth = 48);

struct GaussRule {
  std::vector<double> nodes;    // on (-1, 1)
  std::vector<double> weights;  // sum to 2
};

// Gauss-Legendre nodes/weights, cached per order.
const GaussRule& gauss_legendre(int order);

// Composite Gauss-Legendre over [a, b] split into `panels` equal panels.
double integrate_gauss(const std::function<double(double)>& f, double a,
                       double b, int panels, int order = 8);

}  // namespace rcshape
