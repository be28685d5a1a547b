#pragma once

#include <Eigen/Core>
#include <vector>

namespace rcshape {

// Radial test-function profile: polynomial on [0,1], zero beyond, with
// vanishing first and second derivative at the origin and unit integral
// over [0, inf).
class TestFunction {
 public:
  // c*(56x^3+21x^2+6x+1)(1-x)^6 with c chosen so the integral is one.
  static TestFunction default_poly();

  // Build from monomial coefficients of an un-normalized polynomial on
  // [0,1]; the normalizing constant is computed from exact monomial
  // integrals.
  explicit TestFunction(std::vector<double> raw_coef);

  double value(double x) const;         // phi(x), zero for x > 1
  double deriv(double x, int k) const;  // phi^{(k)}(x) for x in [0,1)

  double normalizing_constant() const { return norm_const_; }
  const std::vector<double>& coefficients() const { return coef_; }

 private:
  std::vector<double> coef_;  // normalized monomial coefficients
  double norm_const_ = 0.0;
};

// Surface volume of the m-sphere embedded in R^{m+1}; Vol(S^0) = 2.
double sphere_volume(int m);

// One local test: location, scale and unit direction.
struct TestPoint {
  Eigen::VectorXd t;
  double h = 0.0;
  Eigen::VectorXd v;

  int dim() const { return static_cast<int>(t.size()); }
  void validate() const;  // unit direction, positive scale
};

// Radially symmetric bump phi_{t,h}(b) = phi(||b-t||/h) / (h^d Vol(S^{d-2})).
double phi_bump(const TestFunction& phi, const Eigen::VectorXd& b,
                const TestPoint& tp, int d);

// Reduced kernel: the z-derivative of phi(sqrt(z^2+r^2)) integrated against
// r^{d-2} over r > 0. Computed by adaptive quadrature; zero for |z| >= 1.
double phi_tilde(const TestFunction& phi, double z, int d);

// order-th derivative of the reduced kernel, by analytic differentiation
// under the integral sign (the integrand is polynomial in closed form).
// Valid for 0 <= order <= d+1.
double phi_tilde_deriv(const TestFunction& phi, double z, int d, int order);

// Discrete principal-value Hilbert transform of samples on a uniform grid
// (spacing dx), f understood as zero outside the grid. Output on the same
// grid; the singular cell is handled through the odd-pairing identity.
std::vector<double> hilbert_transform(const std::vector<double>& f, double dx);

// Same transform evaluated at an arbitrary point u; x0 is the abscissa of
// f[0]. Works inside and beyond the support of f.
double hilbert_eval(const std::vector<double>& f, double x0, double dx,
                    double u);

// Signed constant of the inversion formula.
double inversion_constant(int d);

struct KernelGridSpec {
  double u_max = 0.0;  // 0 = dimension-dependent default
  int n_points = 0;    // 0 = dimension-dependent default
};

// Precomputed one-dimensional transformed kernel with linear interpolation
// between abscissae. Immutable after construction and shareable across
// threads.
class KernelTable {
 public:
  KernelTable() = default;

  int dimension() const { return d_; }
  double u_max() const { return u_max_; }
  int n_points() const { return static_cast<int>(psi_.size()); }
  double tail_coef() const { return tail_coef_; }
  double c_d() const { return c_d_; }
  double psi_l2sq() const { return psi_l2sq_; }
  double psi_sup() const { return psi_sup_; }
  const std::vector<double>& values() const { return psi_; }
  double grid_step() const { return step_; }
  const TestFunction& phi() const { return phi_; }

  // psi_d(u); linear interpolation on the grid, fitted 1/u tail beyond
  // u_max for even d, zero beyond the support for odd d.
  double eval(double u) const;

  friend KernelTable build_kernel_table(const TestFunction& phi, int d,
                                        const KernelGridSpec& spec);

 private:
  int d_ = 0;
  double u_max_ = 0.0;
  double step_ = 0.0;
  std::vector<double> psi_;
  double tail_coef_ = 0.0;
  double c_d_ = 0.0;
  double psi_l2sq_ = 0.0;
  double psi_sup_ = 0.0;
  TestFunction phi_ = TestFunction::default_poly();
};

KernelTable build_kernel_table(const TestFunction& phi, int d,
                               const KernelGridSpec& spec = {});

}  // namespace rcshape
