#include "rcshape/datagen.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>

#include "rcshape/rng.hpp"

namespace rcshape {

namespace {

// Square root of a positive semi-definite matrix; tolerates exact zeros.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return m;
  if (m.norm() == 0.0) return Eigen::MatrixXd::Zero(m.rows(), m.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.eigenvalues().minCoeff() < -1e-10 * es.eigenvalues().maxCoeff())
    throw std::invalid_argument("covariance matrix is not PSD");
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::VectorXd gaussian_vec(Engine& eng, int d) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd z(d);
  for (int k = 0; k < d; ++k) z(k) = gauss(eng);
  return z;
}

struct BetaSampler {
  const BetaSpec& spec;
  int d;
  std::vector<Eigen::MatrixXd> roots;
  Eigen::MatrixXd tail_root;

  BetaSampler(const BetaSpec& s, int dim) : spec(s), d(dim) {
    if (spec.kind == BetaSpec::Kind::mixture)
      for (const auto& c : spec.components) roots.push_back(psd_sqrt(c.cov));
    if (spec.kind == BetaSpec::Kind::exp_times_normal)
      tail_root = psd_sqrt(spec.tail_cov);
  }

  Eigen::VectorXd draw(Engine& eng, int* component) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    switch (spec.kind) {
      case BetaSpec::Kind::mixture: {
        double u = unit(eng);
        size_t pick = 0;
        double acc = 0.0;
        for (size_t j = 0; j < spec.components.size(); ++j) {
          acc += spec.components[j].weight;
          if (u <= acc || j + 1 == spec.components.size()) {
            pick = j;
            break;
          }
        }
        if (component) *component = static_cast<int>(pick);
        return spec.components[pick].mean + roots[pick] * gaussian_vec(eng, d);
      }
      case BetaSpec::Kind::uniform_box: {
        Eigen::VectorXd b(d);
        for (int k = 0; k < d; ++k)
          b(k) = spec.box_lo(k) + (spec.box_hi(k) - spec.box_lo(k)) * unit(eng);
        if (component) *component = 0;
        return b;
      }
      case BetaSpec::Kind::exp_times_normal: {
        double mean = spec.exp_parameter_is_mean ? spec.exp_parameter
                                                 : 1.0 / spec.exp_parameter;
        std::exponential_distribution<double> expo(1.0 / mean);
        Eigen::VectorXd b(d);
        b(0) = expo(eng);
        b.tail(d - 1) = spec.tail_mean + tail_root * gaussian_vec(eng, d - 1);
        if (component) *component = 0;
        return b;
      }
    }
    throw std::logic_error("unreachable");
  }
};

struct DesignSampler {
  const DesignSpec& spec;
  int dx;  // dimension of the random part of the design
  Eigen::MatrixXd root;

  DesignSampler(const DesignSpec& s, int dim) : spec(s), dx(dim) {
    if (spec.kind == DesignSpec::Kind::gaussian ||
        spec.kind == DesignSpec::Kind::cauchy)
      root = psd_sqrt(spec.sigma);
  }

  Eigen::VectorXd draw(Engine& eng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    switch (spec.kind) {
      case DesignSpec::Kind::uniform_box: {
        Eigen::VectorXd x(dx);
        for (int k = 0; k < dx; ++k)
          x(k) = spec.lo(k) + (spec.hi(k) - spec.lo(k)) * unit(eng);
        return x;
      }
      case DesignSpec::Kind::gaussian:
        return spec.mu + root * gaussian_vec(eng, dx);
      case DesignSpec::Kind::cauchy: {
        // multivariate t with one degree of freedom
        double w;
        do {
          w = gauss(eng);
        } while (w == 0.0);
        return spec.mu + root * gaussian_vec(eng, dx) / std::abs(w);
      }
      case DesignSpec::Kind::uniform_sphere: {
        Eigen::VectorXd x;
        do {
          x = gaussian_vec(eng, dx);
        } while (x.norm() == 0.0);
        return x / x.norm();
      }
    }
    throw std::logic_error("unreachable");
  }
};

}  // namespace

void DgpSpec::validate() const {
  if (d < 2) throw std::invalid_argument("dgp: dimension must be >= 2");
  if (n < 1) throw std::invalid_argument("dgp: n must be >= 1");
  int dx = model == ModelKind::with_intercept ? d - 1 : d;
  switch (beta.kind) {
    case BetaSpec::Kind::mixture: {
      if (beta.components.empty())
        throw std::invalid_argument("dgp: mixture needs components");
      double wsum = 0.0;
      for (const auto& c : beta.components) {
        if (c.weight < 0.0)
          throw std::invalid_argument("dgp: negative mixture weight");
        if (c.mean.size() != d || c.cov.rows() != d || c.cov.cols() != d)
          throw std::invalid_argument("dgp: component dimension mismatch");
        wsum += c.weight;
      }
      if (std::abs(wsum - 1.0) > 1e-9)
        throw std::invalid_argument("dgp: mixture weights must sum to 1");
      break;
    }
    case BetaSpec::Kind::uniform_box:
      if (beta.box_lo.size() != d || beta.box_hi.size() != d)
        throw std::invalid_argument("dgp: box dimension mismatch");
      if ((beta.box_hi - beta.box_lo).minCoeff() <= 0.0)
        throw std::invalid_argument("dgp: box bounds must be ordered");
      break;
    case BetaSpec::Kind::exp_times_normal:
      if (beta.exp_parameter <= 0.0)
        throw std::invalid_argument("dgp: exponential parameter must be > 0");
      if (beta.tail_mean.size() != d - 1 || beta.tail_cov.rows() != d - 1)
        throw std::invalid_argument("dgp: tail dimension mismatch");
      break;
  }
  switch (design.kind) {
    case DesignSpec::Kind::uniform_box:
      if (design.lo.size() != dx || design.hi.size() != dx)
        throw std::invalid_argument("dgp: design box dimension mismatch");
      if ((design.hi - design.lo).minCoeff() <= 0.0)
        throw std::invalid_argument("dgp: design box bounds must be ordered");
      break;
    case DesignSpec::Kind::gaussian:
    case DesignSpec::Kind::cauchy:
      if (design.mu.size() != dx || design.sigma.rows() != dx ||
          design.sigma.cols() != dx)
        throw std::invalid_argument("dgp: design dimension mismatch");
      break;
    case DesignSpec::Kind::uniform_sphere:
      break;
  }
}

RawDataset sample_dgp(const DgpSpec& spec) {
  spec.validate();
  int d = spec.d;
  int dx = spec.model == ModelKind::with_intercept ? d - 1 : d;
  long total = 2 * spec.n;

  BetaSampler beta_sampler(spec.beta, d);
  DesignSampler design_sampler(spec.design, dx);
  Engine eng = make_engine(spec.seed);

  RawDataset out;
  out.model = spec.model;
  out.X.resize(total, d);
  out.Y.resize(total);
  if (spec.retain_beta) {
    out.beta.resize(total, d);
    out.component.resize(total, 0);
  }
  for (long i = 0; i < total; ++i) {
    int comp = 0;
    Eigen::VectorXd b = beta_sampler.draw(eng, &comp);
    Eigen::VectorXd xr = design_sampler.draw(eng);
    Eigen::VectorXd x(d);
    if (spec.model == ModelKind::with_intercept) {
      x(0) = 1.0;
      x.tail(d - 1) = xr;
    } else {
      x = xr;
    }
    out.X.row(i) = x;
    out.Y(i) = b.dot(x);
    if (spec.retain_beta) {
      out.beta.row(i) = b;
      out.component[i] = comp;
    }
  }
  return out;
}

namespace {

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

Eigen::VectorXd vec3(double a, double b, double c) {
  Eigen::VectorXd v(3);
  v << a, b, c;
  return v;
}

GaussComponent comp(double w, Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  return GaussComponent{w, std::move(mean), std::move(cov)};
}

BetaSpec uniform_beta(int d, double lo, double hi) {
  BetaSpec b;
  b.kind = BetaSpec::Kind::uniform_box;
  b.box_lo = Eigen::VectorXd::Constant(d, lo);
  b.box_hi = Eigen::VectorXd::Constant(d, hi);
  return b;
}

BetaSpec normal_beta(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  BetaSpec b;
  b.kind = BetaSpec::Kind::mixture;
  b.components = {comp(1.0, mean, cov)};
  return b;
}

DesignSpec sphere_design() {
  DesignSpec s;
  s.kind = DesignSpec::Kind::uniform_sphere;
  return s;
}

DesignSpec box_design(int dx, double lo, double hi) {
  DesignSpec s;
  s.kind = DesignSpec::Kind::uniform_box;
  s.lo = Eigen::VectorXd::Constant(dx, lo);
  s.hi = Eigen::VectorXd::Constant(dx, hi);
  return s;
}

DesignSpec gaussian_design(const Eigen::VectorXd& mu,
                           const Eigen::MatrixXd& sigma) {
  DesignSpec s;
  s.kind = DesignSpec::Kind::gaussian;
  s.mu = mu;
  s.sigma = sigma;
  return s;
}

DesignSpec cauchy_design(const Eigen::VectorXd& mu,
                         const Eigen::MatrixXd& sigma) {
  DesignSpec s;
  s.kind = DesignSpec::Kind::cauchy;
  s.mu = mu;
  s.sigma = sigma;
  return s;
}

std::vector<DgpSpec> make_catalogue() {
  std::vector<DgpSpec> cat;
  Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd I3 = Eigen::MatrixXd::Identity(3, 3);

  {
    DgpSpec s;
    s.name = "sec4.1-trimodal";
    s.note = "trimodal normal mixture, directions uniform on the circle";
    s.d = 2;
    s.beta.kind = BetaSpec::Kind::mixture;
    s.beta.components = {comp(1.0 / 3.0, vec2(-0.4, -0.57), 0.2 * I2),
                         comp(1.0 / 3.0, vec2(1.5, -0.52), 0.2 * I2),
                         comp(1.0 / 3.0, vec2(0.45, 1.6), 0.15 * I2)};
    s.design = sphere_design();
    s.n = 20000;
    cat.push_back(s);
  }
  {
    DgpSpec s;
    s.name = "sec4.1-null";
    s.note = "uniform coefficients, directions uniform on the circle";
    s.d = 2;
    s.beta = uniform_beta(2, -5.0, 5.0);
    s.design = sphere_design();
    s.n = 20000;
    cat.push_back(s);
  }
  {
    DgpSpec s;
    s.name = "sec4.2-uniform-null";
    s.note = "cube design, uniform coefficients (level runs)";
    s.d = 3;
    s.beta = uniform_beta(3, -5.0, 5.0);
    s.design = box_design(3, -5.0, 5.0);
    s.n = 500;
    cat.push_back(s);
  }
  {
    DgpSpec s;
    s.name = "sec4.2-uniform-normal";
    s.note = "cube design, standard normal coefficients (power runs)";
    s.d = 3;
    s.beta = normal_beta(vec3(0, 0, 0), I3);
    s.design = box_design(3, -5.0, 5.0);
    s.n = 500;
    cat.push_back(s);
  }
  {
    DgpSpec s;
    s.name = "sec4.2-normal3-null";
    s.note = "shifted normal design, uniform coefficients";
    s.d = 3;
    s.beta = uniform_beta(3, -5.0, 5.0);
    s.design = gaussian_design(vec3(3, 0, 0), 2.0 * I3);
    s.n = 500;
    cat.push_back(s);
  }
  {
    DgpSpec s;
    s.name = "sec4.2-normal3-normal";
    s.note = "shifted normal design, standard normal coefficients";
    s.d = 3;
    s.beta = normal_beta(vec3(0, 0, 0), I3);
    s.design = gaussian_design(vec3(3, 0, 0), 2.0 * I3);
    s.n = 500;
    cat.push_back(s);
  }
  {
    DgpSpec s;
    s.name = "sec4.2-cauchy-null";
    s.note = "intercept model, standard Cauchy design, uniform coefficients";
    s.d = 3;
    s.model = ModelKind::with_intercept;
    s.beta = uniform_beta(3, -5.0, 5.0);
    s.design = cauchy_design(Eigen::VectorXd::Zero(2), I2);
    s.n = 500;
    cat.push_back(s);
  }
  {
    DgpSpec s;
    s.name = "sec4.2-cauchy-normal";
    s.note = "intercept model, standard Cauchy design, normal coefficients";
    s.d = 3;
    s.model = ModelKind::with_intercept;
    s.beta = normal_beta(vec3(0, 0, 0), I3);
    s.design = cauchy_design(Eigen::VectorXd::Zero(2), I2);
    s.n = 500;
    cat.push_back(s);
  }
  {
    DgpSpec s;
    s.name = "sec4.2-gauss2-null";
    s.note = "intercept model, standard normal design, uniform coefficients";
    s.d = 3;
    s.model = ModelKind::with_intercept;
    s.beta = uniform_beta(3, -5.0, 5.0);
    s.design = gaussian_design(Eigen::VectorXd::Zero(2), I2);
    s.n = 500;
    cat.push_back(s);
  }
  {
    DgpSpec s;
    s.name = "sec4.2-gauss2-normal";
    s.note = "intercept model, standard normal design, normal coefficients";
    s.d = 3;
    s.model = ModelKind::with_intercept;
    s.beta = normal_beta(vec3(0, 0, 0), I3);
    s.design = gaussian_design(Eigen::VectorXd::Zero(2), I2);
    s.n = 500;
    cat.push_back(s);
  }
  {
    DgpSpec s;
    s.name = "sec4.2-unifsq-null";
    s.note = "intercept model, square design, uniform coefficients";
    s.d = 3;
    s.model = ModelKind::with_intercept;
    s.beta = uniform_beta(3, -5.0, 5.0);
    s.design = box_design(2, -5.0, 5.0);
    s.n = 500;
    cat.push_back(s);
  }
  {
    DgpSpec s;
    s.name = "sec4.2-unifsq-normal";
    s.note = "intercept model, square design, normal coefficients";
    s.d = 3;
    s.model = ModelKind::with_intercept;
    s.beta = normal_beta(vec3(0, 0, 0), I3);
    s.design = box_design(2, -5.0, 5.0);
    s.n = 500;
    cat.push_back(s);
  }
  {
    DgpSpec s;
    s.name = "sec4.3-bimodal";
    s.note = "two close modes, directions uniform on the circle";
    s.d = 2;
    Eigen::MatrixXd c1(2, 2);
    c1 << 0.05, 0.0, 0.0, 0.4;
    s.beta.kind = BetaSpec::Kind::mixture;
    s.beta.components = {comp(0.5, vec2(0, 0), c1),
                         comp(0.5, vec2(2, 0), 0.1 * I2)};
    s.design = sphere_design();
    s.n = 2000;
    cat.push_back(s);
  }
  {
    DgpSpec s;
    s.name = "sec4.3-null";
    s.note = "uniform coefficients, directions uniform on the circle";
    s.d = 2;
    s.beta = uniform_beta(2, -5.0, 5.0);
    s.design = sphere_design();
    s.n = 2000;
    cat.push_back(s);
  }
  {
    DgpSpec s;
    s.name = "sec4.4-i";
    s.note = "intercept model, Cauchy design, standard normal coefficients";
    s.d = 3;
    s.model = ModelKind::with_intercept;
    s.beta = normal_beta(vec3(0, 0, 0), I3);
    s.design = cauchy_design(Eigen::VectorXd::Zero(2), I2);
    s.n = 500;
    cat.push_back(s);
  }
  {
    DgpSpec s;
    s.name = "sec4.4-ii";
    s.note = "intercept model, Cauchy design, bimodal coefficients";
    s.d = 3;
    s.model = ModelKind::with_intercept;
    s.beta.kind = BetaSpec::Kind::mixture;
    s.beta.components = {comp(0.5, vec3(0, 0, 0), 0.1 * I3),
                         comp(0.5, vec3(2, 0, 0), 0.1 * I3)};
    s.design = cauchy_design(Eigen::VectorXd::Zero(2), I2);
    s.n = 500;
    cat.push_back(s);
  }
  {
    DgpSpec s;
    s.name = "sec4.4-iii";
    s.note = "intercept model, Cauchy design, skewed first coefficient";
    s.d = 3;
    s.model = ModelKind::with_intercept;
    s.beta.kind = BetaSpec::Kind::exp_times_normal;
    s.beta.exp_parameter = 2.0;
    s.beta.exp_parameter_is_mean = true;
    s.beta.tail_mean = Eigen::VectorXd::Zero(2);
    s.beta.tail_cov = 0.1 * I2;
    s.design = cauchy_design(Eigen::VectorXd::Zero(2), I2);
    s.n = 500;
    cat.push_back(s);
  }
  return cat;
}

}  // namespace

const std::vector<DgpSpec>& builtin_scenarios() {
  static const std::vector<DgpSpec> cat = make_catalogue();
  return cat;
}

const DgpSpec& find_scenario(const std::string& name) {
  for (const auto& s : builtin_scenarios())
    if (s.name == name) return s;
  throw std::invalid_argument("unknown scenario: " + name);
}

}  // namespace rcshape
