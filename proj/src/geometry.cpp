#include "rcshape/geometry.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "rcshape/rng.hpp"

namespace rcshape {

void RawDataset::validate() const {
  if (X.rows() != Y.size())
    throw std::invalid_argument("dataset: X and Y row counts differ");
  if (X.cols() < 2)
    throw std::invalid_argument("dataset: dimension must be >= 2");
  for (long i = 0; i < X.rows(); ++i) {
    if (X.row(i).norm() == 0.0)
      throw std::invalid_argument("dataset: zero-norm design row at index " +
                                  std::to_string(i));
    if (model == ModelKind::with_intercept && X(i, 0) != 1.0)
      throw std::invalid_argument(
          "dataset: intercept model requires x1 == 1, violated at row " +
          std::to_string(i));
  }
}

ProjectedSample normalize_with_signs(const RawDataset& raw,
                                     const Eigen::VectorXd& signs) {
  raw.validate();
  if (signs.size() != raw.rows())
    throw std::invalid_argument("normalize: sign vector length mismatch");
  ProjectedSample out;
  long n = raw.rows();
  out.S.resize(n);
  out.Theta.resize(n, raw.dim());
  out.sign = signs;
  out.model = raw.model;
  out.n_stat = n - n / 2;  // first half statistic
  for (long i = 0; i < n; ++i) {
    double nrm = raw.X.row(i).norm();
    out.S(i) = signs(i) * raw.Y(i) / nrm;
    out.Theta.row(i) = signs(i) * raw.X.row(i) / nrm;
  }
  return out;
}

ProjectedSample normalize(const RawDataset& raw, std::uint64_t seed,
                          const NormalizeOptions& opt) {
  bool randomize = raw.model == ModelKind::with_intercept ||
                   opt.randomize_signs_without_intercept;
  Eigen::VectorXd signs = Eigen::VectorXd::Ones(raw.rows());
  if (randomize) {
    Engine eng = make_engine(seed);
    std::bernoulli_distribution flip(0.5);
    for (long i = 0; i < raw.rows(); ++i) signs(i) = flip(eng) ? -1.0 : 1.0;
  }
  return normalize_with_signs(raw, signs);
}

std::vector<Eigen::VectorXd> sphere_grid(int d, int resolution) {
  if (resolution < 1)
    throw std::invalid_argument("sphere_grid: resolution must be >= 1");
  std::vector<Eigen::VectorXd> grid;
  grid.reserve(resolution);
  if (d == 2) {
    for (int k = 0; k < resolution; ++k) {
      double a = 2.0 * M_PI * k / resolution;
      Eigen::VectorXd v(2);
      v << std::cos(a), std::sin(a);
      grid.push_back(v);
    }
  } else if (d == 3) {
    double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < resolution; ++k) {
      double z = 1.0 - (2.0 * k + 1.0) / resolution;
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      double a = golden * k;
      Eigen::VectorXd v(3);
      v << r * std::cos(a), r * std::sin(a), z;
      grid.push_back(v);
    }
  } else {
    throw std::invalid_argument(
        "sphere_grid: built-in grids support d in {2,3}; pass explicit "
        "directions for higher dimensions");
  }
  return grid;
}

double covering_radius(const std::vector<Eigen::VectorXd>& grid, int probes,
                       std::uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("covering_radius: empty grid");
  int d = static_cast<int>(grid.front().size());
  Engine eng = make_engine(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    Eigen::VectorXd x(d);
    do {
      for (int k = 0; k < d; ++k) x(k) = gauss(eng);
    } while (x.norm() == 0.0);
    x.normalize();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : grid) best = std::min(best, (x - g).norm());
    worst = std::max(worst, best);
  }
  return worst;
}

std::vector<TestPoint> mode_scan_points(
    const Eigen::VectorXd& b0, const std::vector<double>& scales,
    const std::vector<Eigen::VectorXd>& directions,
    const ModeScanOptions& opt) {
  if (opt.c_factor <= 2.0)
    throw std::invalid_argument("mode_scan_points: c_factor must be > 2");
  if (opt.offset_multiplier <= 0.0)
    throw std::invalid_argument("mode_scan_points: offset must be positive");
  if (scales.empty())
    throw std::invalid_argument("mode_scan_points: no scales given");
  std::vector<TestPoint> family;
  family.reserve(scales.size() * directions.size());
  for (double h : scales) {
    if (h <= 0.0)
      throw std::invalid_argument("mode_scan_points: scales must be > 0");
    for (const auto& v : directions) {
      TestPoint tp;
      tp.t = b0 + opt.offset_multiplier * h * v;
      tp.h = h;
      tp.v = v;
      tp.validate();
      family.push_back(std::move(tp));
    }
  }
  return family;
}

}  // namespace rcshape
