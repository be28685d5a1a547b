#include "rcshape/limit_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rcshape/parallel.hpp"
#include "rcshape/rng.hpp"

namespace rcshape {

NoiseField::NoiseField(int d, const NoiseGridSpec& grid, std::uint64_t seed)
    : d_(d), grid_(grid), seed_(seed) {
  if (d != 2 && d != 3)
    throw std::invalid_argument("noise field: d must be 2 or 3");
  if (grid_.s_step <= 0.0 || grid_.s_hi <= grid_.s_lo)
    throw std::invalid_argument("noise field: s-grid not planned");
  n_theta_ = d == 2 ? grid_.circle_cells
                    : static_cast<long>(grid_.z_cells) * grid_.phi_cells;
  n_s_ = static_cast<long>(
      std::ceil((grid_.s_hi - grid_.s_lo) / grid_.s_step - 1e-9));
  grid_.s_hi = grid_.s_lo + n_s_ * grid_.s_step;
}

Eigen::VectorXd NoiseField::theta_center(long it) const {
  if (d_ == 2) {
    double a = 2.0 * M_PI * (it + 0.5) / grid_.circle_cells;
    Eigen::VectorXd v(2);
    v << std::cos(a), std::sin(a);
    return v;
  }
  long iz = it / grid_.phi_cells;
  long ip = it % grid_.phi_cells;
  double z = -1.0 + 2.0 * (iz + 0.5) / grid_.z_cells;
  double a = 2.0 * M_PI * (ip + 0.5) / grid_.phi_cells;
  double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  Eigen::VectorXd v(3);
  v << r * std::cos(a), r * std::sin(a), z;
  return v;
}

double NoiseField::theta_measure(long) const {
  // equal-area partitions in both supported dimensions
  if (d_ == 2) return 2.0 * M_PI / grid_.circle_cells;
  return (2.0 / grid_.z_cells) * (2.0 * M_PI / grid_.phi_cells);
}

double NoiseField::cell_noise(long it, long is) const {
  double z;
  if (!stored_.empty()) {
    z = stored_[it * n_s_ + is];
    return z;  // aggregated fields store W directly
  }
  z = counter_normal(seed_, static_cast<std::uint64_t>(it * n_s_ + is));
  return z * std::sqrt(cell_measure(it, is));
}

NoiseField NoiseField::aggregated(const NoiseField& fine, int tf, int sf) {
  if (fine.d_ != 2)
    throw std::invalid_argument("aggregated noise fields support d = 2");
  NoiseGridSpec g = fine.grid_;
  g.circle_cells /= tf;
  g.s_step *= sf;
  NoiseField coarse(fine.d_, g, fine.seed_);
  coarse.stored_.assign(coarse.n_cells(), 0.0);
  for (long it = 0; it < coarse.n_theta_; ++it)
    for (long is = 0; is < coarse.n_s_; ++is) {
      double w = 0.0;
      for (int a = 0; a < tf; ++a)
        for (int b = 0; b < sf; ++b) {
          long fit = it * tf + a;
          long fis = is * sf + b;
          if (fis < fine.n_s_) w += fine.cell_noise(fit, fis);
        }
      coarse.stored_[it * coarse.n_s_ + is] = w;
    }
  return coarse;
}

NoiseGridSpec plan_noise_grid(int d, double data_s_lo, double data_s_hi,
                              double h_min, double h_max, double u_max,
                              const NoiseGridSpec& base) {
  NoiseGridSpec g = base;
  double pad = h_max * u_max;
  g.s_lo = data_s_lo - pad;
  g.s_hi = data_s_hi + pad;
  if (g.s_step <= 0.0) g.s_step = h_min / 4.0;
  (void)d;
  return g;
}

namespace {

// Sparse representation of one test point's integrand against the field.
struct CellIntegrand {
  std::vector<long> theta_idx;
  std::vector<long> s_idx;
  std::vector<double> coef;  // includes sqrt(cell measure)
};

CellIntegrand build_integrand(const NoiseField& noise,
                              const FittedDesign& design,
                              const KernelTable& kt, const TestPoint& tp,
                              const std::vector<DesignSlice>& slices) {
  CellIntegrand out;
  double um = kt.u_max();
  double hs = std::sqrt(tp.h);
  for (long it = 0; it < noise.n_theta(); ++it) {
    Eigen::VectorXd th = noise.theta_center(it);
    double cv = th.dot(tp.v);
    double center = th.dot(tp.t);
    if (center - tp.h * um < noise.s_lo() - 1e-9 ||
        center + tp.h * um > noise.s_hi() + 1e-9)
      throw std::invalid_argument(
          "noise grid under-covers the kernel support; enlarge the s-range");
    if (cv == 0.0) continue;
    const DesignSlice& sl = slices[it];
    double root_measure = std::sqrt(noise.cell_measure(it, 0));
    long lo = std::max<long>(
        0, static_cast<long>((center - tp.h * um - noise.s_lo()) /
                             noise.s_step()));
    long hi = std::min<long>(
        noise.n_s() - 1, static_cast<long>((center + tp.h * um -
                                            noise.s_lo()) /
                                           noise.s_step()));
    for (long is = lo; is <= hi; ++is) {
      double s = noise.s_center(is);
      double u = (s - center) / tp.h;
      double psi = kt.eval(u);
      if (psi == 0.0) continue;
      double val = cv * psi * std::sqrt(sl.fstheta(s)) / sl.ftheta / hs;
      out.theta_idx.push_back(it);
      out.s_idx.push_back(is);
      out.coef.push_back(val * root_measure);
    }
  }
  return out;
}

double eval_integrand(const CellIntegrand& ci, const NoiseField& noise) {
  double acc = 0.0;
  for (size_t k = 0; k < ci.coef.size(); ++k) {
    // measure root is already in coef; rescale stored aggregate draws
    double w = noise.cell_noise(ci.theta_idx[k], ci.s_idx[k]);
    acc += ci.coef[k] * w /
           std::sqrt(noise.cell_measure(ci.theta_idx[k], ci.s_idx[k]));
  }
  return acc;
}

ScaleCalibration clamped_calibration(double h, int d) {
  return scale_calibration(std::min(h, 1.0), d);
}

}  // namespace

double draw_limit_process(const NoiseField& noise, const FittedDesign& design,
                          const KernelTable& kt, const TestPoint& tp) {
  tp.validate();
  std::vector<DesignSlice> slices;
  slices.reserve(noise.n_theta());
  for (long it = 0; it < noise.n_theta(); ++it)
    slices.push_back(design.slice(noise.theta_center(it)));
  CellIntegrand ci = build_integrand(noise, design, kt, tp, slices);
  return eval_integrand(ci, noise);
}

double multiscale_sup_statistic(const std::vector<TestPoint>& family,
                                const std::vector<double>& sigma,
                                const FittedDesign& design,
                                const KernelTable& kt,
                                const NoiseField& noise) {
  std::vector<DesignSlice> slices;
  slices.reserve(noise.n_theta());
  for (long it = 0; it < noise.n_theta(); ++it)
    slices.push_back(design.slice(noise.theta_center(it)));
  double sup = -std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < family.size(); ++j) {
    CellIntegrand ci = build_integrand(noise, design, kt, family[j], slices);
    double x = eval_integrand(ci, noise);
    ScaleCalibration cal = clamped_calibration(family[j].h, kt.dimension());
    sup = std::max(sup, cal.beta * (std::abs(x) / sigma[j] - cal.alpha));
  }
  return sup;
}

QuantileResult multiscale_quantile(const std::vector<TestPoint>& family,
                                   const FittedDesign& design,
                                   const KernelTable& kt, long n_stat,
                                   const QuantileSpec& spec) {
  if (family.empty())
    throw std::invalid_argument("multiscale_quantile: empty family");
  if (spec.alpha <= 0.0 || spec.alpha >= 1.0)
    throw std::invalid_argument("multiscale_quantile: alpha in (0,1)");
  if (spec.n_mc < 100)
    throw std::invalid_argument("multiscale_quantile: n_mc must be >= 100");

  double h_min = family.front().h, h_max = h_min;
  double proj_abs = 0.0;
  for (const auto& tp : family) {
    tp.validate();
    h_min = std::min(h_min, tp.h);
    h_max = std::max(h_max, tp.h);
    proj_abs = std::max(proj_abs, tp.t.norm());
  }
  NoiseGridSpec grid = spec.grid;
  if (grid.s_step <= 0.0 || grid.s_hi <= grid.s_lo)
    grid = plan_noise_grid(kt.dimension(), -proj_abs, proj_abs, h_min, h_max,
                           kt.u_max(), grid);

  std::vector<double> sigma =
      local_stddev_family(design, kt, family, spec.sigma_quad);

  // geometry shared by all replications; only the draws differ
  NoiseField proto(kt.dimension(), grid, spec.seed);
  std::vector<DesignSlice> slices;
  slices.reserve(proto.n_theta());
  for (long it = 0; it < proto.n_theta(); ++it)
    slices.push_back(design.slice(proto.theta_center(it)));
  std::vector<CellIntegrand> integrands;
  integrands.reserve(family.size());
  std::vector<ScaleCalibration> cals;
  for (const auto& tp : family) {
    integrands.push_back(build_integrand(proto, design, kt, tp, slices));
    cals.push_back(clamped_calibration(tp.h, kt.dimension()));
  }

  std::vector<double> sup(spec.n_mc);
  parallel_for(spec.n_mc, spec.jobs, [&](long r) {
    std::uint64_t key = stream_seed(spec.seed, r);
    double worst = -std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < family.size(); ++j) {
      const CellIntegrand& ci = integrands[j];
      double x = 0.0;
      for (size_t k = 0; k < ci.coef.size(); ++k) {
        std::uint64_t cell = static_cast<std::uint64_t>(
            ci.theta_idx[k] * proto.n_s() + ci.s_idx[k]);
        x += ci.coef[k] * counter_normal(key, cell);
      }
      worst = std::max(worst,
                       cals[j].beta * (std::abs(x) / sigma[j] - cals[j].alpha));
    }
    sup[r] = worst;
  });

  std::vector<double> sorted = sup;
  std::sort(sorted.begin(), sorted.end());
  long rank = static_cast<long>(
      std::ceil((1.0 - spec.alpha) * spec.n_mc));
  rank = std::clamp(rank, 1L, static_cast<long>(spec.n_mc));
  QuantileResult out;
  out.kappa = sorted[rank - 1];
  out.alpha = spec.alpha;
  out.n_mc = spec.n_mc;
  out.n = n_stat;
  out.mode = "theoretical";
  out.sigma = sigma;
  out.per_test.resize(family.size());
  for (size_t j = 0; j < family.size(); ++j)
    out.per_test[j] = sigma[j] / std::sqrt(static_cast<double>(n_stat)) *
                      (out.kappa / cals[j].beta + cals[j].alpha);
  return out;
}

std::vector<std::vector<double>> simulate_standardized(
    const std::vector<TestPoint>& family, const KernelTable& kt,
    const PipelineSimSpec& spec) {
  if (spec.n_reps < 1)
    throw std::invalid_argument("simulate_standardized: n_reps must be >= 1");
  double sgn_c = inversion_constant(kt.dimension()) >= 0.0 ? 1.0 : -1.0;
  std::vector<std::vector<double>> stats(spec.n_reps);
  parallel_for(spec.n_reps, spec.jobs, [&](long r) {
    DgpSpec dgp = spec.dgp;
    dgp.seed = stream_seed(spec.dgp.seed, r);
    RawDataset raw = sample_dgp(dgp);
    ProjectedSample ps = normalize(raw, stream_seed(dgp.seed, 7));
    FittedDesign design =
        spec.known_ftheta
            ? FittedDesign::fit_known_direction(ps, spec.known_ftheta,
                                                spec.design_cfg)
            : FittedDesign::fit(ps, spec.design_cfg);
    std::vector<double> t = local_statistic_family(ps, design, kt, family);
    std::vector<double> sig =
        local_stddev_family(design, kt, family, spec.sigma_quad);
    std::vector<double> row(family.size());
    double root_n = std::sqrt(static_cast<double>(ps.n_stat));
    for (size_t j = 0; j < family.size(); ++j)
      row[j] = sgn_c * root_n * t[j] / sig[j];
    stats[r] = std::move(row);
  });
  return stats;
}

double threshold_from_null(std::vector<double> stats, double alpha) {
  if (stats.empty())
    throw std::invalid_argument("threshold_from_null: no statistics");
  std::sort(stats.begin(), stats.end(), std::greater<>());
  long k = static_cast<long>(std::ceil(alpha * stats.size()));
  k = std::clamp(k, 1L, static_cast<long>(stats.size()));
  return stats[k - 1];
}

CalibrationResult calibrate_threshold(const std::vector<TestPoint>& family,
                                      const KernelTable& kt,
                                      const CalibrationSpec& spec) {
  if (spec.n_reps < 200)
    throw std::invalid_argument("calibrate_threshold: n_reps must be >= 200");
  if (spec.alpha <= 0.0 || spec.alpha > 1.0)
    throw std::invalid_argument("calibrate_threshold: alpha in (0,1]");

  PipelineSimSpec sim;
  sim.dgp = spec.null_dgp;
  sim.design_cfg = spec.design_cfg;
  sim.n_reps = spec.n_reps;
  sim.sigma_quad = spec.sigma_quad;
  sim.jobs = spec.jobs;
  sim.known_ftheta = spec.known_ftheta;
  auto rows = simulate_standardized(family, kt, sim);

  std::vector<double> stats(rows.size());
  for (size_t r = 0; r < rows.size(); ++r)
    stats[r] = spec.detection_stat
                   ? spec.detection_stat(rows[r])
                   : *std::min_element(rows[r].begin(), rows[r].end());

  CalibrationResult out;
  out.threshold = threshold_from_null(stats, spec.alpha);
  out.alpha = spec.alpha;
  out.n_reps = spec.n_reps;
  out.unstable = spec.alpha * spec.n_reps < 10.0;
  out.null_stats = std::move(stats);
  return out;
}

}  // namespace rcshape
