// Command-line front end: data simulation, shape tests, calibration and
// desk-scale table reruns. Every run emits a result artifact plus a
// manifest with the configuration hash and seed.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "rcshape/errors.hpp"
#include "rcshape/io.hpp"
#include "rcshape/parallel.hpp"
#include "rcshape/rng.hpp"
#include "rcshape/study.hpp"

using namespace rcshape;

namespace {

struct GlobalOpts {
  int jobs = 0;
  std::string cache_path;
  bool strict_design = false;
};

Eigen::VectorXd parse_vector(const std::vector<double>& v) {
  Eigen::VectorXd out(v.size());
  for (size_t k = 0; k < v.size(); ++k) out(k) = v[k];
  return out;
}

std::vector<Eigen::VectorXd> axis_directions(int d) {
  std::vector<Eigen::VectorXd> dirs;
  for (int k = 0; k < d; ++k)
    for (double s : {1.0, -1.0}) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
      e(k) = s;
      dirs.push_back(e);
    }
  return dirs;
}

struct DataOpts {
  std::string path;
  bool intercept = false;
  std::uint64_t seed = 1;
  double h_star = 0.0, h_plus = 0.0;
  bool known_constant_direction = false;
  double kernel_u_max = 0.0;
  int kernel_points = 0;
};

void add_data_opts(CLI::App* cmd, DataOpts& opt) {
  cmd->add_option("--data", opt.path, "input dataset CSV")->required();
  cmd->add_flag("--intercept", opt.intercept,
                "first regressor is a constant one");
  cmd->add_option("--seed", opt.seed, "master seed");
  cmd->add_option("--h-star", opt.h_star,
                  "direction-density bandwidth (0 = default order)");
  cmd->add_option("--h-plus", opt.h_plus,
                  "joint-density bandwidth (0 = default order)");
  cmd->add_flag("--known-constant-direction", opt.known_constant_direction,
                "plug in the constant direction density instead of the "
                "estimate");
  cmd->add_option("--kernel-u-max", opt.kernel_u_max,
                  "transformed-kernel table range (0 = default)");
  cmd->add_option("--kernel-points", opt.kernel_points,
                  "transformed-kernel table size (0 = default)");
}

struct LoadedData {
  RawDataset raw;
  ProjectedSample ps;
  FittedDesign fd;
  KernelTable kt;
  std::string data_hash;
};

LoadedData load_bundle(const DataOpts& opt, const GlobalOpts& glob) {
  LoadedData out;
  out.raw = load_dataset_csv(opt.path, opt.intercept);
  out.data_hash = file_content_hash(opt.path);
  out.ps = normalize(out.raw, stream_seed(opt.seed, 7));
  DesignConfig cfg;
  cfg.h_star = opt.h_star;
  cfg.h_plus = opt.h_plus;
  if (opt.known_constant_direction) {
    double c = 1.0 / sphere_volume(out.raw.dim() - 1);
    out.fd = FittedDesign::fit_known_direction(
        out.ps, [c](const Eigen::VectorXd&) { return c; }, cfg);
  } else {
    out.fd = FittedDesign::fit(out.ps, cfg);
  }
  KernelGridSpec kg;
  kg.u_max = opt.kernel_u_max;
  kg.n_points = opt.kernel_points;
  out.kt = build_kernel_table(TestFunction::default_poly(), out.raw.dim(), kg);

  DesignDiagnostics diag = out.fd.diagnostics(out.raw.dim() == 2 ? 256 : 400);
  if (diag.frac_below_floor > 0.0)
    std::cerr << "note: direction-density estimate below its cut-off floor "
                 "on "
              << 100.0 * diag.frac_below_floor
              << "% of directions (min value " << diag.min_fhat << ")\n";
  if (glob.strict_design && diag.frac_below_floor > 0.5)
    throw NumericalDiagnosticError(
        "design positivity diagnostic failed: the estimated direction "
        "density sits at its floor on most of the sphere");
  return out;
}

std::string command_string(int argc, char** argv) {
  std::ostringstream ss;
  for (int i = 0; i < argc; ++i) ss << (i ? " " : "") << argv[i];
  return ss.str();
}

// Configuration identity: the command without execution-only knobs, so a
// rerun at a different parallelism degree hashes identically.
std::string canonical_command(int argc, char** argv) {
  std::ostringstream ss;
  for (int i = 0; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--jobs" || a == "--cache") {
      ++i;  // skip the value as well
      continue;
    }
    ss << (ss.tellp() > 0 ? " " : "") << a;
  }
  return ss.str();
}

struct Timer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
        .count();
  }
};

QuantileChoice make_quantile_choice(bool calibrated,
                                    const std::string& kappa_file,
                                    double threshold, double alpha, int n_mc,
                                    std::uint64_t seed, int jobs) {
  QuantileChoice q;
  if (calibrated) {
    q.kind = QuantileChoice::Kind::calibrated;
    if (!kappa_file.empty()) {
      nlohmann::json j = read_json_file(kappa_file);
      if (!j.contains("threshold"))
        throw std::invalid_argument("--kappa file carries no 'threshold'");
      q.threshold = j["threshold"].get<double>();
    } else {
      q.threshold = threshold;
    }
  } else {
    q.kind = QuantileChoice::Kind::theoretical;
    q.mc.alpha = alpha;
    q.mc.n_mc = n_mc;
    q.mc.seed = stream_seed(seed, 99);
    q.mc.jobs = jobs;
  }
  return q;
}

void emit_outcome(const TestOutcome& outcome, const std::string& out_path,
                  std::uint64_t seed, const std::string& cfg_id,
                  const std::string& cmd, const Timer& timer) {
  std::string config_hash = hash_hex(cfg_id);
  nlohmann::json j = outcome_to_json(outcome, seed, config_hash);
  write_json_file(out_path, j);
  write_manifest(out_path, config_hash, seed, timer.seconds(), cmd);
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{
      "shape tests for random-coefficient densities observed through "
      "projections"};
  app.require_subcommand(1);
  app.set_config("--config", "", "configuration file (INI/TOML)");
  GlobalOpts glob;
  app.add_option("--jobs", glob.jobs,
                 "worker threads (0 = RCSHAPE_JOBS or 1)");
  app.add_option("--cache", glob.cache_path,
                 "quantile cache file shared across runs");
  app.add_flag("--strict-design", glob.strict_design,
               "fail hard when the design positivity diagnostic trips");

  Timer timer;
  std::string cmd = command_string(argc, argv);
  std::string cfg_id = canonical_command(argc, argv);

  // ---- simulate ----------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "draw a synthetic dataset");
  struct {
    std::string scenario, out;
    long n = 0;
    std::uint64_t seed = 1;
    bool retain_beta = false;
  } sim_opt;
  sim->add_option("--scenario", sim_opt.scenario, "built-in scenario name")
      ->required();
  sim->add_option("--n", sim_opt.n, "statistic-half size (file gets 2n rows)");
  sim->add_option("--seed", sim_opt.seed, "seed");
  sim->add_option("--out", sim_opt.out, "output CSV")->required();
  sim->add_flag("--retain-beta", sim_opt.retain_beta,
                "append the drawn coefficients as extra columns");
  sim->callback([&]() {
    DgpSpec spec = find_scenario(sim_opt.scenario);
    if (sim_opt.n > 0) spec.n = sim_opt.n;
    spec.seed = sim_opt.seed;
    spec.retain_beta = sim_opt.retain_beta;
    save_dataset_csv(sim_opt.out, sample_dgp(spec));
    write_manifest(sim_opt.out, hash_hex(cfg_id), sim_opt.seed, timer.seconds(),
                   cmd);
  });

  // ---- scenarios ----------------------------------------------------
  auto* scen = app.add_subcommand("scenarios", "list built-in scenarios");
  scen->callback([&]() {
    for (const auto& s : builtin_scenarios())
      std::printf("%-24s d=%d %-12s n=%ld  %s\n", s.name.c_str(), s.d,
                  s.model == ModelKind::with_intercept ? "intercept"
                                                       : "no-intercept",
                  s.n, s.note.c_str());
  });

  // ---- kernel-dump ---------------------------------------------------
  auto* kdump = app.add_subcommand("kernel-dump",
                                   "write the transformed kernel table");
  struct {
    int d = 2;
    std::string out;
    double u_max = 0.0;
    int n_points = 0;
  } kd_opt;
  kdump->add_option("--d", kd_opt.d, "dimension")->required();
  kdump->add_option("--out", kd_opt.out, "output CSV")->required();
  kdump->add_option("--u-max", kd_opt.u_max, "table range (0 = default)");
  kdump->add_option("--n-points", kd_opt.n_points, "table size (0 = default)");
  kdump->callback([&]() {
    KernelGridSpec kg;
    kg.u_max = kd_opt.u_max;
    kg.n_points = kd_opt.n_points;
    save_kernel_csv(kd_opt.out, build_kernel_table(TestFunction::default_poly(),
                                                   kd_opt.d, kg));
  });

  // ---- test-mode ------------------------------------------------------
  auto* tmode = app.add_subcommand("test-mode",
                                   "mode test at a fixed location");
  DataOpts tm_data;
  add_data_opts(tmode, tm_data);
  struct {
    std::vector<double> b0;
    std::vector<double> scales{1.0};
    double alpha = 0.05;
    double offset = 2.0;
    bool calibrated = false;
    std::string kappa_file;
    double threshold = 0.0;
    int n_mc = 5000;
    std::string combine = "per-direction";
    std::string out = "result.json";
  } tm_opt;
  tmode->add_option("--b0", tm_opt.b0, "candidate mode location")->required();
  tmode->add_option("--scales", tm_opt.scales, "test scales");
  tmode->add_option("--alpha", tm_opt.alpha, "level");
  tmode->add_option("--offset", tm_opt.offset,
                    "ring radius in units of the scale");
  tmode->add_flag("--calibrated", tm_opt.calibrated,
                  "use a calibrated threshold instead of simulated "
                  "quantiles");
  tmode->add_option("--kappa", tm_opt.kappa_file,
                    "calibrated threshold file from 'calibrate'");
  tmode->add_option("--threshold", tm_opt.threshold,
                    "calibrated threshold value (alternative to --kappa)");
  tmode->add_option("--n-mc", tm_opt.n_mc, "quantile simulation size");
  tmode->add_option("--combine", tm_opt.combine,
                    "multiscale verdict: per-direction | any-scale | "
                    "all-scales");
  tmode->add_option("--out", tm_opt.out, "result JSON");
  tmode->callback([&]() {
    LoadedData data = load_bundle(tm_data, glob);
    if (static_cast<int>(tm_opt.b0.size()) != data.raw.dim())
      throw std::invalid_argument("--b0 dimension does not match the data");
    QuantileChoice q = make_quantile_choice(
        tm_opt.calibrated, tm_opt.kappa_file, tm_opt.threshold, tm_opt.alpha,
        tm_opt.n_mc, tm_data.seed, glob.jobs);
    ModeTestOptions opt;
    opt.offset_multiplier = tm_opt.offset;
    if (tm_opt.combine == "per-direction")
      opt.combine = CombineRule::per_direction_any_scale;
    else if (tm_opt.combine == "any-scale")
      opt.combine = CombineRule::any_scale_full;
    else if (tm_opt.combine == "all-scales")
      opt.combine = CombineRule::all_scales_full;
    else
      throw std::invalid_argument("--combine: unknown rule " + tm_opt.combine);

    ModeScanOptions ring;
    ring.offset_multiplier = tm_opt.offset;
    auto family = mode_scan_points(parse_vector(tm_opt.b0), tm_opt.scales,
                                   axis_directions(data.raw.dim()), ring);
    // share simulated quantiles across invocations through the cache
    std::string cache_key;
    if (!glob.cache_path.empty() &&
        q.kind == QuantileChoice::Kind::theoretical) {
      std::ostringstream key;
      key << family_hash(family) << "|" << data.data_hash << "|"
          << format_double(tm_opt.alpha) << "|" << tm_opt.n_mc << "|"
          << q.mc.seed;
      cache_key = key.str();
      QuantileCache cache(glob.cache_path);
      auto hit = cache.lookup(cache_key);
      if (hit && hit->contains("per_test"))
        q.per_test_override = hit->at("per_test").get<std::vector<double>>();
    }
    TestOutcome outcome = mode_test(
        data.ps, data.fd, data.kt, parse_vector(tm_opt.b0), tm_opt.scales,
        axis_directions(data.raw.dim()), tm_opt.alpha, q, opt);
    if (!cache_key.empty() && q.per_test_override.empty()) {
      QuantileCache cache(glob.cache_path);
      nlohmann::json entry;
      std::vector<double> per_test;
      for (const auto& e : outcome.entries) per_test.push_back(e.kappa);
      entry["per_test"] = per_test;
      entry["n_mc"] = tm_opt.n_mc;
      cache.store(cache_key, entry);
    }
    emit_outcome(outcome, tm_opt.out, tm_data.seed, cfg_id, cmd, timer);
    std::cout << outcome.verdict << "\n";
  });

  // ---- scan-modes ------------------------------------------------------
  auto* scan = app.add_subcommand("scan-modes",
                                  "scan a hyperrectangle for modes");
  DataOpts sc_data;
  add_data_opts(scan, sc_data);
  struct {
    std::vector<double> region;
    std::vector<double> scales{0.5};
    double alpha = 0.05;
    int n_mc = 2000;
    int directions = 0;
    std::string out = "result.json";
  } sc_opt;
  scan->add_option("--region", sc_opt.region,
                   "hyperrectangle as lo hi applied to every axis")
      ->expected(2)
      ->required();
  scan->add_option("--scales", sc_opt.scales, "test scales");
  scan->add_option("--alpha", sc_opt.alpha, "level");
  scan->add_option("--n-mc", sc_opt.n_mc, "quantile simulation size");
  scan->add_option("--directions", sc_opt.directions,
                   "ring directions per vertex (0 = default)");
  scan->add_option("--out", sc_opt.out, "result JSON");
  scan->callback([&]() {
    LoadedData data = load_bundle(sc_data, glob);
    int d = data.raw.dim();
    QuantileChoice q = make_quantile_choice(false, "", 0.0, sc_opt.alpha,
                                            sc_opt.n_mc, sc_data.seed,
                                            glob.jobs);
    GlobalScanOptions opt;
    if (sc_opt.directions > 0) opt.direction_resolution = sc_opt.directions;
    TestOutcome outcome = global_mode_scan(
        data.ps, data.fd, data.kt,
        Eigen::VectorXd::Constant(d, sc_opt.region[0]),
        Eigen::VectorXd::Constant(d, sc_opt.region[1]), sc_opt.scales,
        sc_opt.alpha, q, opt);
    emit_outcome(outcome, sc_opt.out, sc_data.seed, cfg_id, cmd, timer);
    std::cout << outcome.verdict << "\n";
  });

  // ---- mono-map ---------------------------------------------------------
  auto* mono = app.add_subcommand(
      "mono-map", "bivariate map of certified directional decreases");
  DataOpts mm_data;
  add_data_opts(mono, mm_data);
  struct {
    double h0 = 0.5;
    std::vector<double> region;
    double grid_step = 0.0;
    double alpha = 0.05;
    int n_mc = 2000;
    std::string out = "arrows.csv";
    std::string json_out;
  } mm_opt;
  mono->add_option("--h0", mm_opt.h0, "fixed scale");
  mono->add_option("--region", mm_opt.region,
                   "square region as lo hi applied to both axes")
      ->expected(2)
      ->required();
  mono->add_option("--grid-step", mm_opt.grid_step,
                   "location grid width (0 = twice the scale)");
  mono->add_option("--alpha", mm_opt.alpha, "level");
  mono->add_option("--n-mc", mm_opt.n_mc, "quantile simulation size");
  mono->add_option("--out", mm_opt.out, "arrow CSV (t_x,t_y,v_x,v_y)");
  mono->add_option("--json", mm_opt.json_out, "optional full result JSON");
  mono->callback([&]() {
    LoadedData data = load_bundle(mm_data, glob);
    if (data.raw.dim() != 2)
      throw std::invalid_argument("mono-map requires two regressors");
    QuantileChoice q = make_quantile_choice(false, "", 0.0, mm_opt.alpha,
                                            mm_opt.n_mc, mm_data.seed,
                                            glob.jobs);
    MonotonicityMapOptions opt;
    opt.grid_step = mm_opt.grid_step;
    TestOutcome outcome = monotonicity_map(
        data.ps, data.fd, data.kt, mm_opt.h0,
        Eigen::Vector2d(mm_opt.region[0], mm_opt.region[0]),
        Eigen::Vector2d(mm_opt.region[1], mm_opt.region[1]), mm_opt.alpha, q,
        opt);
    save_arrows_csv(mm_opt.out, outcome_arrows(outcome));
    write_manifest(mm_opt.out, hash_hex(cfg_id), mm_data.seed, timer.seconds(),
                   cmd);
    if (!mm_opt.json_out.empty())
      write_json_file(mm_opt.json_out,
                      outcome_to_json(outcome, mm_data.seed, hash_hex(cfg_id)));
    std::cout << outcome.verdict << "\n";
  });

  // ---- calibrate --------------------------------------------------------
  auto* cal = app.add_subcommand(
      "calibrate", "simulate a null scenario and calibrate the threshold");
  struct {
    std::string scenario;
    long n = 0;
    std::vector<double> b0;
    std::vector<double> scales{1.0};
    double offset = 1.0;
    double alpha = 0.05;
    int reps = 1000;
    std::uint64_t seed = 1;
    std::string combine = "per-direction";
    std::string out = "kappa.json";
  } cal_opt;
  cal->add_option("--scenario-null", cal_opt.scenario,
                  "null scenario with uniform coefficients")
      ->required();
  cal->add_option("--n", cal_opt.n, "statistic-half size");
  cal->add_option("--b0", cal_opt.b0, "mode location (default origin)");
  cal->add_option("--family", cal_opt.scales, "scales of the ring family");
  cal->add_option("--offset", cal_opt.offset, "ring radius in scale units");
  cal->add_option("--alpha", cal_opt.alpha, "nominal level");
  cal->add_option("--reps", cal_opt.reps, "null replications");
  cal->add_option("--seed", cal_opt.seed, "seed");
  cal->add_option("--combine", cal_opt.combine,
                  "per-direction | any-scale | all-scales");
  cal->add_option("--out", cal_opt.out, "threshold JSON");
  cal->callback([&]() {
    DgpSpec null_dgp = find_scenario(cal_opt.scenario);
    if (cal_opt.n > 0) null_dgp.n = cal_opt.n;
    null_dgp.seed = cal_opt.seed;
    int d = null_dgp.d;
    Eigen::VectorXd b0 = cal_opt.b0.empty() ? Eigen::VectorXd::Zero(d)
                                            : parse_vector(cal_opt.b0);
    ModeScanOptions mso;
    mso.offset_multiplier = cal_opt.offset;
    auto family =
        mode_scan_points(b0, cal_opt.scales, axis_directions(d), mso);
    KernelTable kt = build_kernel_table(TestFunction::default_poly(), d, {});

    CalibrationSpec spec;
    spec.null_dgp = null_dgp;
    spec.alpha = cal_opt.alpha;
    spec.n_reps = cal_opt.reps;
    spec.jobs = glob.jobs;
    size_t n_dirs = axis_directions(d).size();
    if (cal_opt.combine == "per-direction")
      spec.detection_stat = detection_functional(
          CombineRule::per_direction_any_scale, cal_opt.scales.size(), n_dirs);
    else if (cal_opt.combine == "any-scale")
      spec.detection_stat = detection_functional(CombineRule::any_scale_full,
                                                 cal_opt.scales.size(), n_dirs);
    else if (cal_opt.combine == "all-scales")
      spec.detection_stat = detection_functional(CombineRule::all_scales_full,
                                                 cal_opt.scales.size(), n_dirs);
    else
      throw std::invalid_argument("--combine: unknown rule " +
                                  cal_opt.combine);
    CalibrationResult res = calibrate_threshold(family, kt, spec);
    if (res.unstable)
      std::cerr << "warning: alpha * reps < 10, the calibrated threshold is "
                   "unstable\n";
    nlohmann::json j;
    j["threshold"] = res.threshold;
    j["alpha"] = res.alpha;
    j["n_reps"] = res.n_reps;
    j["unstable"] = res.unstable;
    j["scenario"] = cal_opt.scenario;
    j["n"] = null_dgp.n;
    j["family_hash"] = family_hash(family);
    j["combine"] = cal_opt.combine;
    j["seed"] = cal_opt.seed;
    write_json_file(cal_opt.out, j);
    write_manifest(cal_opt.out, hash_hex(cfg_id), cal_opt.seed, timer.seconds(),
                   cmd);
    std::cout << "threshold " << res.threshold << "\n";
  });

  // ---- reproduce-table ----------------------------------------------------
  auto* rep = app.add_subcommand("reproduce-table",
                                 "desk-scale rerun of a reported table");
  struct {
    std::string table;
    int reps = 200;
    std::uint64_t seed = 1;
    std::string out;
  } rep_opt;
  rep->add_option("--table", rep_opt.table,
                  "level-power-uniform | level-power-cauchy | multiscale")
      ->required();
  rep->add_option("--reps", rep_opt.reps, "evaluation replications");
  rep->add_option("--seed", rep_opt.seed, "seed");
  rep->add_option("--out", rep_opt.out, "optional JSON output");
  rep->callback([&]() {
    KernelTable kt2, kt3;
    if (rep_opt.table == "multiscale")
      kt2 = build_kernel_table(TestFunction::default_poly(), 2, {});
    else
      kt3 = build_kernel_table(TestFunction::default_poly(), 3, {});
    auto lines = reproduce_table(rep_opt.table, rep_opt.reps, rep_opt.seed,
                                 glob.jobs, kt2, kt3);
    nlohmann::json rows = nlohmann::json::array();
    std::printf("%-28s %10s %8s %10s\n", "quantity", "estimate", "se",
                "reported");
    for (const auto& ln : lines) {
      std::printf("%-28s %9.1f%% %7.1f%% %9.1f%%\n", ln.label.c_str(),
                  ln.estimate, ln.se, ln.reference);
      nlohmann::json row;
      row["label"] = ln.label;
      row["estimate_pct"] = ln.estimate;
      row["se_pct"] = ln.se;
      row["reported_pct"] = ln.reference;
      rows.push_back(row);
    }
    if (!rep_opt.out.empty()) {
      write_json_file(rep_opt.out, rows);
      write_manifest(rep_opt.out, hash_hex(cfg_id), rep_opt.seed,
                     timer.seconds(), cmd);
    }
  });

  // ---- ols-baseline ---------------------------------------------------
  auto* ols = app.add_subcommand("ols-baseline",
                                 "heteroscedasticity-robust least squares "
                                 "on the normalized data");
  struct {
    std::string data;
    bool intercept = false;
    std::string out = "ols.json";
  } ols_opt;
  ols->add_option("--data", ols_opt.data, "input dataset CSV")->required();
  ols->add_flag("--intercept", ols_opt.intercept,
                "first regressor is a constant one");
  ols->add_option("--out", ols_opt.out, "result JSON");
  ols->callback([&]() {
    RawDataset raw = load_dataset_csv(ols_opt.data, ols_opt.intercept);
    OlsResult res = ols_baseline(raw);
    write_json_file(ols_opt.out, ols_to_json(res));
    write_manifest(ols_opt.out, hash_hex(cfg_id), 0, timer.seconds(), cmd);
    for (long k = 0; k < res.gamma.size(); ++k)
      std::printf("gamma_%ld = %8.4f (se %.4f)\n", k + 1, res.gamma(k),
                  res.se(k));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return 0;
}

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const NumericalDiagnosticError& e) {
    std::cerr << "numerical diagnostic failure: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 3;
  }
}
