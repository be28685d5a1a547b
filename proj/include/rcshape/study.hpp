#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rcshape/limit_sim.hpp"
#include "rcshape/testing.hpp"

namespace rcshape {

// Ring family used by the trivariate mode studies: unit scale, test
// locations equal to the +/- coordinate directions.
std::vector<TestPoint> axis_mode_family(int d, const std::vector<double>& scales,
                                        double offset_multiplier = 1.0);

struct ModeStudySpec {
  std::string null_scenario;
  std::string alt_scenario;  // empty = skip the power column
  long n = 250;
  int cal_reps = 400;
  int eval_reps = 200;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int jobs = 0;
  bool known_direction = false;  // constant direction density plug-in
};

struct ModeStudyResult {
  double threshold = 0.0;
  double level = -1.0, level_se = 0.0;
  double power = -1.0, power_se = 0.0;
  long n = 0;
  int cal_reps = 0, eval_reps = 0;
};

// Calibrated mode test at the origin: calibrate the all-reject event
// under the null scenario, then evaluate false detections on fresh null
// data and detections under the alternative.
ModeStudyResult run_mode_study(const ModeStudySpec& spec,
                               const KernelTable& kt);

struct MultiscaleStudySpec {
  long n = 2000;
  int cal_reps = 400;
  int eval_reps = 100;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int jobs = 0;
};

struct MultiscaleStudyResult {
  // detection rates of the single-scale tests and the combined rule
  double rate_h25 = 0.0, rate_h1 = 0.0, rate_h05 = 0.0, rate_combined = 0.0;
  double se_h25 = 0.0, se_h1 = 0.0, se_h05 = 0.0, se_combined = 0.0;
  int eval_reps = 0;
};

// Two-close-modes setting: twelve simultaneous tests on scales
// {0.5, 1, 2.5}; single-scale verdicts and the {0.5, 1} combined rule,
// all calibrated on one shared set of null replications.
MultiscaleStudyResult run_multiscale_study(const MultiscaleStudySpec& spec,
                                           const KernelTable& kt);

struct FwerStudySpec {
  std::string null_scenario = "sec4.2-uniform-null";
  long n = 500;
  int reps = 200;
  double alpha = 0.05;
  int n_mc = 2000;
  std::uint64_t seed = 1;
  int jobs = 0;
};

struct FwerStudyResult {
  double rate = 0.0;  // replications with at least one |T| above kappa
  double se = 0.0;
  int reps = 0;
};

// Family-wise error of the uncalibrated two-sided tests under a uniform
// null, with per-replication theoretical quantiles.
FwerStudyResult run_fwer_study(const FwerStudySpec& spec,
                               const KernelTable& kt);

struct TableLine {
  std::string label;
  double estimate = 0.0;
  double se = 0.0;
  double reference = 0.0;  // reported value, percent
};

// Desk-scale reruns of the reported tables; names: level-power-uniform,
// level-power-cauchy, multiscale.
std::vector<TableLine> reproduce_table(const std::string& table, int reps,
                                       std::uint64_t seed, int jobs,
                                       const KernelTable& kt2,
                                       const KernelTable& kt3);

}  // namespace rcshape
