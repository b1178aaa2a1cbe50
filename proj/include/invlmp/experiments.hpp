#ifndef INVLMP_EXPERIMENTS_HPP_
#define INVLMP_EXPERIMENTS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "invlmp/grid.hpp"
#include "invlmp/inverse.hpp"
#include "invlmp/market.hpp"
#include "invlmp/scenario.hpp"

namespace invlmp {

/// First stored iterate after which |c - [lo, hi]| <= tol * |reference| for
/// the rest of the trajectory; -1 when the trajectory never settles.
long iterations_to_settle(const GdResult& result, int block, double lo, double hi, double reference, double tol);

/// Minimiser of the mean |s - c|^p: the mean for p = 2, the midpoint of the
/// median interval for p = 1, a golden-section search otherwise.
double p_location(std::vector<double> samples, double p);

// ---------------------------------------------------------------------------
// Convergence on the deterministic 14-bus data (l1 versus l2 trajectories).

struct ConvergenceConfig {
  DatasetConfig dataset;
  long iterations = 20000;
  double eta = 0.05;
  /// Initial value of block j of every generator.
  std::vector<double> init_per_block{10.0, 20.0, 30.0, 40.0, 50.0};
  double tolerance = 0.01;
  long trajectory_stride = 1;
};

struct BlockConvergence {
  int gen = 0;
  int block = 0;
  long samples = 0;
  /// Mean of the sealed sampled prices over the block's valid observations
  /// (the l2 target) and their median interval (the l1 target).
  double truth_mean = 0.0;
  double truth_median_lo = 0.0;
  double truth_median_hi = 0.0;
  double final_l1 = 0.0;
  double final_l2 = 0.0;
  long settle_l1 = -1;
  long settle_l2 = -1;

  bool l2_faster() const { return settle_l2 >= 0 && (settle_l1 < 0 || settle_l2 < settle_l1); }
  bool both_settled() const { return settle_l1 >= 0 && settle_l2 >= 0; }
};

struct ConvergenceResult {
  Dataset dataset;
  TrainingSet training;
  GdResult l1, l2;
  std::vector<BlockConvergence> blocks;
  RecoveryAccounting accounting;
};

ConvergenceResult run_convergence(const Grid& grid, const Offers& baseline, const ConvergenceConfig& config);

// ---------------------------------------------------------------------------
// Robustness to random LMP errors on one target block.

struct NoiseSetting {
  std::string name;
  double frequency = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
};

/// 1%/5% frequency x N(50, 5^2)/N(100, 10^2), in table order.
std::vector<NoiseSetting> default_noise_settings();

struct RobustnessConfig {
  DatasetConfig dataset;
  int target_gen = 2;
  int target_block = 2;
  std::vector<NoiseSetting> settings = default_noise_settings();
  NoiseSpec::Granularity granularity = NoiseSpec::Granularity::kEntry;
  long iterations = 5000;
  double eta = 0.05;
  double init = 30.0;
};

struct RobustnessRow {
  std::uint64_t seed = 0;
  std::string setting;
  long samples = 0;
  long corrupted_samples = 0;
  double truth = 0.0;
  double c_hat_l1 = 0.0;
  double err_l1 = 0.0;
  double c_hat_l2 = 0.0;
  double err_l2 = 0.0;
};

struct RobustnessRun {
  std::uint64_t seed = 0;
  std::vector<RobustnessRow> rows;
  /// l1 within `l1_tolerance` everywhere, l2 error strictly increasing over
  /// the settings, and the last l2 error at least `ratio` times the l1 error.
  bool pattern_holds(double l1_tolerance = 0.01, double ratio = 5.0) const;
};

/// One dataset per call; the truth is the target block's baseline price.
RobustnessRun run_robustness(const Grid& grid, const Offers& baseline, const RobustnessConfig& config);

// ---------------------------------------------------------------------------
// Model mismatch: reserve + ramping SCUC data recovered with the plain model.

struct MismatchConfig {
  SyntheticGridOptions grid{100, 12, 0.45, 0.3, 3};
  std::uint64_t seed = 1;
  int windows = 24;
  int hours_per_window = 4;
  int n_blocks = 5;
  /// Linear and quadratic cost coefficient ranges for the random units.
  double c1_lo = 10.0, c1_hi = 40.0;
  double c2_lo = 0.02, c2_hi = 0.12;
  double offer_sigma = 2.0;
  /// Load level per window as a fraction of capacity, with a daily sine
  /// of this relative amplitude, hourly multiplicative jitter and per-bus
  /// jitter (both half-widths).
  double level_lo = 0.35, level_hi = 0.7;
  double daily_amplitude = 0.3;
  double hourly_jitter = 0.2;
  double bus_jitter = 0.1;
  /// Reserve requirements as fractions of the window's first-hour load.
  double reserve_up = 0.05;
  double reserve_down = 0.03;
  /// Ramp rate per hour as a fraction of x_max.
  double ramp_fraction = 0.6;
  NoiseSpec lmp_noise{NoiseSpec::Mode::kLmpError, 50.0, 5.0, 0.01, 0};
  double p = 1.0;
  long iterations = 5000;
  double eta = 0.05;
  double init = 30.0;
  ScucOptions scuc;
  /// Histogram of relative errors in percent.
  double histogram_lo = -20.0, histogram_hi = 20.0;
  int histogram_bins = 40;

  void validate() const;
};

struct MismatchSetting {
  std::string name;
  std::vector<MarketObservation> observations;
  TrainingSet training;
  GdResult gd;
  RecoveryAccounting accounting;
  /// Signed relative error (c_hat - truth) / truth per recovered block.
  std::vector<int> blocks;
  std::vector<double> rel_errors;
  double mean_abs_rel_error = 0.0;
  std::vector<long> histogram;
};

struct MismatchResult {
  Grid grid;
  Offers baseline;
  std::vector<MismatchSetting> settings;  // deterministic, noisy_lmp, scuc_mismatch
  BindingStats binding;
  int windows_solved = 0;
  std::vector<std::string> skipped;
  long scuc_nodes = 0;
};

Offers random_offers(const Grid& grid, int n_blocks, double c1_lo, double c1_hi, double c2_lo, double c2_hi,
                     std::uint64_t seed);

MismatchResult run_mismatch(const MismatchConfig& config);

}  // namespace invlmp

#endif  // INVLMP_EXPERIMENTS_HPP_
