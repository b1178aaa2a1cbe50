#include "invlmp/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_map>
#include <unordered_set>

namespace invlmp {

long iterations_to_settle(const GdResult& result, int block, double lo, double hi, double reference, double tol) {
  const double slack = tol * std::abs(reference);
  const auto& traj = result.trajectory;
  for (std::size_t i = traj.size(); i-- > 0;) {
    const double c = traj[i](block);
    const double dist = c < lo ? lo - c : (c > hi ? c - hi : 0.0);
    if (dist > slack) return i + 1 < traj.size() ? result.trajectory_iterations[i + 1] : -1;
  }
  return traj.empty() ? -1 : result.trajectory_iterations.front();
}

double p_location(std::vector<double> s, double p) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (p == 2.0) {
    double sum = 0.0;
    for (double v : s) sum += v;
    return sum / static_cast<double>(s.size());
  }
  std::sort(s.begin(), s.end());
  if (p == 1.0) return 0.5 * (s[(s.size() - 1) / 2] + s[s.size() / 2]);
  auto loss = [&](double c) {
    double l = 0.0;
    for (double v : s) l += std::pow(std::abs(v - c), p);
    return l;
  };
  // Strictly convex for p > 1, so golden-section search is exact in the limit.
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = s.front(), b = s.back();
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = loss(x1), f2 = loss(x2);
  for (int it = 0; it < 200 && b - a > 1e-12 * std::max(1.0, std::abs(a)); ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = loss(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = loss(x2);
    }
  }
  return 0.5 * (a + b);
}

namespace {

std::unordered_map<long, std::size_t> index_by_id(const std::vector<MarketObservation>& obs) {
  std::unordered_map<long, std::size_t> m;
  for (std::size_t i = 0; i < obs.size(); ++i) m[obs[i].id] = i;
  return m;
}

void histogram_counts(const std::vector<double>& values, double lo, double hi, int bins, std::vector<long>& out) {
  out.assign(bins, 0);
  const double width = (hi - lo) / bins;
  for (double v : values) {
    int b = static_cast<int>(std::floor((v - lo) / width));
    out[std::clamp(b, 0, bins - 1)] += 1;
  }
}

}  // namespace

// ---------------------------------------------------------------------------

ConvergenceResult run_convergence(const Grid& grid, const Offers& baseline, const ConvergenceConfig& cfg) {
  ConvergenceResult r;
  r.dataset = generate_dataset(grid, baseline, cfg.dataset);
  const BlockLayout layout(baseline);
  const auto samples = recover_samples(r.dataset.observations, grid, r.dataset.edges);
  r.training = assemble_training_set(samples, layout.total());
  r.accounting = recovery_accounting(r.training, layout);

  Vector init(layout.total());
  for (int g = 0; g < layout.n_gens(); ++g) {
    const int nb = layout.offset[g + 1] - layout.offset[g];
    if (static_cast<int>(cfg.init_per_block.size()) != nb) {
      throw InputError("init_per_block: one value per block of each generator required");
    }
    for (int j = 0; j < nb; ++j) init(layout.index(g, j)) = cfg.init_per_block[j];
  }
  GdConfig gd;
  gd.iterations = cfg.iterations;
  gd.eta = cfg.eta;
  gd.init = init;
  gd.trajectory_stride = cfg.trajectory_stride;
  gd.p = 1.0;
  r.l1 = gd_recover(r.training, gd);
  gd.p = 2.0;
  r.l2 = gd_recover(r.training, gd);

  const auto where = index_by_id(r.dataset.observations);
  for (int g = 0; g < layout.n_gens(); ++g) {
    for (int j = 0; j < layout.offset[g + 1] - layout.offset[g]; ++j) {
      const int k = layout.index(g, j);
      BlockConvergence b;
      b.gen = g;
      b.block = j;
      b.samples = r.training.count(k);
      b.final_l1 = r.l1.c_hat(k);
      b.final_l2 = r.l2.c_hat(k);
      if (b.samples > 0) {
        std::vector<double> truth;
        for (long id : r.training.ids[k]) truth.push_back(r.dataset.truth[where.at(id)](k));
        TrainingSet t;
        t.values = {truth};
        t.ids = {r.training.ids[k]};
        b.truth_mean = closed_form_l2(t)(0);
        std::tie(b.truth_median_lo, b.truth_median_hi) = median_intervals(t)[0];
        const double mid = 0.5 * (b.truth_median_lo + b.truth_median_hi);
        b.settle_l1 = iterations_to_settle(r.l1, k, b.truth_median_lo, b.truth_median_hi, mid, cfg.tolerance);
        b.settle_l2 = iterations_to_settle(r.l2, k, b.truth_mean, b.truth_mean, b.truth_mean, cfg.tolerance);
      }
      r.blocks.push_back(b);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

std::vector<NoiseSetting> default_noise_settings() {
  return {{"1% small", 0.01, 50.0, 5.0},
          {"1% large", 0.01, 100.0, 10.0},
          {"5% small", 0.05, 50.0, 5.0},
          {"5% large", 0.05, 100.0, 10.0}};
}

bool RobustnessRun::pattern_holds(double l1_tolerance, double ratio) const {
  if (rows.empty()) return false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].samples == 0 || !(rows[i].err_l1 <= l1_tolerance)) return false;
    if (i > 0 && !(rows[i].err_l2 > rows[i - 1].err_l2)) return false;
  }
  return rows.back().err_l2 >= ratio * rows.back().err_l1;
}

RobustnessRun run_robustness(const Grid& grid, const Offers& baseline, const RobustnessConfig& cfg) {
  const BlockLayout layout(baseline);
  if (cfg.target_gen < 0 || cfg.target_gen >= layout.n_gens() || cfg.target_block < 0 ||
      cfg.target_block >= layout.offset[cfg.target_gen + 1] - layout.offset[cfg.target_gen]) {
    throw InputError("target: generator or block out of range");
  }
  const int k = layout.index(cfg.target_gen, cfg.target_block);
  const int bus = grid.generators[cfg.target_gen].bus;
  const double truth = baseline[cfg.target_gen].prices(cfg.target_block);
  const Dataset data = generate_dataset(grid, baseline, cfg.dataset);

  RobustnessRun run;
  run.seed = cfg.dataset.seed;
  for (const auto& s : cfg.settings) {
    // One noise seed for every setting: the corrupted entries are nested
    // across frequencies and the errors scale together across sizes.
    NoiseSpec spec{NoiseSpec::Mode::kLmpError, s.mu, s.sigma, s.frequency, cfg.dataset.seed ^ 0xC0FFEE0DDF00DULL,
                   cfg.granularity};
    std::vector<CorruptedEntry> log;
    const auto noisy = inject_lmp_noise(data.observations, grid, spec, &log);
    const TrainingSet full = assemble_training_set(recover_samples(noisy, grid, data.edges), layout.total());
    TrainingSet one;
    one.values = {full.values[k]};
    one.ids = {full.ids[k]};

    RobustnessRow row;
    row.seed = run.seed;
    row.setting = s.name;
    row.samples = one.count(0);
    row.truth = truth;
    std::unordered_set<long> used(one.ids[0].begin(), one.ids[0].end());
    for (const auto& e : log) row.corrupted_samples += e.bus == bus && used.count(e.observation);
    if (row.samples > 0) {
      GdConfig gd;
      gd.iterations = cfg.iterations;
      gd.eta = cfg.eta;
      gd.init = Vector::Constant(1, cfg.init);
      gd.trajectory_stride = cfg.iterations;
      gd.p = 1.0;
      row.c_hat_l1 = gd_recover(one, gd).c_hat(0);
      gd.p = 2.0;
      row.c_hat_l2 = gd_recover(one, gd).c_hat(0);
      row.err_l1 = std::abs(row.c_hat_l1 - truth) / truth;
      row.err_l2 = std::abs(row.c_hat_l2 - truth) / truth;
    }
    run.rows.push_back(row);
  }
  return run;
}

// ---------------------------------------------------------------------------

void MismatchConfig::validate() const {
  if (windows < 1) throw InputError("windows: horizon is empty");
  if (hours_per_window < 2) throw InputError("hours_per_window: at least 2 hours needed for ramping");
  if (n_blocks < 1) throw InputError("n_blocks: must be at least 1");
  if (!(c1_lo > 0.0 && c1_lo <= c1_hi && c2_lo >= 0.0 && c2_lo <= c2_hi)) {
    throw InputError("cost ranges: need 0 < c1_lo <= c1_hi and 0 <= c2_lo <= c2_hi");
  }
  if (!(level_lo > 0.0 && level_lo <= level_hi && level_hi <= 1.0)) {
    throw InputError("level: need 0 < level_lo <= level_hi <= 1");
  }
  if (daily_amplitude < 0.0 || hourly_jitter < 0.0 || bus_jitter < 0.0 || bus_jitter >= 1.0) {
    throw InputError("load shape: amplitudes must be nonnegative and bus_jitter below 1");
  }
  if (reserve_up < 0.0 || reserve_down < 0.0) throw InputError("reserves: must be nonnegative");
  if (!(ramp_fraction > 0.0)) throw InputError("ramp_fraction: must be positive");
  if (!(histogram_hi > histogram_lo) || histogram_bins < 1) throw InputError("histogram: empty range");
  lmp_noise.validate();
}

Offers random_offers(const Grid& grid, int n_blocks, double c1_lo, double c1_hi, double c2_lo, double c2_hi,
                     std::uint64_t seed) {
  auto rng = stream_rng(seed, 0x0FFE5ULL);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Offers out;
  for (const auto& g : grid.generators) {
    const double c1 = c1_lo + (c1_hi - c1_lo) * u(rng);
    const double c2 = c2_lo + (c2_hi - c2_lo) * u(rng);
    out.push_back(build_offer_baseline({0.0, c1, c2}, g.x_min, g.x_max, n_blocks));
  }
  return out;
}

MismatchResult run_mismatch(const MismatchConfig& cfg) {
  cfg.validate();
  MismatchResult r;
  r.grid = synthetic_grid(cfg.grid);
  const Grid& grid = r.grid;
  r.baseline = random_offers(grid, cfg.n_blocks, cfg.c1_lo, cfg.c1_hi, cfg.c2_lo, cfg.c2_hi, cfg.seed);
  const BlockLayout layout(r.baseline);
  const Vector truth = flat_prices(r.baseline);
  const BlockEdges edges = block_edges(r.baseline);
  RampConfig ramps{grid.gen_max() * cfg.ramp_fraction, grid.gen_max() * cfg.ramp_fraction};
  const double capacity = grid.gen_max().sum();

  std::vector<MarketObservation> plain, scuc;
  for (int w = 0; w < cfg.windows; ++w) {
    auto rng = stream_rng(cfg.seed, 1000 + static_cast<std::uint64_t>(w));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Offers offers = sample_offers(r.baseline, cfg.offer_sigma, rng);
    const double level = cfg.level_lo + (cfg.level_hi - cfg.level_lo) * u(rng);
    const double start_hour = 24.0 * u(rng);
    std::vector<Vector> profile;
    for (int t = 0; t < cfg.hours_per_window; ++t) {
      Vector e = grid.base_load;
      for (Eigen::Index b = 0; b < e.size(); ++b) e(b) *= 1.0 + cfg.bus_jitter * (2.0 * u(rng) - 1.0);
      const double shape = 1.0 + cfg.daily_amplitude * std::sin(2.0 * std::numbers::pi * (start_hour + t) / 24.0);
      const double jitter = 1.0 + cfg.hourly_jitter * (2.0 * u(rng) - 1.0);
      e *= std::min(level * shape * jitter, 1.0) * capacity / e.sum();
      profile.push_back(e);
    }
    const double first = profile.front().sum();
    const ReserveConfig reserves{cfg.reserve_up * first, cfg.reserve_down * first};

    // Every setting sees the same windows: a window that fails in either
    // model is dropped from all of them.
    std::vector<MarketObservation> w_plain, w_scuc;
    try {
      const ScucResult s = clear_scuc_ramping(grid, offers, profile, reserves, ramps, cfg.scuc);
      r.scuc_nodes += s.nodes;
      for (int t = 0; t < cfg.hours_per_window; ++t) {
        const long id = static_cast<long>(w) * cfg.hours_per_window + t;
        w_plain.push_back(observe(grid, clear_market(grid, offers, profile[t], cfg.scuc.market), id, t));
        w_scuc.push_back(observe(grid, s.hours[t], id, t));
      }
      const BindingStats b = binding_statistics(grid, s, ramps);
      r.binding.only_power += b.only_power;
      r.binding.only_ramp += b.only_ramp;
      r.binding.both += b.both;
      r.binding.neither += b.neither;
    } catch (const ClearingError& e) {
      r.skipped.push_back("window " + std::to_string(w) + ": " + e.what());
      continue;
    }
    ++r.windows_solved;
    plain.insert(plain.end(), w_plain.begin(), w_plain.end());
    scuc.insert(scuc.end(), w_scuc.begin(), w_scuc.end());
  }
  // The plain model has no reserve awards to consult.
  for (auto& o : scuc) {
    o.r_up.resize(0);
    o.r_down.resize(0);
  }
  NoiseSpec noise = cfg.lmp_noise;
  noise.mode = NoiseSpec::Mode::kLmpError;

  const std::vector<std::pair<std::string, std::vector<MarketObservation>>> inputs{
      {"deterministic", plain}, {"noisy_lmp", inject_lmp_noise(plain, grid, noise)}, {"scuc_mismatch", scuc}};
  for (const auto& [name, obs] : inputs) {
    MismatchSetting s;
    s.name = name;
    s.observations = obs;
    s.training = assemble_training_set(recover_samples(obs, grid, edges), layout.total());
    s.accounting = recovery_accounting(s.training, layout);
    GdConfig gd;
    gd.p = cfg.p;
    gd.iterations = cfg.iterations;
    gd.eta = cfg.eta;
    gd.init = Vector::Constant(layout.total(), cfg.init);
    gd.trajectory_stride = cfg.iterations;
    s.gd = gd_recover(s.training, gd);
    double sum = 0.0;
    std::vector<double> percent;
    for (int k = 0; k < layout.total(); ++k) {
      if (s.training.count(k) == 0) continue;
      const double e = (s.gd.c_hat(k) - truth(k)) / truth(k);
      s.blocks.push_back(k);
      s.rel_errors.push_back(e);
      percent.push_back(100.0 * e);
      sum += std::abs(e);
    }
    s.mean_abs_rel_error = s.blocks.empty() ? std::numeric_limits<double>::quiet_NaN() : sum / s.blocks.size();
    histogram_counts(percent, cfg.histogram_lo, cfg.histogram_hi, cfg.histogram_bins, s.histogram);
    r.settings.push_back(std::move(s));
  }
  return r;
}

}  // namespace invlmp
