#ifndef INVLMP_SCENARIO_HPP_
#define INVLMP_SCENARIO_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "invlmp/grid.hpp"
#include "invlmp/market.hpp"
#include "invlmp/observation.hpp"

namespace invlmp {

/// C(x) = c0 + c1 x + c2 x^2.
struct QuadraticCost {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double operator()(double x) const { return c0 + (c1 + c2 * x) * x; }
};

/// Equal-width blocks over [x_min, x_max]; block price is the average
/// incremental cost (C(b) - C(a)) / (b - a). Prices and the no-load cost are
/// multiplied by `price_scale`.
OfferCurve build_offer_baseline(const QuadraticCost& cost, double x_min, double x_max, int n_blocks,
                                double price_scale = 1.0);

/// Cost data of the five 14-bus generators, in grid order.
std::vector<QuadraticCost> ieee14_costs();
/// Offers clear on energy prices only unless `with_no_load` adds c0 as a
/// commitment cost.
Offers ieee14_baseline(double price_scale, int n_blocks = 5, bool with_no_load = false);

/// Baseline plus N(0, sigma^2) per block. A generator whose draw is not
/// strictly increasing is redrawn as a whole.
Offers sample_offers(const Offers& baseline, double sigma, std::mt19937_64& rng);

/// Deterministic per-stream generator: splitmix64(splitmix64(seed) xor index).
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t index);

struct NoiseSpec {
  enum class Mode { kOfferFluctuation, kLmpError };
  enum class Granularity { kEntry, kObservation };
  Mode mode = Mode::kLmpError;
  double mu = 0.0;
  double sigma = 0.0;
  double frequency = 0.0;
  std::uint64_t seed = 0;
  Granularity granularity = Granularity::kEntry;
  void validate() const;
};

struct LoadSweep {
  /// Total load range as fractions of installed capacity.
  double lo = 0.02;
  double hi = 1.0;
  /// Per-bus multiplicative jitter half-width.
  double jitter = 0.2;
};

struct DatasetConfig {
  long n_scenarios = 200;
  std::uint64_t seed = 1;
  double offer_sigma = 2.0;
  LoadSweep sweep;
  /// Retry with a fresh sweep until every block is marginal at least once.
  bool require_all_marginal = false;
  int max_attempts = 20;
  MarketOptions market;
};

struct Dataset {
  std::vector<MarketObservation> observations;
  /// Sampled offer prices per observation, flat BlockLayout order.
  std::vector<Vector> truth;
  BlockEdges edges;
  /// Scenarios in which each flat block was free.
  std::vector<long> marginal_counts;
  std::vector<std::string> skipped;
  int attempts = 1;
  std::uint64_t seed_used = 0;
};

Dataset generate_dataset(const Grid& grid, const Offers& baseline, const DatasetConfig& config);

struct CorruptedEntry {
  long observation;
  int bus;
  double delta;
};

/// Adds N(mu, sigma^2) to a `frequency` fraction of (observation, bus) LMP
/// entries (or of whole observations). The reference price moves with its
/// bus. Each entry consumes one uniform and one normal draw from a stream
/// keyed by (seed, observation), so settings sharing a seed are nested.
std::vector<MarketObservation> inject_lmp_noise(const std::vector<MarketObservation>& obs, const Grid& grid,
                                                const NoiseSpec& spec, std::vector<CorruptedEntry>* log = nullptr);

/// Writes observations.jsonl, ground_truth.json, manifest.json and grid.json.
void write_dataset(const Dataset& data, const Grid& grid, const DatasetConfig& config,
                   const std::filesystem::path& dir);

struct LoadedDataset {
  Grid grid;
  std::vector<MarketObservation> observations;
  BlockEdges edges;
  std::vector<Vector> truth;  // empty when ground_truth.json is absent
};

LoadedDataset read_dataset(const std::filesystem::path& dir);

std::string hex64(std::uint64_t v);

/// `git describe` of the source tree the library was built from.
const char* build_description();

}  // namespace invlmp

#endif  // INVLMP_SCENARIO_HPP_
