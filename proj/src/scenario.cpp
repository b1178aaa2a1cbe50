#include "invlmp/scenario.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#ifndef INVLMP_GIT_DESCRIBE
#define INVLMP_GIT_DESCRIBE "unknown"
#endif

namespace invlmp {

using nlohmann::json;

OfferCurve build_offer_baseline(const QuadraticCost& cost, double x_min, double x_max, int n_blocks,
                                double price_scale) {
  if (n_blocks < 1) throw InputError("n_blocks: must be at least 1");
  if (!(x_max > x_min)) throw InputError("offer: zero-width block");
  if (cost.c2 < 0.0) throw InputError("c2: must be nonnegative");
  OfferCurve c;
  c.edges = Vector::LinSpaced(n_blocks + 1, x_min, x_max);
  c.edges(n_blocks) = x_max;
  c.prices.resize(n_blocks);
  for (int j = 0; j < n_blocks; ++j) {
    const double a = c.edges(j), b = c.edges(j + 1);
    if (!(b > a)) throw InputError("offer: zero-width block");
    c.prices(j) = price_scale * (cost(b) - cost(a)) / (b - a);
  }
  c.no_load_cost = price_scale * cost.c0;
  return c;
}

std::vector<QuadraticCost> ieee14_costs() {
  return {{2, 0.05, 0.002}, {5, 0.10, 0.003}, {8, 0.15, 0.004}, {12, 0.20, 0.005}, {15, 0.30, 0.006}};
}

Offers ieee14_baseline(double price_scale, int n_blocks, bool with_no_load) {
  Offers o;
  for (const auto& c : ieee14_costs()) {
    o.push_back(build_offer_baseline(c, 0.0, 100.0, n_blocks, price_scale));
    if (!with_no_load) o.back().no_load_cost = 0.0;
  }
  return o;
}

Offers sample_offers(const Offers& baseline, double sigma, std::mt19937_64& rng) {
  if (sigma < 0.0) throw InputError("sigma: must be nonnegative");
  Offers out = baseline;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> z(0.0, sigma);
  for (auto& c : out) {
    const Vector& base = baseline[&c - out.data()].prices;
    for (int attempt = 0;; ++attempt) {
      if (attempt == 10000) throw InputError("sample_offers: sigma too large to keep blocks increasing");
      for (int j = 0; j < c.n_blocks(); ++j) c.prices(j) = base(j) + z(rng);
      bool ok = true;
      for (int j = 1; j < c.n_blocks(); ++j) ok = ok && c.prices(j) > c.prices(j - 1);
      if (ok) break;
    }
  }
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t index) {
  // The seed is mixed before the xor: with a raw seed ^ index, small seeds
  // only permute each other's streams (1 ^ 2 == 2 ^ 1).
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ index));
}

void NoiseSpec::validate() const {
  if (frequency < 0.0 || frequency > 1.0) throw InputError("frequency: must lie in [0, 1]");
  if (sigma < 0.0) throw InputError("sigma: must be nonnegative");
}

namespace {

Dataset generate_once(const Grid& grid, const Offers& baseline, const DatasetConfig& cfg, std::uint64_t seed) {
  Dataset data;
  data.seed_used = seed;
  data.edges = block_edges(baseline);
  const BlockLayout layout(baseline);
  data.marginal_counts.assign(layout.total(), 0);
  const double capacity = grid.gen_max().sum();
  const long n = cfg.n_scenarios;
  for (long i = 0; i < n; ++i) {
    auto rng = stream_rng(seed, static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double level = cfg.sweep.lo + (cfg.sweep.hi - cfg.sweep.lo) * (static_cast<double>(i) + unit(rng)) / n;
    Vector e = grid.base_load;
    for (int b = 0; b < e.size(); ++b) e(b) *= 1.0 + cfg.sweep.jitter * (2.0 * unit(rng) - 1.0);
    if (e.sum() > 0.0) e *= level * capacity / e.sum();
    const Offers offers = sample_offers(baseline, cfg.offer_sigma, rng);
    try {
      const DispatchResult d = clear_market(grid, offers, e, cfg.market);
      MarketObservation obs = observe(grid, d, i);
      const auto mask = identify_free_generators(obs, grid, data.edges);
      for (int b = 0; b < layout.total(); ++b) data.marginal_counts[b] += mask[b];
      data.observations.push_back(std::move(obs));
      data.truth.push_back(flat_prices(offers));
    } catch (const ClearingError& err) {
      data.skipped.push_back("scenario " + std::to_string(i) + ": " + err.what());
    }
  }
  return data;
}

}  // namespace

Dataset generate_dataset(const Grid& grid, const Offers& baseline, const DatasetConfig& cfg) {
  if (cfg.n_scenarios < 0) throw InputError("n_scenarios: must be nonnegative");
  if (!(cfg.sweep.lo >= 0.0 && cfg.sweep.lo <= cfg.sweep.hi)) throw InputError("sweep: need 0 <= lo <= hi");
  if (static_cast<int>(baseline.size()) != grid.n_gens()) throw InputError("offers: one curve per generator required");
  Dataset data;
  for (int attempt = 0; attempt < std::max(1, cfg.max_attempts); ++attempt) {
    data = generate_once(grid, baseline, cfg, cfg.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(attempt));
    data.attempts = attempt + 1;
    const bool all = std::all_of(data.marginal_counts.begin(), data.marginal_counts.end(), [](long c) { return c > 0; });
    if (!cfg.require_all_marginal || all) break;
  }
  return data;
}

std::vector<MarketObservation> inject_lmp_noise(const std::vector<MarketObservation>& obs, const Grid& grid,
                                                const NoiseSpec& spec, std::vector<CorruptedEntry>* log) {
  spec.validate();
  std::vector<MarketObservation> out = obs;
  for (auto& o : out) {
    auto rng = stream_rng(spec.seed, static_cast<std::uint64_t>(o.id));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    const bool whole = spec.granularity == NoiseSpec::Granularity::kObservation;
    const bool pick_all = whole && unit(rng) < spec.frequency;
    for (Eigen::Index b = 0; b < o.omega.size(); ++b) {
      const double draw = whole ? 0.0 : unit(rng);
      const double delta = spec.mu + spec.sigma * z(rng);
      if (whole ? pick_all : draw < spec.frequency) {
        o.omega(b) += delta;
        if (b == grid.reference_bus) o.lambda += delta;
        if (log) log->push_back({o.id, static_cast<int>(b), delta});
      }
    }
  }
  return out;
}

const char* build_description() { return INVLMP_GIT_DESCRIBE; }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_dataset(const Dataset& data, const Grid& grid, const DatasetConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_observations(data.observations, dir / "observations.jsonl");
  save_grid(grid, dir / "grid.json");

  json truth;
  truth["format"] = "invlmp-truth";
  truth["version"] = 1;
  json ids = json::array(), prices = json::array();
  for (std::size_t i = 0; i < data.truth.size(); ++i) {
    ids.push_back(data.observations[i].id);
    prices.push_back(std::vector<double>(data.truth[i].data(), data.truth[i].data() + data.truth[i].size()));
  }
  truth["ids"] = ids;
  truth["prices"] = prices;
  std::ofstream(dir / "ground_truth.json") << truth.dump() << '\n';

  json m;
  m["format"] = "invlmp-dataset";
  m["version"] = 1;
  m["build"] = INVLMP_GIT_DESCRIBE;
  m["grid"] = grid.name;
  m["grid_hash"] = hex64(grid_hash(grid));
  m["seed"] = cfg.seed;
  m["seed_used"] = data.seed_used;
  m["attempts"] = data.attempts;
  m["n_scenarios"] = cfg.n_scenarios;
  m["noise"] = {{"mode", "offer_fluctuation"}, {"mu", 0.0}, {"sigma", cfg.offer_sigma}};
  m["load_sweep"] = {{"lo", cfg.sweep.lo}, {"hi", cfg.sweep.hi}, {"jitter", cfg.sweep.jitter}};
  json edges = json::array();
  for (const auto& e : data.edges) edges.push_back(std::vector<double>(e.data(), e.data() + e.size()));
  m["block_edges"] = edges;
  m["marginal_counts"] = data.marginal_counts;
  m["skipped"] = data.skipped;
  m["observations_hash"] = hex64(fnv1a64([&] {
    std::string s;
    for (const auto& o : data.observations) s += to_json_line(o) + "\n";
    return s;
  }()));
  std::ofstream(dir / "manifest.json") << m.dump(1) << '\n';
}

LoadedDataset read_dataset(const std::filesystem::path& dir) {
  LoadedDataset d;
  if (!std::filesystem::exists(dir / "manifest.json")) throw InputError("dataset: missing manifest.json in " + dir.string());
  d.grid = load_grid(dir / "grid.json");
  d.observations = read_observations(dir / "observations.jsonl");
  std::ifstream in(dir / "manifest.json");
  json m;
  try {
    m = json::parse(in);
    for (const auto& e : m.at("block_edges")) {
      const auto v = e.get<std::vector<double>>();
      d.edges.emplace_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("manifest: ") + e.what());
  }
  if (m.value("grid_hash", "") != hex64(grid_hash(d.grid))) throw InputError("manifest: grid_hash does not match grid.json");
  if (std::filesystem::exists(dir / "ground_truth.json")) {
    std::ifstream tin(dir / "ground_truth.json");
    const json t = json::parse(tin);
    for (const auto& row : t.at("prices")) {
      const auto v = row.get<std::vector<double>>();
      d.truth.emplace_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
    }
  }
  return d;
}

}  // namespace invlmp
