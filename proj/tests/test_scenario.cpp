#include <filesystem>
#include <numeric>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "invlmp/scenario.hpp"

using namespace invlmp;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("invlmp_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

MarketObservation flat_observation(long id, int m, int n) {
  MarketObservation o;
  o.id = id;
  o.u.assign(n, 1);
  o.x = Vector::Constant(n, 10.0);
  o.omega = Vector::Zero(m);
  o.e = Vector::Zero(m);
  o.gen_at_max.assign(n, false);
  o.gen_at_min.assign(n, false);
  return o;
}

}  // namespace

TEST_CASE("offer baseline uses the average incremental cost") {
  const OfferCurve g1 = build_offer_baseline({2.0, 0.05, 0.002}, 0.0, 100.0, 5);
  CHECK(g1.n_blocks() == 5);
  for (int j = 0; j < 5; ++j) CHECK(g1.width(j) == doctest::Approx(20.0));
  CHECK(g1.prices(0) == doctest::Approx(0.09));
  for (int j = 1; j < 5; ++j) CHECK(g1.prices(j) > g1.prices(j - 1));

  const OfferCurve lin = build_offer_baseline({1.0, 3.0, 0.0}, 10.0, 50.0, 4);
  for (int j = 0; j < 4; ++j) CHECK(lin.prices(j) == doctest::Approx(3.0));

  const QuadraticCost q{5.0, 0.1, 0.003};
  const OfferCurve one = build_offer_baseline(q, 20.0, 80.0, 1);
  CHECK(one.prices(0) == doctest::Approx((q(80.0) - q(20.0)) / 60.0));

  CHECK_THROWS_AS(build_offer_baseline(q, 10.0, 10.0, 2), InputError);
  CHECK_THROWS_AS(build_offer_baseline(q, 0.0, 10.0, 0), InputError);

  const Offers scaled = ieee14_baseline(100.0);
  CHECK(scaled[0].prices(0) == doctest::Approx(9.0));
  CHECK(scaled[2].prices(2) == doctest::Approx(55.0));
  CHECK(scaled[4].prices(4) == doctest::Approx(138.0));
}

TEST_CASE("offer sampling") {
  const Offers base = ieee14_baseline(100.0);
  std::mt19937_64 rng(1);
  const Offers same = sample_offers(base, 0.0, rng);
  for (int k = 0; k < 5; ++k) CHECK(same[k].prices == base[k].prices);

  const int draws = 10000;
  const double sigma = 2.0;
  Vector sum = Vector::Zero(25);
  for (int i = 0; i < draws; ++i) {
    const Offers o = sample_offers(base, sigma, rng);
    sum += flat_prices(o);
    for (const auto& c : o) {
      for (int j = 1; j < c.n_blocks(); ++j) REQUIRE(c.prices(j) > c.prices(j - 1));
    }
  }
  const Vector mean = sum / draws;
  CHECK((mean - flat_prices(base)).cwiseAbs().maxCoeff() <= 3.0 * sigma / 100.0);

  std::mt19937_64 a(77), b(77);
  CHECK(flat_prices(sample_offers(base, sigma, a)) == flat_prices(sample_offers(base, sigma, b)));
}

TEST_CASE("dataset generation on the 14-bus grid") {
  const Grid g = ieee14();
  const Offers base = ieee14_baseline(100.0);
  DatasetConfig cfg;
  cfg.n_scenarios = 200;
  cfg.seed = 3;
  cfg.require_all_marginal = true;
  const Dataset d = generate_dataset(g, base, cfg);
  REQUIRE(d.observations.size() + d.skipped.size() == 200);
  for (long c : d.marginal_counts) CHECK(c >= 1);

  long pairs = 0;
  for (const auto& o : d.observations) {
    const auto mask = identify_free_generators(o, g, d.edges);
    pairs += std::count(mask.begin(), mask.end(), true);
  }
  CHECK(std::accumulate(d.marginal_counts.begin(), d.marginal_counts.end(), 0L) == pairs);

  DatasetConfig one = cfg;
  one.n_scenarios = 1;
  one.require_all_marginal = false;
  const auto dir = temp_dir("one");
  write_dataset(generate_dataset(g, base, one), g, one, dir);
  const std::string lines = slurp(dir / "observations.jsonl");
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 1);
  CHECK(lines.find("price") == std::string::npos);
}

TEST_CASE("dataset files are reproducible and round trip") {
  const Grid g = ieee14();
  const Offers base = ieee14_baseline(100.0);
  DatasetConfig cfg;
  cfg.n_scenarios = 40;
  cfg.seed = 11;
  const auto a = temp_dir("a"), b = temp_dir("b");
  write_dataset(generate_dataset(g, base, cfg), g, cfg, a);
  write_dataset(generate_dataset(g, base, cfg), g, cfg, b);
  for (const char* f : {"observations.jsonl", "ground_truth.json", "manifest.json", "grid.json"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const LoadedDataset l = read_dataset(a);
  const Dataset again = generate_dataset(g, base, cfg);
  CHECK(l.observations.size() + again.skipped.size() == 40);
  CHECK(l.truth.size() == l.observations.size());
  CHECK(l.edges.size() == 5);
  CHECK(grid_hash(l.grid) == grid_hash(g));
  CHECK(l.observations[7].omega == again.observations[7].omega);
  CHECK(l.observations[7].x == again.observations[7].x);
  CHECK(l.truth[7] == again.truth[7]);

  CHECK_THROWS_AS(read_dataset(temp_dir("missing")), InputError);
}

TEST_CASE("lmp noise injection") {
  const Grid g = ieee14();
  std::vector<MarketObservation> obs;
  for (long i = 0; i < 2136; ++i) obs.push_back(flat_observation(i, 14, 5));

  NoiseSpec none{NoiseSpec::Mode::kLmpError, 50.0, 5.0, 0.0, 9};
  const auto same = inject_lmp_noise(obs, g, none);
  for (std::size_t i = 0; i < obs.size(); ++i) CHECK(same[i].omega == obs[i].omega);

  NoiseSpec shift{NoiseSpec::Mode::kLmpError, 50.0, 0.0, 1.0, 9};
  const auto all = inject_lmp_noise(obs, g, shift);
  for (const auto& o : all) {
    CHECK(o.omega.cwiseEqual(50.0).all());
    CHECK(o.lambda == 50.0);
  }

  std::vector<CorruptedEntry> small_log, large_log, wide_log;
  NoiseSpec small{NoiseSpec::Mode::kLmpError, 50.0, 5.0, 0.01, 9};
  NoiseSpec large{NoiseSpec::Mode::kLmpError, 100.0, 10.0, 0.01, 9};
  NoiseSpec wide{NoiseSpec::Mode::kLmpError, 50.0, 5.0, 0.05, 9};
  inject_lmp_noise(obs, g, small, &small_log);
  inject_lmp_noise(obs, g, large, &large_log);
  inject_lmp_noise(obs, g, wide, &wide_log);
  // Binomial(29904, 0.01): mean 299.04, sd 17.2; 99% interval +-2.576 sd.
  const double n = 2136.0 * 14.0, mean = n * 0.01, sd = std::sqrt(n * 0.01 * 0.99);
  CHECK(std::abs(static_cast<double>(small_log.size()) - mean) <= 2.576 * sd);
  REQUIRE(small_log.size() == large_log.size());
  for (std::size_t i = 0; i < small_log.size(); ++i) {
    CHECK(large_log[i].bus == small_log[i].bus);
    CHECK(large_log[i].delta == doctest::Approx(2.0 * small_log[i].delta));
  }
  CHECK(wide_log.size() > small_log.size());
  std::size_t found = 0;
  for (const auto& e : small_log) {
    found += std::any_of(wide_log.begin(), wide_log.end(),
                         [&](const CorruptedEntry& w) { return w.observation == e.observation && w.bus == e.bus; });
  }
  CHECK(found == small_log.size());

  NoiseSpec whole = small;
  whole.granularity = NoiseSpec::Granularity::kObservation;
  std::vector<CorruptedEntry> whole_log;
  inject_lmp_noise(obs, g, whole, &whole_log);
  CHECK(whole_log.size() % 14 == 0);

  NoiseSpec bad = small;
  bad.frequency = 1.5;
  CHECK_THROWS_AS(inject_lmp_noise(obs, g, bad), InputError);
}

TEST_CASE("free generator identification") {
  const Grid g = ieee14();
  const BlockEdges edges = block_edges(ieee14_baseline(100.0));
  MarketObservation o = flat_observation(0, 14, 5);
  o.x << 100.0, 30.0, 40.0, 55.0, 0.0;
  o.u = {1, 1, 1, 0, 1};
  const auto mask = identify_free_generators(o, g, edges);
  REQUIRE(mask.size() == 25);
  for (int j = 0; j < 5; ++j) CHECK_FALSE(mask[j]);  // at x_max
  CHECK(mask[5 + 1]);                                  // 30 MW inside block 2
  CHECK(std::count(mask.begin() + 10, mask.begin() + 15, true) == 0);  // on a block edge
  CHECK(std::count(mask.begin() + 15, mask.begin() + 20, true) == 0);  // uncommitted
  CHECK(std::count(mask.begin() + 20, mask.end(), true) == 0);         // at x_min

  o.r_up = Vector::Zero(5);
  o.r_down = Vector::Zero(5);
  o.r_up(1) = 70.0;
  CHECK_FALSE(identify_free_generators(o, g, edges)[6]);
}

TEST_CASE("observation json round trip") {
  const Grid g = ieee14();
  const DispatchResult d = clear_market(g, ieee14_baseline(100.0), g.base_load);
  const MarketObservation o = observe(g, d, 42, 3);
  const MarketObservation r = observation_from_json(to_json_line(o));
  CHECK(r.id == 42);
  CHECK(r.hour == 3);
  CHECK(r.x == o.x);
  CHECK(r.omega == o.omega);
  CHECK(r.lambda == o.lambda);
  CHECK(r.line_binding == o.line_binding);
  CHECK_THROWS_AS(observation_from_json("{\"id\":1}"), InputError);
  CHECK_THROWS_AS(observation_from_json("not json"), InputError);
}
