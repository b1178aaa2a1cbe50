#include <random>

#include "doctest.h"
#include "json.hpp"
#include "invlmp/grid.hpp"
#include "oracles.hpp"

using namespace invlmp;

namespace {

std::vector<std::tuple<int, int, double>> branches(const Grid& g) {
  std::vector<std::tuple<int, int, double>> out;
  for (const auto& l : g.lines) out.emplace_back(l.from, l.to, l.reactance);
  return out;
}

Vector balanced_injection(std::mt19937_64& rng, int m) {
  std::normal_distribution<double> z(0.0, 30.0);
  Vector p(m);
  for (int b = 0; b < m; ++b) p(b) = z(rng);
  p.array() -= p.mean();
  return p;
}

}  // namespace

TEST_CASE("two-bus ptdf") {
  const Matrix phi = compute_ptdf(2, {{0, 1, 0.1, 100.0}}, 0);
  REQUIRE(phi.rows() == 1);
  CHECK(phi(0, 0) == doctest::Approx(0.0));
  CHECK(phi(0, 1) == doctest::Approx(-1.0));
}

TEST_CASE("triangle splits flow by path impedance") {
  // Inject at bus 0, withdraw at bus 1: direct path carries 2/3, the path 0-2-1 carries 1/3.
  const std::vector<Line> lines = {{0, 1, 1.0, 10.0}, {1, 2, 1.0, 10.0}, {0, 2, 1.0, 10.0}};
  const Matrix phi = compute_ptdf(3, lines, 2);
  Vector inj(3);
  inj << 1.0, -1.0, 0.0;
  const Vector f = phi * inj;
  CHECK(f(0) == doctest::Approx(2.0 / 3.0));
  CHECK(f(1) == doctest::Approx(-1.0 / 3.0));
  CHECK(f(2) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("ieee14 ptdf matches dc power flow") {
  const Grid g = ieee14();
  CHECK(g.n_lines() == 20);
  CHECK(g.base_load.sum() == doctest::Approx(259.0));
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector p = balanced_injection(rng, g.n_buses);
    const Vector ref = oracle::dc_power_flow(g.n_buses, branches(g), p);
    CHECK((g.ptdf * p - ref).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("flows are linear and reference invariant for balanced injections") {
  const Grid g = ieee14();
  std::mt19937_64 rng(5);
  const Vector a = balanced_injection(rng, g.n_buses);
  const Vector b = balanced_injection(rng, g.n_buses);
  CHECK((g.ptdf * (2.0 * a + b) - (2.0 * g.ptdf * a + g.ptdf * b)).norm() <= 1e-9);
  const Matrix other = compute_ptdf(g.n_buses, g.lines, 7);
  CHECK((other * a - g.ptdf * a).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(other.col(7).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("synthetic grid is connected and consistent") {
  const Grid g = synthetic_grid({});
  CHECK(g.n_buses == 100);
  CHECK(g.n_gens() == 20);
  CHECK(g.n_lines() >= 99);
  g.validate();
  std::mt19937_64 rng(3);
  const Vector p = balanced_injection(rng, g.n_buses);
  CHECK((g.ptdf * p - oracle::dc_power_flow(g.n_buses, branches(g), p)).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(grid_hash(synthetic_grid({})) == grid_hash(g));
}

TEST_CASE("json round trip preserves the grid") {
  const Grid g = ieee14();
  const Grid h = grid_from_json_text(grid_to_json_text(g));
  CHECK(h.n_buses == g.n_buses);
  CHECK(h.reference_bus == g.reference_bus);
  CHECK(h.n_lines() == g.n_lines());
  CHECK(h.generators[3].bus == 5);
  CHECK(h.ptdf.isApprox(g.ptdf, 1e-15));
  CHECK(h.base_load == g.base_load);
  CHECK(grid_hash(h) == grid_hash(g));
}

TEST_CASE("malformed grids name the offending field") {
  const std::string text = grid_to_json_text(ieee14());
  auto j = nlohmann::json::parse(text);
  j.erase("line_limit");
  try {
    grid_from_json_text(j.dump());
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("line_limit") != std::string::npos);
  }
  auto k = nlohmann::json::parse(text);
  k["gen_bus"][0] = 99;
  CHECK_THROWS_AS(grid_from_json_text(k.dump()), InputError);

  std::vector<Line> split = {{0, 1, 0.1, 1.0}, {2, 3, 0.1, 1.0}};
  CHECK_THROWS_AS(compute_ptdf(4, split, 0), InputError);
}
