#include <random>

#include "doctest.h"
#include "invlmp/market.hpp"
#include "oracles.hpp"

using namespace invlmp;

namespace {

OfferCurve curve(double lo, double hi, std::vector<double> prices, double no_load = 0.0) {
  OfferCurve c;
  const int nb = static_cast<int>(prices.size());
  c.edges = Vector::LinSpaced(nb + 1, lo, hi);
  c.prices = Eigen::Map<Vector>(prices.data(), nb);
  c.no_load_cost = no_load;
  return c;
}

// Scaled 14-bus offers: average incremental cost per 20 MW block, x100,
// optionally with the fixed cost as a commitment cost.
Offers fourteen_bus_offers(bool no_load = false) {
  const double c1[] = {0.05, 0.10, 0.15, 0.20, 0.30};
  const double c2[] = {0.002, 0.003, 0.004, 0.005, 0.006};
  const double c0[] = {2, 5, 8, 12, 15};
  Offers o;
  for (int k = 0; k < 5; ++k) {
    std::vector<double> p;
    for (int j = 0; j < 5; ++j) p.push_back(100.0 * (c1[k] + c2[k] * (40.0 * j + 20.0)));
    o.push_back(curve(0.0, 100.0, p, no_load ? 100.0 * c0[k] : 0.0));
  }
  return o;
}

Grid two_bus(double limit) {
  Grid g;
  g.name = "two";
  g.n_buses = 2;
  g.lines = {{0, 1, 0.1, limit}};
  g.generators = {{"A", 0, 0.0, 100.0}, {"B", 1, 0.0, 100.0}};
  g.base_load = Vector::Zero(2);
  refresh_ptdf(g);
  return g;
}

Vector scaled_load(const Grid& g, double total, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> jitter(0.8, 1.2);
  Vector e = g.base_load;
  for (int b = 0; b < e.size(); ++b) e(b) *= jitter(rng);
  return e * (total / e.sum());
}

void check_kkt(const Grid& g, const Offers& o, const DispatchResult& d) {
  REQUIRE(d.optimal());
  const KktReport r = kkt_residuals(g, o, d);
  CHECK(r.max() <= 1e-6);
  CHECK(d.certificate.max_primal_violation <= 1e-8);
  CHECK(d.certificate.max_complementarity <= 1e-8);
  CHECK(d.certificate.max_dual_sign_violation <= 0.0);
  CHECK(d.certificate.duality_gap_relative <= 1e-6);
}

}  // namespace

TEST_CASE("uncongested single marginal generator sets a uniform price") {
  const Grid g = two_bus(1000.0);
  const Offers o = {curve(0, 100, {10, 20}), curve(0, 100, {30, 40})};
  const DispatchResult d = solve_dcopf(g, o, Vector::Constant(2, 35.0), {1, 1});
  check_kkt(g, o, d);
  CHECK(d.x(0) == doctest::Approx(70.0));
  CHECK(d.lambda == doctest::Approx(20.0));
  CHECK(d.omega(0) == doctest::Approx(20.0));
  CHECK(d.omega(1) == doctest::Approx(20.0));
  CHECK(d.mu.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-bus congestion separates prices by the line multiplier") {
  // Cheap unit at bus 1, load 80 MW at bus 2, 50 MW line: the expensive unit covers 30 MW.
  const Grid g = two_bus(50.0);
  const Offers o = {curve(0, 100, {10}), curve(0, 100, {30})};
  Vector e(2);
  e << 0.0, 80.0;
  const DispatchResult d = solve_dcopf(g, o, e, {1, 1});
  check_kkt(g, o, d);
  CHECK(d.x(0) == doctest::Approx(50.0));
  CHECK(d.x(1) == doctest::Approx(30.0));
  CHECK(d.flow(0) == doctest::Approx(50.0));
  CHECK(d.lambda == doctest::Approx(10.0));
  CHECK(d.mu(0) == doctest::Approx(20.0));
  CHECK(d.omega(1) - d.omega(0) == doctest::Approx((g.ptdf.transpose() * (d.nu - d.mu))(1)));
  CHECK(d.omega(1) == doctest::Approx(30.0));
  const BlockLayout layout(o);
  const Vector w15 = compute_lmps_from_prices(flat_prices(o), d.alpha, d.beta, d.mu, d.nu, g.ptdf,
                                              block_bus_incidence(g, layout));
  CHECK((w15 - d.omega).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(d.omega(g.reference_bus) == doctest::Approx(d.lambda));
}

TEST_CASE("lmp helpers without congestion") {
  Matrix phi(1, 2);
  phi << 0.0, -1.0;
  const Vector z = Vector::Zero(1);
  const Vector w = compute_lmps(17.0, z, z, phi);
  CHECK(w(0) == 17.0);
  CHECK(w(1) == 17.0);
}

TEST_CASE("unit commitment edge cases") {
  const Grid g = ieee14();
  SUBCASE("zero load commits nothing") {
    const Offers o = fourteen_bus_offers(true);
    const DispatchResult d = clear_market(g, o, Vector::Zero(14));
    CHECK(d.objective == doctest::Approx(0.0));
    CHECK(std::all_of(d.u.begin(), d.u.end(), [](int v) { return v == 0; }));
  }
  SUBCASE("light load runs only the cheapest unit") {
    const Offers o = fourteen_bus_offers(true);
    Vector e = Vector::Zero(14);
    e(1) = 30.0;
    const std::vector<int> u = clear_uc(g, o, e);
    CHECK(u == std::vector<int>{1, 0, 0, 0, 0});
  }
  SUBCASE("identical units tie-break to the lowest index") {
    const Grid t = two_bus(1000.0);
    const Offers o = {curve(0, 100, {20}, 50.0), curve(0, 100, {20}, 50.0)};
    const std::vector<int> u = clear_uc(t, o, Vector::Constant(2, 50.0));
    CHECK(u == std::vector<int>{1, 0});
  }
  SUBCASE("load above capacity is reported") {
    const Offers o = fourteen_bus_offers();
    CHECK_THROWS_AS(clear_uc(g, o, Vector::Constant(14, 40.0)), ClearingError);
  }
  SUBCASE("all-off commitment with positive load is infeasible") {
    const Offers o = fourteen_bus_offers();
    const DispatchResult d = solve_dcopf(g, o, g.base_load, {0, 0, 0, 0, 0});
    CHECK(d.status == LpStatus::kInfeasible);
  }
}

TEST_CASE("ieee14 commitment matches exhaustive enumeration") {
  const Grid g = ieee14();
  const Offers o = fourteen_bus_offers();
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> level(20.0, 480.0);
  for (int trial = 0; trial < 12; ++trial) {
    const Vector e = scaled_load(g, level(rng), rng);
    double best = kInf;
    for (int mask = 0; mask < 32; ++mask) {
      std::vector<int> u(5);
      for (int k = 0; k < 5; ++k) u[k] = (mask >> k) & 1;
      const DispatchResult d = solve_dcopf(g, o, e, u);
      if (d.optimal()) best = std::min(best, d.objective);
    }
    if (!std::isfinite(best)) {
      CHECK_THROWS_AS(clear_market(g, o, e), ClearingError);
      continue;
    }
    const DispatchResult d = clear_market(g, o, e);
    CHECK(d.objective == doctest::Approx(best).epsilon(1e-9));
    check_kkt(g, o, d);
  }
}

TEST_CASE("dcopf duals are consistent on random ieee14 hours") {
  const Grid g = ieee14();
  const Offers o = fourteen_bus_offers();
  const BlockLayout layout(o);
  const Matrix sb = block_bus_incidence(g, layout);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> level(20.0, 420.0);
  int congested = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const Vector e = scaled_load(g, level(rng), rng);
    const DispatchResult d = clear_market(g, o, e);
    check_kkt(g, o, d);
    CHECK(d.objective == doctest::Approx(d.dual_objective).epsilon(1e-6));
    CHECK((d.flow.cwiseAbs() - g.line_limits()).maxCoeff() <= 1e-8);
    const Vector w15 = compute_lmps_from_prices(flat_prices(o), d.alpha, d.beta, d.mu, d.nu, g.ptdf, sb);
    CHECK((w15 - d.omega).cwiseAbs().maxCoeff() <= 1e-8);
    if ((d.mu + d.nu).maxCoeff() > 0.0) ++congested;
  }
  CHECK(congested > 0);
}

TEST_CASE("lazy line generation reaches the same optimum") {
  const Grid g = ieee14();
  const Offers o = fourteen_bus_offers();
  std::mt19937_64 rng(8);
  MarketOptions full;
  full.lazy_lines = false;
  for (int trial = 0; trial < 10; ++trial) {
    const Vector e = scaled_load(g, 100.0 + 35.0 * trial, rng);
    const DispatchResult a = clear_market(g, o, e, full);
    const DispatchResult b = clear_market(g, o, e);
    CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-9));
    // Prices may differ when a unit sits exactly on a block edge; both must still be valid.
    check_kkt(g, o, b);
  }
}

TEST_CASE("kkt report flags a perturbed dispatch") {
  const Grid g = ieee14();
  const Offers o = fourteen_bus_offers();
  DispatchResult d = clear_market(g, o, g.base_load);
  CHECK(kkt_residuals(g, o, d).max() <= 1e-6);
  d.x(1) += 1.0;
  CHECK(kkt_residuals(g, o, d).primal >= 1.0 - 1e-9);
}

TEST_CASE("reserve model") {
  const Grid g = ieee14();
  const Offers o = fourteen_bus_offers();
  const Vector e = g.base_load;
  const std::vector<int> u = clear_uc(g, o, e);

  SUBCASE("zero requirements reproduce the plain dispatch") {
    const DispatchResult a = solve_dcopf(g, o, e, u);
    const DispatchResult b = solve_dcopf_reserves(g, o, e, u, {0.0, 0.0});
    REQUIRE(b.optimal());
    CHECK((a.x - b.x).cwiseAbs().maxCoeff() <= 1e-7);
    CHECK((a.omega - b.omega).cwiseAbs().maxCoeff() <= 1e-7);
    CHECK(a.objective == doctest::Approx(b.objective));
  }

  SUBCASE("reserve equal to spare capacity binds every committed unit") {
    const Grid t = two_bus(1000.0);
    const Offers two = {curve(0, 100, {10, 12}), curve(0, 100, {30, 32})};
    const Vector load = Vector::Constant(2, 60.0);
    const DispatchResult d = solve_dcopf_reserves(t, two, load, {1, 1}, {80.0, 0.0});
    REQUIRE(d.optimal());
    for (int k = 0; k < 2; ++k) CHECK(d.x(k) + d.r_up(k) == doctest::Approx(100.0));
    CHECK(d.theta_up >= 0.0);
  }

  SUBCASE("plain kkt residuals are confined to reserve-bound units") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> level(150.0, 380.0);
    const BlockLayout layout(o);
    for (int trial = 0; trial < 10; ++trial) {
      const Vector load = scaled_load(g, level(rng), rng);
      const std::vector<int> uc = clear_uc(g, o, load);
      double spare = 0.0;
      for (int k = 0; k < 5; ++k) spare += uc[k] * 100.0;
      spare -= load.sum();
      const ReserveConfig rc{0.8 * spare, 0.3 * load.sum()};
      const DispatchResult d = solve_dcopf_reserves(g, o, load, uc, rc);
      if (!d.optimal()) continue;
      const KktReport rep = kkt_residuals(g, o, d);
      CHECK(rep.primal <= 1e-6);
      CHECK(rep.complementarity <= 1e-6);
      for (int b = 0; b < layout.total(); ++b) {
        const int k = layout.gen_of[b];
        const double expect = std::abs(d.alpha_gen(k) * (d.x(k) < 100.0 * uc[k] - kBindTol) -
                                       d.beta_gen(k) * (d.x(k) > kBindTol));
        CHECK(rep.stationarity_by_block(b) == doctest::Approx(expect).epsilon(1e-6).scale(1.0));
        const bool reserve_free = d.x(k) + d.r_up(k) < 100.0 * uc[k] - kBindTol && d.x(k) - d.r_down(k) > kBindTol;
        if (reserve_free) CHECK(rep.stationarity_by_block(b) <= 1e-6);
      }
    }
  }
}

TEST_CASE("scuc with slack ramps equals independent hours") {
  const Grid g = ieee14();
  const Offers o = fourteen_bus_offers();
  const std::vector<Vector> profile(3, g.base_load);
  const RampConfig ramps{Vector::Constant(5, 1000.0), Vector::Constant(5, 1000.0)};
  const ScucResult r = clear_scuc_ramping(g, o, profile, {0.0, 0.0}, ramps);
  REQUIRE(r.hours.size() == 3);
  const DispatchResult single = clear_market(g, o, g.base_load);
  CHECK(r.objective == doctest::Approx(3.0 * single.objective).epsilon(1e-9));
  for (const auto& h : r.hours) {
    CHECK(h.lambda == doctest::Approx(single.lambda));
    CHECK((h.omega - single.omega).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(h.phi_up.cwiseAbs().maxCoeff() == 0.0);
    CHECK(h.phi_down.cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(clear_scuc_ramping(g, o, {g.base_load}, {}, ramps), InputError);
}

TEST_CASE("steep ramp-up prices the ramp limit") {
  // Cheap unit A can ramp 20 MW/h; load jumps from 40 to 90 MW so B must fill in.
  const Grid g = two_bus(1000.0);
  const Offers o = {curve(0, 100, {10}), curve(0, 100, {50})};
  Vector up(2);
  up << 20.0, 100.0;
  const RampConfig ramps{up, Vector::Constant(2, 100.0)};
  std::vector<Vector> profile = {Vector::Constant(2, 20.0), Vector::Constant(2, 45.0)};
  const ScucResult r = clear_scuc_ramping(g, o, profile, {0.0, 0.0}, ramps);
  REQUIRE(r.hours.size() == 2);
  CHECK(r.hours[0].x(0) == doctest::Approx(40.0));
  CHECK(r.hours[1].x(0) == doctest::Approx(60.0));
  CHECK(r.hours[1].phi_up(0) > 0.0);
  CHECK(r.hours[1].lambda == doctest::Approx(50.0));
  // The cheap unit's recovered price would be off by exactly its ramp term.
  CHECK(r.hours[1].omega(0) - r.hours[1].ramp_term(0) == doctest::Approx(10.0));
  const BindingStats st = binding_statistics(g, r, ramps);
  // B must already be committed in hour 1 to start producing in hour 2.
  CHECK(st.total() == 4);
  CHECK(st.only_ramp == 2);
}

TEST_CASE("infeasible horizon names the hour") {
  const Grid g = two_bus(1000.0);
  const Offers o = {curve(0, 100, {10}), curve(0, 100, {50})};
  const RampConfig ramps{Vector::Constant(2, 100.0), Vector::Constant(2, 100.0)};
  std::vector<Vector> profile = {Vector::Constant(2, 20.0), Vector::Constant(2, 120.0)};
  try {
    clear_scuc_ramping(g, o, profile, {}, ramps);
    FAIL("expected ClearingError");
  } catch (const ClearingError& e) {
    CHECK(std::string(e.what()).find("hour 2") != std::string::npos);
  }
}
