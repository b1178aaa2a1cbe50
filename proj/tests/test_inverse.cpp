#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "invlmp/inverse.hpp"
#include "invlmp/scenario.hpp"
#include "oracles.hpp"

using namespace invlmp;

namespace {

TrainingSet one_block(std::vector<double> values) {
  TrainingSet t;
  t.values = {values};
  t.ids = {std::vector<long>(values.size(), 0)};
  return t;
}

TrainingSet random_training(std::mt19937_64& rng, int blocks) {
  std::uniform_int_distribution<int> count(1, 40);
  std::uniform_real_distribution<double> centre(5.0, 90.0), spread(0.1, 8.0), unit(0.0, 1.0);
  TrainingSet t;
  for (int k = 0; k < blocks; ++k) {
    const double c = centre(rng), s = spread(rng);
    std::vector<double> v;
    for (int i = count(rng); i > 0; --i) v.push_back(std::max(0.5, c + s * (2.0 * unit(rng) - 1.0)));
    t.values.push_back(v);
    t.ids.emplace_back(v.size(), 0);
  }
  return t;
}

struct Fixture {
  Grid grid = ieee14();
  Offers base = ieee14_baseline(100.0);
  Dataset data;
  Fixture(long n, std::uint64_t seed, bool all_marginal = false) {
    DatasetConfig cfg;
    cfg.n_scenarios = n;
    cfg.seed = seed;
    cfg.require_all_marginal = all_marginal;
    data = generate_dataset(grid, base, cfg);
  }
};

}  // namespace

TEST_CASE("uncongested observation reconstructs lambda at every free block") {
  const Grid g = ieee14();
  const Offers o = ieee14_baseline(100.0);
  const DispatchResult d = clear_market(g, o, g.base_load * 0.8);
  REQUIRE(d.mu.cwiseMax(d.nu).maxCoeff() == 0.0);
  const MarketObservation obs = observe(g, d, 0);
  const BlockEdges edges = block_edges(o);
  const auto mask = identify_free_generators(obs, g, edges);
  const RecoverySample s = recover_sample(obs, g, edges, mask);
  REQUIRE(std::count(mask.begin(), mask.end(), true) >= 1);
  for (int b = 0; b < 25; ++b) {
    if (mask[b]) {
      CHECK(s.c0(b) == doctest::Approx(d.lambda).epsilon(1e-12));
    } else {
      CHECK(s.c0(b) == 0.0);
    }
  }
}

TEST_CASE("noise-free congested data is reconstructed exactly") {
  Fixture f(300, 5);
  const auto samples = recover_samples(f.data.observations, f.grid, f.data.edges);
  long free = 0, congested_free = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const bool congested = std::any_of(f.data.observations[i].line_binding.begin(),
                                       f.data.observations[i].line_binding.end(), [](bool b) { return b; });
    for (int b = 0; b < 25; ++b) {
      if (!samples[i].free_mask[b]) continue;
      ++free;
      congested_free += congested;
      worst = std::max(worst, std::abs(samples[i].c0(b) - f.data.truth[i](b)) / f.data.truth[i](b));
    }
  }
  CHECK(free > 100);
  CHECK(congested_free > 0);
  CHECK(worst <= 1e-6);
}

TEST_CASE("reconstruction is affine in the published LMPs and ignores x") {
  Fixture f(60, 8);
  const auto& obs = f.data.observations;
  NoiseSpec spec{NoiseSpec::Mode::kLmpError, 50.0, 5.0, 0.3, 4};
  std::vector<CorruptedEntry> log;
  const auto noisy = inject_lmp_noise(obs, f.grid, spec, &log);
  REQUIRE(!log.empty());
  const BlockLayout layout = layout_of(f.data.edges);
  long checked = 0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto mask = identify_free_generators(obs[i], f.grid, f.data.edges);
    const RecoverySample clean = recover_sample(obs[i], f.grid, f.data.edges, mask);
    const RecoverySample dirty = recover_sample(noisy[i], f.grid, f.data.edges, mask);
    for (int b = 0; b < layout.total(); ++b) {
      if (!mask[b]) continue;
      const int bus = f.grid.generators[layout.gen_of[b]].bus;
      double injected = 0.0;
      for (const auto& e : log) {
        if (e.observation == obs[i].id && e.bus == bus) injected = e.delta;
      }
      CHECK(dirty.c0(b) - clean.c0(b) == doctest::Approx(injected).epsilon(1e-9));
      checked += injected != 0.0;
    }

    MarketObservation moved = obs[i];
    moved.x.array() += 3.7;
    CHECK(recover_sample(moved, f.grid, f.data.edges, mask).c0 == clean.c0);
  }
  CHECK(checked > 0);

  MarketObservation bad = obs[0];
  bad.omega.conservativeResize(3);
  CHECK_THROWS_AS(recover_sample(bad, f.grid, f.data.edges, std::vector<bool>(25)), InputError);
  CHECK_THROWS_AS(recover_sample(obs[0], f.grid, f.data.edges, std::vector<bool>(24)), InputError);
}

TEST_CASE("tied free blocks at one bus are flagged") {
  Grid g = ieee14();
  g.generators[1].bus = g.generators[0].bus;
  g.validate();
  MarketObservation o;
  o.u = {1, 1, 1, 1, 1};
  o.x = Vector::Constant(5, 30.0);
  o.omega = Vector::Constant(14, 20.0);
  o.lambda = 20.0;
  const BlockEdges edges = block_edges(ieee14_baseline(100.0));
  const RecoverySample s = recover_sample(o, g, edges, identify_free_generators(o, g, edges));
  CHECK(s.tied[1]);
  CHECK(s.tied[6]);
  CHECK_FALSE(s.tied[11]);
}

TEST_CASE("training set assembly") {
  Fixture f(200, 3);
  auto samples = recover_samples(f.data.observations, f.grid, f.data.edges);
  const TrainingSet t = assemble_training_set(samples, 25);
  for (int k = 0; k < 25; ++k) {
    CHECK(t.count(k) >= 1);
    CHECK(t.count(k) == f.data.marginal_counts[k]);
    for (double v : t.values[k]) CHECK(v != 0.0);
  }
  std::mt19937_64 rng(2);
  std::shuffle(samples.begin(), samples.end(), rng);
  CHECK(assemble_training_set(samples, 25).counts() == t.counts());

  RecoverySample none;
  none.c0 = Vector::Zero(25);
  none.free_mask.assign(25, false);
  const TrainingSet empty = assemble_training_set({none, none}, 25);
  CHECK(empty.n_active() == 0);
  const RecoveryAccounting acc = recovery_accounting(empty, layout_of(f.data.edges));
  CHECK(acc.never_marginal == 25);
  CHECK(acc.consistent());
}

TEST_CASE("recovery accounting partitions the blocks") {
  TrainingSet t;
  t.values = {{1.0}, {}, {}, {}, {2.0}, {3.0}};
  t.ids.resize(6);
  const RecoveryAccounting a = recovery_accounting(t, BlockLayout(std::vector<int>{2, 2, 2}));
  CHECK(a.recovered == 3);
  CHECK(a.non_free == 1);
  CHECK(a.never_marginal == 2);
  CHECK(a.consistent());
  CHECK(a.rate() == doctest::Approx(0.5));
}

TEST_CASE("closed-form l2 and gradient descent agree") {
  CHECK(closed_form_l2(one_block({7.5}))(0) == 7.5);
  CHECK(closed_form_l2(one_block({10.0, 20.0}))(0) == doctest::Approx(15.0));

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const TrainingSet t = random_training(rng, 6);
    GdConfig cfg;
    cfg.p = 2.0;
    cfg.eta = 0.2;
    cfg.iterations = 400;
    cfg.init = Vector::Constant(6, 1.0);
    const GdResult r = gd_recover(t, cfg);
    CHECK((r.c_hat - closed_form_l2(t)).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(r.trajectory.size() == 401);
  }
}

TEST_CASE("l1 recovery lands in the median interval") {
  const TrainingSet t = one_block({24, 25, 26, 27, 100});
  GdConfig cfg;
  cfg.p = 1.0;
  cfg.eta = 0.01;
  cfg.iterations = 5000;
  cfg.init = Vector::Constant(1, 10.0);
  const GdResult r = gd_recover(t, cfg);
  const auto [c_star, l_star] = oracle::loss_minimizer(t.values[0], 1.0);
  CHECK(c_star == doctest::Approx(26.0).epsilon(1e-6));
  CHECK(std::abs(r.c_hat(0) - 26.0) <= cfg.eta);
  CHECK(r.final_loss - l_star <= 2.0 * cfg.eta);
  const auto med = median_intervals(t);
  CHECK(med[0].first == 26.0);
  CHECK(med[0].second == 26.0);
  CHECK(median_intervals(one_block({1, 2, 3, 4}))[0] == std::pair<double, double>{2.0, 3.0});
  CHECK(closed_form_l2(t)(0) == doctest::Approx(40.4));
}

TEST_CASE("gradient descent configuration") {
  const TrainingSet t = one_block({5.0, 6.0});
  GdConfig cfg;
  cfg.init = Vector::Constant(1, 1.0);
  cfg.p = 0.5;
  CHECK_THROWS_AS(gd_recover(t, cfg), InputError);
  cfg.p = 1.0;
  cfg.iterations = 0;
  CHECK_THROWS_AS(gd_recover(t, cfg), InputError);
  cfg.iterations = 10;
  cfg.init = Vector();
  CHECK_THROWS_AS(gd_recover(t, cfg), InputError);
  cfg.bounds = std::pair{0.0, 10.0};
  CHECK_THROWS_AS(gd_recover(t, cfg), InputError);

  TrainingSet two;
  two.values = {{50.0, 52.0}, {}};
  two.ids.resize(2);
  GdConfig proj;
  proj.p = 2.0;
  proj.eta = 0.25;
  proj.iterations = 200;
  proj.bounds = std::pair{1.0, 40.0};
  const GdResult r = gd_recover(two, proj);
  CHECK(r.c_hat(0) == 40.0);
  CHECK(r.c_hat(1) == 20.5);
  for (const auto& c : r.trajectory) CHECK((c.array() >= 1.0 && c.array() <= 40.0).all());

  GdConfig stride = proj;
  stride.trajectory_stride = 64;
  const GdResult s = gd_recover(two, stride);
  CHECK(s.trajectory_iterations == std::vector<long>{0, 64, 128, 192, 200});
  CHECK(s.c_hat == r.c_hat);
}

TEST_CASE("error bound") {
  CHECK(error_bound(1, 1.0, 1.0, 1) == 1.0);
  CHECK(error_bound(7, 1.0, 30.0, 100) == doctest::Approx(7 * 30.0 / 10.0));
  CHECK(error_bound(3, 2.0, 5.0, 400) == doctest::Approx(2.0 * error_bound(3, 2.0, 5.0, 1600)));
  CHECK(error_bound(4, 2.0, 10.0, 100) == doctest::Approx(4 * 2 * 100.0 / 10.0));
}

TEST_CASE("sublinear bound holds with the automatic learning rate") {
  std::mt19937_64 rng(21);
  int violations = 0, runs = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const TrainingSet t = random_training(rng, 4);
    double l_star[2] = {0.0, 0.0};
    for (int pi = 0; pi < 2; ++pi) {
      for (int k = 0; k < t.n_blocks(); ++k) l_star[pi] += oracle::loss_minimizer(t.values[k], pi + 1.0).second;
    }
    for (double p : {1.0, 2.0}) {
      for (long T : {100L, 1000L}) {
        GdConfig cfg;
        cfg.p = p;
        cfg.iterations = T;
        cfg.auto_eta = true;
        cfg.init = Vector::Constant(4, 1.0);
        cfg.trajectory_stride = T;
        const GdResult r = gd_recover(t, cfg);
        ++runs;
        violations += r.average_loss - l_star[static_cast<int>(p) - 1] > r.bound_active;
        CHECK(r.bound_active <= r.bound_all);
      }
    }
  }
  CHECK(runs == 40);
  CHECK(violations == 0);
}

TEST_CASE("lipschitz and strict convexity of the p-th power norm") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double p : {1.0, 1.5, 2.0, 3.0}) {
    for (int n : {1, 3, 8}) {
      const double c_bar = 20.0;
      const double rho = p * std::pow(c_bar, p - 1.0) * std::pow(n, (p - 1.0) / p);
      for (int trial = 0; trial < 200; ++trial) {
        const Vector a = c_bar * Vector::NullaryExpr(n, [&] { return u(rng); });
        const Vector b = c_bar * Vector::NullaryExpr(n, [&] { return u(rng); });
        const double diff = std::abs(pnorm_pow(a, p) - pnorm_pow(b, p));
        const double dist = std::pow(pnorm_pow(Vector(a - b), p), 1.0 / p);
        CHECK(diff <= rho * dist * (1.0 + 1e-12));
        if (p > 1.0) {
          const double gap = 0.5 * (pnorm_pow(a, p) + pnorm_pow(b, p)) - pnorm_pow(Vector(0.5 * (a + b)), p);
          CHECK(gap > 0.0);
        }
      }
    }
  }
}

TEST_CASE("blocks without data keep their initial value") {
  TrainingSet t;
  t.values = {{3.0, 4.0}, {}};
  t.ids.resize(2);
  GdConfig cfg;
  cfg.p = 1.0;
  cfg.iterations = 100;
  cfg.init = Vector::Constant(2, 30.0);
  const GdResult r = gd_recover(t, cfg);
  CHECK(r.c_hat(1) == 30.0);
  CHECK(r.bound_active == doctest::Approx(0.5 * r.bound_all));
}

TEST_CASE("generalised inverse optimisation on a two-variable program") {
  // min w'x  s.t.  x1 + x2 >= 1, x >= 0.
  Matrix a(3, 2);
  a << 1, 1, 1, 0, 0, 1;
  const Vector b = Vector::Unit(3, 0);

  const Vector edge_point = Vector::Constant(2, 0.5);
  const GioPdResult pd = gio_pd_solve(a, b, edge_point);
  REQUIRE(pd.status == LpStatus::kOptimal);
  CHECK(pd.eps_norm == doctest::Approx(0.0).scale(1.0));
  CHECK(pd.w(0) == doctest::Approx(0.5));
  CHECK(pd.w(1) == doctest::Approx(0.5));
  const GioKktResult kkt = gio_kkt_solve(a, b, edge_point);
  REQUIRE(kkt.status == LpStatus::kOptimal);
  CHECK(kkt.objective == doctest::Approx(0.0).scale(1.0));
  CHECK(kkt.w(0) == doctest::Approx(0.5));

  const Vector interior = Vector::Constant(2, 2.0);
  const GioPdResult pd_in = gio_pd_solve(a, b, interior);
  // The nearest face in l1 distance is x1 >= 0 (or x2 >= 0), two units away;
  // reaching x1 + x2 = 1 would take three.
  CHECK(pd_in.eps_norm == doctest::Approx(2.0));
  CHECK(pd_in.eps.lpNorm<1>() == doctest::Approx(2.0));
  CHECK((a * (interior + pd_in.eps) - b).minCoeff() >= -1e-9);
  CHECK(pd_in.w.dot(interior + pd_in.eps) == doctest::Approx(b.dot(pd_in.xi)).scale(1.0));
  const GioKktResult kkt_in = gio_kkt_solve(a, b, interior);
  CHECK(kkt_in.objective > 0.0);
  CHECK(kkt_in.eps_comp.lpNorm<1>() + kkt_in.eps_stat.lpNorm<1>() == doctest::Approx(kkt_in.objective));

  CHECK_THROWS_AS(gio_pd_solve(a, b, Vector::Constant(2, 0.1)), InputError);
  CHECK_FALSE(io_pd_feasible(a, b, Vector::Constant(2, 0.1)));
}

TEST_CASE("exact inverse feasibility: primal-dual and KKT forms agree") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int agree = 0, optimal_feasible = 0, total = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 3, m = 4;
    Matrix a(m + 2 * n, n);
    Vector b(m + 2 * n);
    for (int i = 0; i < m; ++i) {
      a.row(i) = Vector::NullaryExpr(n, [&] { return u(rng); }).transpose();
      b(i) = 1.0 + u(rng);
    }
    a.middleRows(m, n) = Matrix::Identity(n, n);
    b.segment(m, n).setZero();
    a.bottomRows(n) = -Matrix::Identity(n, n);
    b.tail(n).setConstant(-10.0);

    LpProblem fo = LpProblem::with_vars(n);
    fo.cost = Vector::NullaryExpr(n, [&] { return 0.1 + u(rng); });
    fo.var_upper.setConstant(10.0);
    for (int i = 0; i < m; ++i) fo.add_row(a.row(i).transpose(), Sense::kGreaterEqual, b(i));
    const LpSolution sol = solve_lp(fo);
    REQUIRE(sol.optimal());

    const Vector shifted = sol.primal + Vector::NullaryExpr(n, [&] { return u(rng); });
    for (int which = 0; which < 2; ++which) {
      const Vector& x0 = which == 0 ? sol.primal : shifted;
      const bool pd = io_pd_feasible(a, b, x0, 1e-6);
      const bool kkt = io_kkt_feasible(a, b, x0, 1e-6);
      agree += pd == kkt;
      ++total;
      if (which == 0) optimal_feasible += pd;
    }
  }
  CHECK(agree == total);
  CHECK(optimal_feasible == 30);
}
