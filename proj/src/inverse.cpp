#include "invlmp/inverse.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace invlmp {

BlockLayout layout_of(const BlockEdges& edges) {
  std::vector<int> per_gen;
  for (const auto& e : edges) per_gen.push_back(static_cast<int>(e.size()) - 1);
  return BlockLayout(per_gen);
}

RecoverySample recover_sample(const MarketObservation& obs, const Grid& grid, const BlockEdges& edges,
                              const std::vector<bool>& free_mask) {
  const BlockLayout layout = layout_of(edges);
  if (obs.omega.size() != grid.n_buses) throw InputError("recover_sample: omega has the wrong length");
  if (static_cast<int>(free_mask.size()) != layout.total()) {
    throw InputError("recover_sample: free_mask has the wrong length");
  }
  if (layout.n_gens() != grid.n_gens()) throw InputError("recover_sample: generator count mismatch");
  const Matrix s = block_bus_incidence(grid, layout);
  const double column_gap = (Vector::Ones(s.cols()) - s.transpose() * Vector::Ones(s.rows())).cwiseAbs().maxCoeff();
  if (column_gap != 0.0) throw std::logic_error("recover_sample: incidence column does not sum to one");

  RecoverySample out;
  out.observation_id = obs.id;
  out.free_mask = free_mask;
  out.c0 = reconstruct_prices(obs.lambda, obs.omega, s);
  std::vector<int> free_at_bus(grid.n_buses, 0);
  for (int b = 0; b < layout.total(); ++b) {
    if (free_mask[b]) {
      ++free_at_bus[grid.generators[layout.gen_of[b]].bus];
    } else {
      out.c0(b) = 0.0;
    }
  }
  out.tied.resize(layout.total());
  for (int b = 0; b < layout.total(); ++b) {
    out.tied[b] = free_mask[b] && free_at_bus[grid.generators[layout.gen_of[b]].bus] > 1;
  }
  return out;
}

std::vector<RecoverySample> recover_samples(const std::vector<MarketObservation>& obs, const Grid& grid,
                                            const BlockEdges& edges, double tol) {
  std::vector<RecoverySample> out;
  out.reserve(obs.size());
  for (const auto& o : obs) out.push_back(recover_sample(o, grid, edges, identify_free_generators(o, grid, edges, tol)));
  return out;
}

std::vector<long> TrainingSet::counts() const {
  std::vector<long> c;
  for (const auto& v : values) c.push_back(static_cast<long>(v.size()));
  return c;
}

int TrainingSet::n_active() const {
  return static_cast<int>(std::count_if(values.begin(), values.end(), [](const auto& v) { return !v.empty(); }));
}

TrainingSet assemble_training_set(const std::vector<RecoverySample>& samples, int n_blocks) {
  TrainingSet t;
  t.values.resize(n_blocks);
  t.ids.resize(n_blocks);
  for (const auto& s : samples) {
    if (static_cast<int>(s.free_mask.size()) != n_blocks) throw InputError("training set: sample has the wrong length");
    for (int k = 0; k < n_blocks; ++k) {
      if (!s.free_mask[k]) continue;
      t.values[k].push_back(s.c0(k));
      t.ids[k].push_back(s.observation_id);
    }
  }
  return t;
}

double training_loss(const TrainingSet& training, const Vector& c, double p) {
  double l = 0.0;
  for (int k = 0; k < training.n_blocks(); ++k) l += block_loss(training.samples(k), c(k), p);
  return l;
}

void GdConfig::validate() const {
  if (!(p >= 1.0)) throw InputError("p: must be at least 1");
  if (iterations < 1) throw InputError("iterations: must be at least 1");
  if (!auto_eta && !(eta > 0.0)) throw InputError("eta: must be positive");
  if (c_bar < 0.0) throw InputError("c_bar: must be nonnegative");
  if (trajectory_stride < 1) throw InputError("trajectory_stride: must be at least 1");
  if (bounds) {
    if (!(bounds->first > 0.0)) throw InputError("bounds: lower bound must be positive");
    if (!(bounds->first < bounds->second)) throw InputError("bounds: lower bound must be below upper bound");
  } else if (init.size() == 0) {
    throw InputError("init: required when no bounds are given");
  }
}

namespace {

double fast_gradient(const std::vector<double>& s, double c, double p) {
  double g = 0.0;
  if (p == 1.0) {
    for (double v : s) g += (c > v) - (c < v);
  } else if (p == 2.0) {
    for (double v : s) g += 2.0 * (c - v);
  } else {
    for (double v : s) {
      const double r = c - v;
      if (r != 0.0) g += p * std::pow(std::abs(r), p - 1.0) * (r > 0 ? 1.0 : -1.0);
    }
  }
  return g / static_cast<double>(s.size());
}

}  // namespace

GdResult gd_recover(const TrainingSet& training, const GdConfig& cfg) {
  cfg.validate();
  const int n = training.n_blocks();
  Vector c = cfg.init.size() ? cfg.init : Vector::Constant(n, 0.5 * (cfg.bounds->first + cfg.bounds->second));
  if (c.size() != n) throw InputError("init: length must equal the number of blocks");
  if (cfg.bounds) c = c.cwiseMax(cfg.bounds->first).cwiseMin(cfg.bounds->second);

  GdResult r;
  r.c_bar = cfg.c_bar;
  if (r.c_bar == 0.0) {
    r.c_bar = c.cwiseAbs().maxCoeff();
    for (const auto& v : training.values) {
      for (double x : v) r.c_bar = std::max(r.c_bar, std::abs(x));
    }
    if (cfg.bounds) r.c_bar = std::max(r.c_bar, std::abs(cfg.bounds->second));
  }
  const double sqrt_t = std::sqrt(static_cast<double>(cfg.iterations));
  r.eta = cfg.auto_eta ? std::pow(r.c_bar, 2.0 - cfg.p) / (cfg.p * sqrt_t) : cfg.eta;

  Vector sum = Vector::Zero(n);
  for (long j = 0; j < cfg.iterations; ++j) {
    if (j % cfg.trajectory_stride == 0) {
      r.trajectory_iterations.push_back(j);
      r.trajectory.push_back(c);
    }
    sum += c;
    for (int k = 0; k < n; ++k) {
      if (training.values[k].empty()) continue;
      c(k) -= r.eta * fast_gradient(training.values[k], c(k), cfg.p);
      if (cfg.bounds) c(k) = std::clamp(c(k), cfg.bounds->first, cfg.bounds->second);
    }
  }
  r.trajectory_iterations.push_back(cfg.iterations);
  r.trajectory.push_back(c);
  r.c_hat = c;
  r.c_avg = sum / static_cast<double>(cfg.iterations);
  r.final_loss = training_loss(training, r.c_hat, cfg.p);
  r.average_loss = training_loss(training, r.c_avg, cfg.p);
  r.bound_active = error_bound(training.n_active(), cfg.p, r.c_bar, cfg.iterations);
  r.bound_all = error_bound(n, cfg.p, r.c_bar, cfg.iterations);
  return r;
}

Vector closed_form_l2(const TrainingSet& training) {
  Vector c(training.n_blocks());
  for (int k = 0; k < training.n_blocks(); ++k) {
    c(k) = training.values[k].empty() ? std::numeric_limits<double>::quiet_NaN() : training.samples(k).mean();
  }
  return c;
}

std::vector<std::pair<double, double>> median_intervals(const TrainingSet& training) {
  std::vector<std::pair<double, double>> out;
  for (auto v : training.values) {
    if (v.empty()) {
      out.emplace_back(std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    std::sort(v.begin(), v.end());
    out.emplace_back(v[(v.size() - 1) / 2], v[v.size() / 2]);
  }
  return out;
}

double error_bound(int n_blocks, double p, double c_bar, long iterations) {
  if (iterations < 1) throw InputError("iterations: must be at least 1");
  return n_blocks * p * std::pow(c_bar, p) / std::sqrt(static_cast<double>(iterations));
}

RecoveryAccounting recovery_accounting(const TrainingSet& training, const BlockLayout& layout) {
  if (training.n_blocks() != layout.total()) throw InputError("recovery_accounting: layout mismatch");
  RecoveryAccounting a;
  a.total = layout.total();
  for (int g = 0; g < layout.n_gens(); ++g) {
    bool any = false;
    for (int b = layout.offset[g]; b < layout.offset[g + 1]; ++b) any = any || training.count(b) > 0;
    for (int b = layout.offset[g]; b < layout.offset[g + 1]; ++b) {
      if (training.count(b) > 0) {
        ++a.recovered;
      } else if (any) {
        ++a.non_free;
      } else {
        ++a.never_marginal;
      }
    }
  }
  return a;
}

namespace {

void check_forward(const Matrix& a, const Vector& b, const Vector& x0) {
  if (a.rows() != b.size() || a.cols() != x0.size()) throw InputError("inverse LP: dimension mismatch");
  const Vector slack = a * x0 - b;
  if (slack.size() && slack.minCoeff() < -1e-7 * std::max(1.0, b.cwiseAbs().maxCoeff())) {
    throw InputError("inverse LP: observed x0 violates A x >= b");
  }
}

}  // namespace

GioPdResult gio_pd_solve(const Matrix& a, const Vector& b, const Vector& x0, const LpOptions& options) {
  check_forward(a, b, x0);
  const Eigen::Index n = a.cols(), m = a.rows();
  GioPdResult best;
  best.eps_norm = kInf;
  for (Eigen::Index j = 0; j < n; ++j) {
    // Scale so that w_j = max_i w_i = 1; then the minimum l1 perturbation
    // closing the gap w'x0 - b'xi equals the gap itself.
    LpProblem lp = LpProblem::with_vars(n + m);
    lp.cost << x0, -b;
    lp.var_upper.head(n).setOnes();
    lp.var_lower(j) = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector row = Vector::Zero(n + m);
      row(i) = -1.0;
      row.tail(m) = a.col(i);
      lp.add_row(row, Sense::kEqual, 0.0);
    }
    const LpSolution sol = solve_lp(lp, options);
    if (!sol.optimal()) continue;
    const double gap = std::max(0.0, sol.objective);
    if (gap < best.eps_norm) {
      best.status = LpStatus::kOptimal;
      best.eps_norm = gap;
      const double scale = sol.primal.head(n).sum();
      best.w = sol.primal.head(n) / scale;
      best.xi = sol.primal.tail(m) / scale;
      best.eps = Vector::Zero(n);
      best.eps(j) = -gap;
    }
  }
  if (best.status != LpStatus::kOptimal) best.eps_norm = 0.0;
  return best;
}

GioKktResult gio_kkt_solve(const Matrix& a, const Vector& b, const Vector& x0, const LpOptions& options) {
  check_forward(a, b, x0);
  const Eigen::Index n = a.cols(), m = a.rows();
  const Vector slack = (a * x0 - b).cwiseMax(0.0);
  // Variables: w, xi, eps_stat+ , eps_stat-.
  LpProblem lp = LpProblem::with_vars(m + 3 * n);
  lp.cost << Vector::Zero(n), slack, Vector::Ones(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector row = Vector::Zero(m + 3 * n);
    row(i) = 1.0;
    row.segment(n, m) = -a.col(i);
    row(n + m + i) = -1.0;
    row(2 * n + m + i) = 1.0;
    lp.add_row(row, Sense::kEqual, 0.0);
  }
  Vector norm = Vector::Zero(m + 3 * n);
  norm.head(n).setOnes();
  lp.add_row(norm, Sense::kEqual, 1.0);

  const LpSolution sol = solve_lp(lp, options);
  GioKktResult r;
  r.status = sol.status;
  if (!sol.optimal()) return r;
  r.w = sol.primal.head(n);
  r.xi = sol.primal.segment(n, m);
  r.eps_stat = sol.primal.segment(n + m, n) - sol.primal.segment(2 * n + m, n);
  r.eps_comp = -(r.xi.array() * slack.array()).matrix();
  r.objective = r.eps_stat.lpNorm<1>() + r.eps_comp.lpNorm<1>();
  return r;
}

bool io_pd_feasible(const Matrix& a, const Vector& b, const Vector& x0, double tol) {
  if ((a * x0 - b).minCoeff() < -tol) return false;
  const GioPdResult r = gio_pd_solve(a, b, x0);
  return r.status == LpStatus::kOptimal && r.eps_norm <= tol;
}

bool io_kkt_feasible(const Matrix& a, const Vector& b, const Vector& x0, double tol) {
  if ((a * x0 - b).minCoeff() < -tol) return false;
  const GioKktResult r = gio_kkt_solve(a, b, x0);
  return r.status == LpStatus::kOptimal && r.objective <= tol;
}

}  // namespace invlmp
