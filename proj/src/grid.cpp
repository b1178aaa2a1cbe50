#include "invlmp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>

#include "json.hpp"

namespace invlmp {

using nlohmann::json;

Matrix Grid::gen_bus_incidence() const {
  Matrix s = Matrix::Zero(n_buses, n_gens());
  for (int k = 0; k < n_gens(); ++k) s(generators[k].bus, k) = 1.0;
  return s;
}

Vector Grid::line_limits() const {
  Vector f(n_lines());
  for (int i = 0; i < n_lines(); ++i) f(i) = lines[i].limit;
  return f;
}

Vector Grid::gen_max() const {
  Vector v(n_gens());
  for (int k = 0; k < n_gens(); ++k) v(k) = generators[k].x_max;
  return v;
}

Vector Grid::gen_min() const {
  Vector v(n_gens());
  for (int k = 0; k < n_gens(); ++k) v(k) = generators[k].x_min;
  return v;
}

void Grid::validate() const {
  if (n_buses <= 0) throw InputError("n_buses: must be positive");
  if (reference_bus < 0 || reference_bus >= n_buses) throw InputError("reference_bus: out of range");
  for (const auto& l : lines) {
    if (l.from < 0 || l.from >= n_buses || l.to < 0 || l.to >= n_buses || l.from == l.to) {
      throw InputError("line_from/line_to: invalid bus pair");
    }
    if (!(l.limit > 0.0)) throw InputError("line_limit: must be positive");
    if (!(l.reactance > 0.0)) throw InputError("reactance: must be positive");
  }
  for (const auto& g : generators) {
    if (g.bus < 0 || g.bus >= n_buses) throw InputError("gen_bus: out of range");
    if (!(g.x_min <= g.x_max)) throw InputError("gen_min: exceeds gen_max");
    if (g.x_min < 0.0) throw InputError("gen_min: must be nonnegative");
  }
  if (base_load.size() != n_buses) throw InputError("base_load: length differs from n_buses");
  if (ptdf.rows() != n_lines() || ptdf.cols() != n_buses) throw InputError("ptdf: wrong dimensions");
  if (n_lines() > 0 && ptdf.col(reference_bus).cwiseAbs().maxCoeff() > 1e-12) {
    throw InputError("ptdf: reference column must be zero");
  }
}

Matrix compute_ptdf(int n_buses, const std::vector<Line>& lines, int reference_bus) {
  if (reference_bus < 0 || reference_bus >= n_buses) throw InputError("reference_bus: out of range");
  std::vector<std::vector<int>> adj(n_buses);
  for (const auto& l : lines) {
    if (!(l.reactance > 0.0)) throw InputError("reactance: must be positive");
    adj[l.from].push_back(l.to);
    adj[l.to].push_back(l.from);
  }
  std::vector<bool> seen(n_buses, false);
  std::queue<int> q;
  q.push(reference_bus);
  seen[reference_bus] = true;
  int reached = 1;
  while (!q.empty()) {
    const int b = q.front();
    q.pop();
    for (int nb : adj[b]) {
      if (!seen[nb]) {
        seen[nb] = true;
        ++reached;
        q.push(nb);
      }
    }
  }
  if (reached != n_buses) throw InputError("topology: network is disconnected");

  const int l = static_cast<int>(lines.size());
  Matrix bbus = Matrix::Zero(n_buses, n_buses);
  for (const auto& ln : lines) {
    const double y = 1.0 / ln.reactance;
    bbus(ln.from, ln.from) += y;
    bbus(ln.to, ln.to) += y;
    bbus(ln.from, ln.to) -= y;
    bbus(ln.to, ln.from) -= y;
  }
  // Reduced susceptance matrix without the reference row and column.
  std::vector<int> keep;
  for (int b = 0; b < n_buses; ++b) {
    if (b != reference_bus) keep.push_back(b);
  }
  const int r = n_buses - 1;
  Matrix bred(r, r);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) bred(i, j) = bbus(keep[i], keep[j]);
  }
  Matrix x = Matrix::Zero(n_buses, n_buses);
  if (r > 0) {
    Eigen::FullPivLU<Matrix> lu(bred);
    if (lu.rank() < r) throw InputError("topology: singular reduced susceptance matrix");
    const Matrix xr = lu.inverse();
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < r; ++j) x(keep[i], keep[j]) = xr(i, j);
    }
  }
  Matrix ptdf(l, n_buses);
  for (int i = 0; i < l; ++i) {
    const auto& ln = lines[i];
    ptdf.row(i) = (x.row(ln.from) - x.row(ln.to)) / ln.reactance;
  }
  ptdf.col(reference_bus).setZero();
  return ptdf;
}

void refresh_ptdf(Grid& grid) { grid.ptdf = compute_ptdf(grid.n_buses, grid.lines, grid.reference_bus); }

// ---------------------------------------------------------------------------
// JSON format "invlmp-grid" v1: columnar arrays, one-based bus ids,
// row-major ptdf.

namespace {

constexpr int kGridVersion = 1;

const json& field(const json& j, const char* name) {
  if (!j.contains(name)) throw InputError(std::string(name) + ": missing field");
  return j.at(name);
}

template <typename T>
std::vector<T> array_field(const json& j, const char* name, std::size_t expected) {
  const json& a = field(j, name);
  if (!a.is_array()) throw InputError(std::string(name) + ": expected an array");
  if (a.size() != expected) throw InputError(std::string(name) + ": wrong length");
  try {
    return a.get<std::vector<T>>();
  } catch (const json::exception&) {
    throw InputError(std::string(name) + ": wrong element type");
  }
}

}  // namespace

Grid grid_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("grid: malformed JSON: ") + e.what());
  }
  if (field(j, "format").get<std::string>() != "invlmp-grid") throw InputError("format: not an invlmp-grid file");
  if (field(j, "version").get<int>() != kGridVersion) throw InputError("version: unsupported");
  Grid g;
  g.name = j.value("name", "");
  g.n_buses = field(j, "n_buses").get<int>();
  const auto n_lines = field(j, "n_lines").get<std::size_t>();
  const auto n_gens = field(j, "n_gens").get<std::size_t>();
  g.reference_bus = field(j, "reference_bus").get<int>() - 1;

  const auto from = array_field<int>(j, "line_from", n_lines);
  const auto to = array_field<int>(j, "line_to", n_lines);
  const auto react = array_field<double>(j, "reactance", n_lines);
  const auto limit = array_field<double>(j, "line_limit", n_lines);
  for (std::size_t i = 0; i < n_lines; ++i) g.lines.push_back({from[i] - 1, to[i] - 1, react[i], limit[i]});

  const auto names = array_field<std::string>(j, "gen_names", n_gens);
  const auto bus = array_field<int>(j, "gen_bus", n_gens);
  const auto gmax = array_field<double>(j, "gen_max", n_gens);
  const auto gmin = array_field<double>(j, "gen_min", n_gens);
  for (std::size_t k = 0; k < n_gens; ++k) g.generators.push_back({names[k], bus[k] - 1, gmin[k], gmax[k]});

  const auto load = array_field<double>(j, "base_load", static_cast<std::size_t>(g.n_buses));
  g.base_load = Eigen::Map<const Vector>(load.data(), g.n_buses);

  if (j.contains("ptdf")) {
    const json& p = j.at("ptdf");
    if (field(p, "rows").get<std::size_t>() != n_lines ||
        field(p, "cols").get<int>() != g.n_buses) {
      throw InputError("ptdf: dimensions disagree with n_lines/n_buses");
    }
    const auto data = array_field<double>(p, "data", n_lines * static_cast<std::size_t>(g.n_buses));
    g.ptdf = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        data.data(), static_cast<Eigen::Index>(n_lines), g.n_buses);
  } else {
    refresh_ptdf(g);
  }
  g.validate();
  return g;
}

std::string grid_to_json_text(const Grid& g) {
  json j;
  j["format"] = "invlmp-grid";
  j["version"] = kGridVersion;
  j["name"] = g.name;
  j["n_buses"] = g.n_buses;
  j["n_lines"] = g.n_lines();
  j["n_gens"] = g.n_gens();
  j["reference_bus"] = g.reference_bus + 1;
  std::vector<int> from, to, bus;
  std::vector<double> react, limit, gmax, gmin;
  std::vector<std::string> names;
  for (const auto& l : g.lines) {
    from.push_back(l.from + 1);
    to.push_back(l.to + 1);
    react.push_back(l.reactance);
    limit.push_back(l.limit);
  }
  for (const auto& gen : g.generators) {
    names.push_back(gen.name);
    bus.push_back(gen.bus + 1);
    gmax.push_back(gen.x_max);
    gmin.push_back(gen.x_min);
  }
  j["line_from"] = from;
  j["line_to"] = to;
  j["reactance"] = react;
  j["line_limit"] = limit;
  j["gen_names"] = names;
  j["gen_bus"] = bus;
  j["gen_max"] = gmax;
  j["gen_min"] = gmin;
  j["base_load"] = std::vector<double>(g.base_load.data(), g.base_load.data() + g.base_load.size());
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(g.ptdf.size()));
  for (Eigen::Index r = 0; r < g.ptdf.rows(); ++r) {
    for (Eigen::Index c = 0; c < g.ptdf.cols(); ++c) data.push_back(g.ptdf(r, c));
  }
  j["ptdf"] = {{"rows", g.ptdf.rows()}, {"cols", g.ptdf.cols()}, {"data", data}};
  return j.dump(1);
}

Grid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("grid: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return grid_from_json_text(ss.str());
}

void save_grid(const Grid& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("grid: cannot write " + path.string());
  out << grid_to_json_text(grid) << '\n';
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t grid_hash(const Grid& grid) { return fnv1a64(grid_to_json_text(grid)); }

// ---------------------------------------------------------------------------

Grid ieee14() {
  Grid g;
  g.name = "ieee14";
  g.n_buses = 14;
  g.reference_bus = 0;
  // Branch reactances from the public IEEE 14-bus case; transformer taps ignored.
  // Thermal limits are not part of the public case and are chosen so that the
  // load sweep produces occasional congestion.
  struct Row {
    int f, t;
    double x, lim;
  };
  const Row rows[] = {
      {1, 2, 0.05917, 150}, {1, 5, 0.22304, 60}, {2, 3, 0.19797, 50}, {2, 4, 0.17632, 80},
      {2, 5, 0.17388, 80},  {3, 4, 0.17103, 60}, {4, 5, 0.04211, 120}, {4, 7, 0.20912, 60},
      {4, 9, 0.55618, 40},  {5, 6, 0.25202, 60}, {6, 11, 0.19890, 40}, {6, 12, 0.25581, 40},
      {6, 13, 0.13027, 32}, {7, 8, 0.17615, 100}, {7, 9, 0.11001, 75}, {9, 10, 0.08450, 40},
      {9, 14, 0.27038, 40}, {10, 11, 0.19207, 40}, {12, 13, 0.19988, 40}, {13, 14, 0.34802, 40},
  };
  for (const auto& r : rows) g.lines.push_back({r.f - 1, r.t - 1, r.x, r.lim});
  const int gen_bus[] = {1, 2, 3, 6, 8};
  for (int k = 0; k < 5; ++k) {
    g.generators.push_back({"G" + std::to_string(k + 1), gen_bus[k] - 1, 0.0, 100.0});
  }
  g.base_load = Vector::Zero(14);
  g.base_load << 0.0, 21.7, 94.2, 47.8, 7.6, 11.2, 0.0, 0.0, 29.5, 9.0, 3.5, 6.1, 13.5, 14.9;
  refresh_ptdf(g);
  return g;
}

Grid synthetic_grid(const SyntheticGridOptions& opt) {
  if (opt.min_output < 0.0 || opt.min_output >= 1.0) throw InputError("min_output: must lie in [0, 1)");
  if (opt.n_buses < 2 || opt.n_gens < 1 || opt.n_gens > opt.n_buses) {
    throw InputError("synthetic_grid: need n_buses >= 2 and 1 <= n_gens <= n_buses");
  }
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int m = opt.n_buses;
  std::vector<double> px(m), py(m);
  for (int b = 0; b < m; ++b) {
    px[b] = unit(rng);
    py[b] = unit(rng);
  }
  auto dist = [&](int a, int b) { return std::hypot(px[a] - px[b], py[a] - py[b]); };

  Grid g;
  g.name = "synthetic" + std::to_string(m);
  g.n_buses = m;
  g.reference_bus = 0;
  // Prim's tree keeps the network connected with short branches.
  std::vector<bool> in_tree(m, false);
  std::vector<double> best(m, kInf);
  std::vector<int> parent(m, -1);
  best[0] = 0.0;
  std::vector<std::pair<int, int>> edges;
  for (int it = 0; it < m; ++it) {
    int u = -1;
    for (int b = 0; b < m; ++b) {
      if (!in_tree[b] && (u < 0 || best[b] < best[u])) u = b;
    }
    in_tree[u] = true;
    if (parent[u] >= 0) edges.emplace_back(parent[u], u);
    for (int b = 0; b < m; ++b) {
      if (!in_tree[b] && dist(u, b) < best[b]) {
        best[b] = dist(u, b);
        parent[b] = u;
      }
    }
  }
  const int extra = static_cast<int>(std::lround(opt.extra_line_ratio * m));
  for (int added = 0, guard = 0; added < extra && guard < 100 * m; ++guard) {
    const int a = static_cast<int>(unit(rng) * m) % m;
    // Connect to one of the three nearest buses not already linked.
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int x, int y) { return dist(a, x) < dist(a, y); });
    for (int k = 1; k <= 3 && k < m; ++k) {
      const int b = order[k];
      const bool exists = std::any_of(edges.begin(), edges.end(), [&](auto e) {
        return (e.first == a && e.second == b) || (e.first == b && e.second == a);
      });
      if (!exists) {
        edges.emplace_back(std::min(a, b), std::max(a, b));
        ++added;
        break;
      }
    }
  }
  for (auto [a, b] : edges) g.lines.push_back({a, b, 0.02 + 0.5 * dist(a, b) + 0.03 * unit(rng), 1.0});

  // Generators on distinct buses; loads on the rest with random weights.
  std::vector<int> buses(m);
  std::iota(buses.begin(), buses.end(), 0);
  std::shuffle(buses.begin(), buses.end(), rng);
  double capacity = 0.0;
  for (int k = 0; k < opt.n_gens; ++k) {
    const double cap = std::round(50.0 + 250.0 * unit(rng));
    g.generators.push_back({"G" + std::to_string(k + 1), buses[k], std::round(opt.min_output * cap), cap});
    capacity += cap;
  }
  g.base_load = Vector::Zero(m);
  for (int b = 0; b < m; ++b) g.base_load(b) = 0.2 + unit(rng);
  g.base_load *= 0.6 * capacity / g.base_load.sum();
  refresh_ptdf(g);

  // Limits from a proportional dispatch at nominal load: tight branches get
  // little headroom so congestion appears under load variation.
  Vector inj = -g.base_load;
  for (const auto& gen : g.generators) inj(gen.bus) += gen.x_max * g.base_load.sum() / capacity;
  const Vector flow = g.ptdf * inj;
  const double mean_flow = flow.cwiseAbs().mean();
  for (int i = 0; i < g.n_lines(); ++i) {
    g.lines[i].limit = std::round(std::max({1.25 * std::abs(flow(i)), 0.6 * mean_flow, 10.0}));
  }
  return g;
}

}  // namespace invlmp
