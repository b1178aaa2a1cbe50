#include "invlmp/observation.hpp"

#include <fstream>

#include "json.hpp"

namespace invlmp {

using nlohmann::json;

BlockEdges block_edges(const Offers& offers) {
  BlockEdges e;
  for (const auto& c : offers) e.push_back(c.edges);
  return e;
}

MarketObservation observe(const Grid& grid, const DispatchResult& d, long id, int hour) {
  MarketObservation o;
  o.id = id;
  o.hour = hour;
  o.u = d.u;
  o.x = d.x;
  o.lambda = d.lambda;
  o.omega = d.omega;
  o.e = d.load;
  for (int k = 0; k < grid.n_gens(); ++k) {
    const auto& g = grid.generators[k];
    const double up = d.r_up.size() ? d.r_up(k) : 0.0;
    const double dn = d.r_down.size() ? d.r_down(k) : 0.0;
    o.gen_at_max.push_back(d.x(k) + up >= d.u[k] * g.x_max - kBindTol);
    o.gen_at_min.push_back(d.x(k) - dn <= d.u[k] * g.x_min + kBindTol);
  }
  for (int i = 0; i < grid.n_lines(); ++i) {
    o.line_binding.push_back(std::abs(d.flow(i)) >= grid.lines[i].limit - kBindTol);
  }
  o.r_up = d.r_up;
  o.r_down = d.r_down;
  return o;
}

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_vec(const json& j, const char* name) {
  if (!j.contains(name) || !j.at(name).is_array()) throw InputError(std::string("observation: missing ") + name);
  const auto v = j.at(name).get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<bool> to_mask(const json& j, const char* name) {
  std::vector<bool> out;
  for (const auto& b : j.at(name)) out.push_back(b.get<int>() != 0);
  return out;
}

std::vector<int> from_mask(const std::vector<bool>& m) { return {m.begin(), m.end()}; }

}  // namespace

std::string to_json_line(const MarketObservation& o) {
  json j;
  j["id"] = o.id;
  j["hour"] = o.hour;
  j["u"] = o.u;
  j["x"] = to_std(o.x);
  j["lambda"] = o.lambda;
  j["omega"] = to_std(o.omega);
  j["e"] = to_std(o.e);
  j["binding"] = {{"gen_max", from_mask(o.gen_at_max)},
                  {"gen_min", from_mask(o.gen_at_min)},
                  {"line", from_mask(o.line_binding)}};
  if (o.r_up.size()) {
    j["r_up"] = to_std(o.r_up);
    j["r_down"] = to_std(o.r_down);
  }
  return j.dump();
}

MarketObservation observation_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("observation: malformed JSON: ") + e.what());
  }
  MarketObservation o;
  try {
    o.id = j.at("id").get<long>();
    o.hour = j.value("hour", 0);
    o.u = j.at("u").get<std::vector<int>>();
    o.x = to_vec(j, "x");
    o.lambda = j.at("lambda").get<double>();
    o.omega = to_vec(j, "omega");
    o.e = to_vec(j, "e");
    const json& b = j.at("binding");
    o.gen_at_max = to_mask(b, "gen_max");
    o.gen_at_min = to_mask(b, "gen_min");
    o.line_binding = to_mask(b, "line");
    if (j.contains("r_up")) {
      o.r_up = to_vec(j, "r_up");
      o.r_down = to_vec(j, "r_down");
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("observation: ") + e.what());
  }
  if (o.x.size() != static_cast<Eigen::Index>(o.u.size())) throw InputError("observation: x and u lengths differ");
  return o;
}

void write_observations(const std::vector<MarketObservation>& obs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& o : obs) out << to_json_line(o) << '\n';
}

std::vector<MarketObservation> read_observations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<MarketObservation> obs;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) obs.push_back(observation_from_json(line));
  }
  return obs;
}

std::vector<bool> identify_free_generators(const MarketObservation& obs, const Grid& grid, const BlockEdges& edges,
                                           double tol) {
  if (static_cast<int>(edges.size()) != grid.n_gens() || static_cast<int>(obs.u.size()) != grid.n_gens()) {
    throw InputError("identify_free_generators: generator count mismatch");
  }
  const bool reserves = obs.r_up.size() > 0;
  std::vector<bool> mask;
  for (int k = 0; k < grid.n_gens(); ++k) {
    const auto& g = grid.generators[k];
    const double x = obs.x(k);
    bool gen_ok = obs.u[k] == 1;
    if (reserves) gen_ok = gen_ok && x + obs.r_up(k) < g.x_max - tol && x - obs.r_down(k) > g.x_min + tol;
    for (Eigen::Index j = 0; j + 1 < edges[k].size(); ++j) {
      mask.push_back(gen_ok && x > edges[k](j) + tol && x < edges[k](j + 1) - tol);
    }
  }
  return mask;
}

}  // namespace invlmp
