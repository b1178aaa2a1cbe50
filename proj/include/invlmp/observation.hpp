#ifndef INVLMP_OBSERVATION_HPP_
#define INVLMP_OBSERVATION_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "invlmp/grid.hpp"
#include "invlmp/market.hpp"

namespace invlmp {

/// What the market operator publishes for one clearing. No offer prices.
struct MarketObservation {
  long id = 0;
  int hour = 0;
  std::vector<int> u;
  Vector x;
  double lambda = 0.0;
  Vector omega;
  Vector e;
  std::vector<bool> gen_at_max;
  std::vector<bool> gen_at_min;
  std::vector<bool> line_binding;
  /// Published reserve awards; empty when the clearing had no reserves.
  Vector r_up, r_down;
};

/// Per-generator block edges (MW), as published in the offer rules.
using BlockEdges = std::vector<Vector>;

BlockEdges block_edges(const Offers& offers);

MarketObservation observe(const Grid& grid, const DispatchResult& dispatch, long id, int hour = 0);

std::string to_json_line(const MarketObservation& obs);
MarketObservation observation_from_json(const std::string& line);

void write_observations(const std::vector<MarketObservation>& obs, const std::filesystem::path& path);
std::vector<MarketObservation> read_observations(const std::filesystem::path& path);

/// Block j of generator k is free when the unit is committed and its output
/// lies strictly inside the block (by more than `tol`). When reserve awards
/// are published the generator-level limits x + r_up <= x_max and
/// x - r_down >= x_min must also be slack. Flat BlockLayout order.
std::vector<bool> identify_free_generators(const MarketObservation& obs, const Grid& grid, const BlockEdges& edges,
                                           double tol = kBindTol);

}  // namespace invlmp

#endif  // INVLMP_OBSERVATION_HPP_
