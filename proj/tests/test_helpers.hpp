#pragma once

#include <functional>
#include <vector>

#include "hts/hierarchy.hpp"
#include "hts/matrix.hpp"
#include "hts/rng.hpp"

namespace hts::test {

// The three-level, eight-series tree used throughout: y1 over (y2, y3),
// y2 over (y4, y5, y6), y3 over (y7, y8).
inline HierarchySpec fig1_hierarchy() {
  return make_hierarchy({{"y1", ""},
                         {"y2", "y1"},
                         {"y3", "y1"},
                         {"y4", "y2"},
                         {"y5", "y2"},
                         {"y6", "y2"},
                         {"y7", "y3"},
                         {"y8", "y3"}});
}

// Independent aggregation-matrix oracle: walks parent chains per node instead
// of DFS over children, so it shares no code path with build_aggregation.
inline Matrix aggregation_by_parent_chains(const HierarchySpec& spec) {
  const int m = spec.num_nodes();
  std::vector<char> has_child(m, 0);
  for (const auto& id : spec.node_ids) {
    auto it = spec.parent.find(id);
    if (it != spec.parent.end()) has_child[spec.index_of(it->second)] = 1;
  }
  Matrix a(m, m);
  for (int j = 0; j < m; ++j) {
    if (has_child[j]) continue;  // not a leaf
    // Leaf j contributes to itself and every ancestor.
    a(j, j) = 1.0;
    std::string cur = spec.node_ids[j];
    while (true) {
      auto it = spec.parent.find(cur);
      if (it == spec.parent.end()) break;
      cur = it->second;
      a(spec.index_of(cur), j) = 1.0;
    }
  }
  return a;
}

}  // namespace hts::test
