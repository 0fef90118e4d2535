#pragma once

#include <algorithm>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hts/matrix.hpp"

namespace hts {

// Tree (or forest) of series. Node order is fixed at construction and shared by
// every matrix and panel built from the spec.
struct HierarchySpec {
  std::vector<std::string> node_ids;                    // fixed order
  std::unordered_map<std::string, std::string> parent;  // child -> parent; roots absent
  std::unordered_map<std::string, int> level;           // 1 = top

  int num_nodes() const { return static_cast<int>(node_ids.size()); }

  int index_of(const std::string& id) const {
    for (int i = 0; i < num_nodes(); ++i)
      if (node_ids[i] == id) return i;
    throw std::invalid_argument("hierarchy: unknown node id '" + id + "'");
  }

  // Children indices per node, in node order.
  std::vector<std::vector<int>> children_by_index() const {
    std::unordered_map<std::string, int> pos;
    for (int i = 0; i < num_nodes(); ++i) pos[node_ids[i]] = i;
    std::vector<std::vector<int>> ch(node_ids.size());
    for (int i = 0; i < num_nodes(); ++i) {
      auto it = parent.find(node_ids[i]);
      if (it != parent.end()) ch[pos.at(it->second)].push_back(i);
    }
    return ch;
  }

  std::vector<int> leaf_indices() const {
    auto ch = children_by_index();
    std::vector<int> leaves;
    for (int i = 0; i < num_nodes(); ++i)
      if (ch[i].empty()) leaves.push_back(i);
    return leaves;
  }

  int max_level() const {
    int lmax = 0;
    for (const auto& [id, lv] : level) lmax = std::max(lmax, lv);
    return lmax;
  }
};

// Builds a validated spec from (child, parent) edges in file order. An empty
// parent declares a root. Node order is first appearance (child, then parent).
inline HierarchySpec make_hierarchy(
    const std::vector<std::pair<std::string, std::string>>& edges) {
  HierarchySpec spec;
  std::unordered_set<std::string> seen_child;
  std::unordered_set<std::string> seen;
  auto note = [&](const std::string& id) {
    if (id.empty()) throw std::invalid_argument("hierarchy: empty node id");
    if (seen.insert(id).second) spec.node_ids.push_back(id);
  };
  for (const auto& [child, par] : edges) {
    if (!seen_child.insert(child).second)
      throw std::invalid_argument("hierarchy: duplicate node id '" + child + "'");
    note(child);
    if (!par.empty()) {
      note(par);
      spec.parent[child] = par;
    }
  }
  if (spec.node_ids.empty()) throw std::invalid_argument("hierarchy: no nodes");

  // Level = depth from root; recursion doubles as cycle detection.
  std::unordered_map<std::string, int> state;  // 0 unvisited, 1 visiting, 2 done
  std::function<int(const std::string&)> depth = [&](const std::string& id) -> int {
    auto it = spec.level.find(id);
    if (it != spec.level.end()) return it->second;
    if (state[id] == 1) throw std::invalid_argument("hierarchy: cycle detected at '" + id + "'");
    state[id] = 1;
    auto pit = spec.parent.find(id);
    const int lv = (pit == spec.parent.end()) ? 1 : depth(pit->second) + 1;
    state[id] = 2;
    spec.level[id] = lv;
    return lv;
  };
  for (const auto& id : spec.node_ids) depth(id);
  return spec;
}

// m×m aggregation matrix: A[i][j] = 1 iff node j is a leaf descendant of node i
// (a leaf counts as its own descendant). Leaf rows are standard basis vectors,
// so A·A = A exactly.
struct AggregationMatrix {
  Matrix entries;
  std::vector<int> leaf_indices;

  int num_nodes() const { return entries.rows; }
  int num_leaves() const { return static_cast<int>(leaf_indices.size()); }
};

inline AggregationMatrix build_aggregation(const HierarchySpec& spec) {
  const int m = spec.num_nodes();
  const auto children = spec.children_by_index();

  AggregationMatrix agg;
  agg.leaf_indices = spec.leaf_indices();
  if (agg.leaf_indices.empty())
    throw std::invalid_argument("build_aggregation: empty leaf set");
  agg.entries = Matrix(m, m);

  // Leaf-descendant sets via DFS from each node.
  std::vector<char> is_leaf(m, 0);
  for (int l : agg.leaf_indices) is_leaf[l] = 1;
  for (int i = 0; i < m; ++i) {
    std::vector<int> stack{i};
    while (!stack.empty()) {
      const int n = stack.back();
      stack.pop_back();
      if (is_leaf[n]) agg.entries(i, n) = 1.0;
      for (int c : children[n]) stack.push_back(c);
    }
  }
  return agg;
}

// m×b summing matrix: column k is the leaf_indices[k] column of A. Its column
// space is the coherent subspace; leaf rows form the b×b identity.
struct SummingMatrix {
  Matrix entries;
  std::vector<int> leaf_indices;
};

inline SummingMatrix summing_matrix(const AggregationMatrix& agg) {
  const int m = agg.num_nodes();
  const int b = agg.num_leaves();
  SummingMatrix s;
  s.leaf_indices = agg.leaf_indices;
  s.entries = Matrix(m, b);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < b; ++k) s.entries(i, k) = agg.entries(i, agg.leaf_indices[k]);
  return s;
}

// c(ŷ) = ||ŷ − A·ŷ||₂: distance of a forecast from its own leaf-implied
// aggregation. Zero iff the forecast is coherent.
inline double coherency(const Matrix& yhat, const AggregationMatrix& agg) {
  if (yhat.cols != 1 || yhat.rows != agg.num_nodes())
    throw std::invalid_argument("coherency: expected " +
                                std::to_string(agg.num_nodes()) + "x1 vector, got " +
                                yhat.shape_str());
  return frobenius_norm(sub(yhat, matmul(agg.entries, yhat)));
}

// Mean per-timestep coherency of an m×T panel of forecasts. This per-timestep
// mean is the "coherency" number in all reports.
inline double coherency_panel(const Matrix& yhat, const AggregationMatrix& agg) {
  if (yhat.rows != agg.num_nodes() || yhat.cols < 1)
    throw std::invalid_argument("coherency_panel: dimension mismatch " + yhat.shape_str());
  const Matrix resid = sub(yhat, matmul(agg.entries, yhat));
  double total = 0.0;
  for (int t = 0; t < yhat.cols; ++t) {
    double s = 0.0;
    for (int i = 0; i < yhat.rows; ++i) s += resid(i, t) * resid(i, t);
    total += std::sqrt(s);
  }
  return total / yhat.cols;
}

// Orthogonal projector P = S·(SᵀS)⁻¹·Sᵀ onto the coherent subspace.
// Symmetrized after the solve to remove asymmetric rounding.
inline Matrix projection_matrix(const SummingMatrix& s) {
  const Matrix st = transpose(s.entries);
  const Matrix gram = matmul(st, s.entries);
  Matrix x = solve_spd(gram, st);  // (SᵀS)⁻¹·Sᵀ
  Matrix p = matmul(s.entries, x);
  for (int i = 0; i < p.rows; ++i)
    for (int j = 0; j < i; ++j) {
      const double v = 0.5 * (p(i, j) + p(j, i));
      p(i, j) = v;
      p(j, i) = v;
    }
  return p;
}

// Hierarchy file: UTF-8 CSV with header `child,parent`; roots use an empty
// parent field. Node order in all matrices = first-appearance order.
inline HierarchySpec load_hierarchy_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open hierarchy file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty hierarchy file: " + path);
  auto strip = [](std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    size_t b = s.find_first_not_of(' ');
    return b == std::string::npos ? std::string() : s.substr(b);
  };
  if (strip(line) != "child,parent")
    throw std::runtime_error("hierarchy file must start with 'child,parent' header: " + path);
  std::vector<std::pair<std::string, std::string>> edges;
  while (std::getline(in, line)) {
    line = strip(line);
    if (line.empty()) continue;
    const size_t comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("hierarchy row missing comma: '" + line + "'");
    edges.emplace_back(strip(line.substr(0, comma)), strip(line.substr(comma + 1)));
  }
  return make_hierarchy(edges);
}

inline void save_hierarchy_csv(const HierarchySpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write hierarchy file: " + path);
  out << "child,parent\n";
  for (const auto& id : spec.node_ids) {
    auto it = spec.parent.find(id);
    out << id << "," << (it == spec.parent.end() ? "" : it->second) << "\n";
  }
}

}  // namespace hts
