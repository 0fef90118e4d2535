#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hts/hierarchy.hpp"
#include "hts/matrix.hpp"
#include "hts/rng.hpp"

namespace hts {

// m series × S timesteps, rows ordered like the hierarchy spec.
struct SeriesPanel {
  Matrix values;  // m×S
  std::vector<std::string> node_ids;
  double scale_factor = 1.0;
  bool is_scaled = false;
  // Mean per-timestep coherency of the raw data; nonzero signals noisy data.
  double raw_coherency = 0.0;

  int num_series() const { return values.rows; }
  int num_timesteps() const { return values.cols; }
};

struct WindowedDataset {
  std::vector<Matrix> windows;               // each k×m; row r is timestep (t-k+1+r)
  std::vector<std::vector<double>> targets;  // each length m, the column after the window
  std::vector<int> timestamps;               // target column index in the source panel
  int num_series = 0;
  int lag = 0;

  int size() const { return static_cast<int>(windows.size()); }
};

struct DatasetSplit {
  WindowedDataset train;
  WindowedDataset val;
  WindowedDataset test;
};

// Windows stacked for full-batch processing: steps[j] holds timestep j of every
// window as one B×m matrix; targets is B×m.
struct Batch {
  std::vector<Matrix> steps;
  Matrix targets;

  int size() const { return targets.rows; }
};

inline Batch make_batch(const WindowedDataset& ds) {
  Batch batch;
  const int n = ds.size();
  if (n == 0) throw std::invalid_argument("make_batch: empty dataset");
  const int k = ds.lag;
  const int m = ds.num_series;
  batch.steps.assign(k, Matrix(n, m));
  batch.targets = Matrix(n, m);
  for (int r = 0; r < n; ++r) {
    for (int j = 0; j < k; ++j)
      for (int c = 0; c < m; ++c) batch.steps[j](r, c) = ds.windows[r](j, c);
    for (int c = 0; c < m; ++c) batch.targets(r, c) = ds.targets[r][c];
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Values CSV: wide format, UTF-8, '.' decimal. Header row of series ids, one
// row per timestep.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

inline double parse_cell(const std::string& cell, int row, int col) {
  const char* s = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0')
    throw std::runtime_error("values csv: non-numeric cell '" + cell + "' at row " +
                             std::to_string(row) + ", column " + std::to_string(col));
  return v;
}

}  // namespace detail

inline SeriesPanel load_values_csv(const std::string& path,
                                   const std::vector<std::string>& node_order) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open values file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty values file: " + path);
  const auto header = detail::split_csv_row(line);

  std::unordered_map<std::string, int> col_of;
  for (size_t i = 0; i < header.size(); ++i) {
    if (!col_of.emplace(header[i], static_cast<int>(i)).second)
      throw std::runtime_error("values csv: duplicate series id '" + header[i] + "'");
  }
  for (const auto& id : header)
    if (std::find(node_order.begin(), node_order.end(), id) == node_order.end())
      throw std::runtime_error("values csv: series '" + id + "' not in hierarchy");
  std::vector<int> source_col(node_order.size());
  for (size_t i = 0; i < node_order.size(); ++i) {
    auto it = col_of.find(node_order[i]);
    if (it == col_of.end())
      throw std::runtime_error("values csv: missing series '" + node_order[i] + "'");
    source_col[i] = it->second;
  }

  std::vector<std::vector<double>> rows;
  int row_idx = 1;
  while (std::getline(in, line)) {
    ++row_idx;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_row(line);
    if (cells.size() != header.size())
      throw std::runtime_error("values csv: ragged row " + std::to_string(row_idx) +
                               " (" + std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header.size()) + ")");
    std::vector<double> vals(cells.size());
    for (size_t c = 0; c < cells.size(); ++c)
      vals[c] = detail::parse_cell(cells[c], row_idx, static_cast<int>(c));
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw std::runtime_error("values csv: no data rows in " + path);

  SeriesPanel panel;
  panel.node_ids = node_order;
  panel.values = Matrix(static_cast<int>(node_order.size()), static_cast<int>(rows.size()));
  for (size_t t = 0; t < rows.size(); ++t)
    for (size_t i = 0; i < node_order.size(); ++i)
      panel.values(static_cast<int>(i), static_cast<int>(t)) = rows[t][source_col[i]];
  return panel;
}

inline void save_values_csv(const SeriesPanel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write values file: " + path);
  for (size_t i = 0; i < panel.node_ids.size(); ++i)
    out << (i ? "," : "") << panel.node_ids[i];
  out << "\n";
  char buf[32];
  for (int t = 0; t < panel.num_timesteps(); ++t) {
    for (int i = 0; i < panel.num_series(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", panel.values(i, t));
      out << (i ? "," : "") << buf;
    }
    out << "\n";
  }
}

// Loads a panel against its hierarchy and records the measured raw coherency.
inline std::pair<SeriesPanel, HierarchySpec> load_panel(const std::string& values_csv,
                                                        const std::string& hierarchy_csv) {
  HierarchySpec spec = load_hierarchy_csv(hierarchy_csv);
  SeriesPanel panel = load_values_csv(values_csv, spec.node_ids);
  const auto agg = build_aggregation(spec);
  panel.raw_coherency = coherency_panel(panel.values, agg);
  return {std::move(panel), std::move(spec)};
}

// ---------------------------------------------------------------------------
// Scaling, windowing, splitting.
// ---------------------------------------------------------------------------

// Divides every entry by the single global maximum. One shared factor keeps
// the hierarchy sums intact (coherency scales by 1/max).
inline SeriesPanel scale_global_max(const SeriesPanel& panel) {
  if (panel.is_scaled) throw std::logic_error("scale_global_max: panel already scaled");
  double max_val = 0.0;
  for (double v : panel.values.a) max_val = std::max(max_val, v);
  if (!(max_val > 0.0))
    throw std::runtime_error("scale_global_max: panel maximum is not positive");
  SeriesPanel out = panel;
  out.values = scale(panel.values, 1.0 / max_val);
  out.scale_factor = max_val;
  out.is_scaled = true;
  out.raw_coherency = panel.raw_coherency / max_val;
  return out;
}

inline SeriesPanel unscale(const SeriesPanel& panel) {
  if (!panel.is_scaled) throw std::logic_error("unscale: panel is not scaled");
  SeriesPanel out = panel;
  out.values = scale(panel.values, panel.scale_factor);
  out.scale_factor = 1.0;
  out.is_scaled = false;
  out.raw_coherency = panel.raw_coherency * panel.scale_factor;
  return out;
}

// One datapoint per timestep t: inputs are columns t-k+1..t, target column t+1.
inline WindowedDataset make_windows(const SeriesPanel& panel, int k) {
  const int s = panel.num_timesteps();
  const int m = panel.num_series();
  if (k < 1) throw std::invalid_argument("make_windows: lag must be >= 1");
  if (s <= k)
    throw std::invalid_argument("make_windows: need more than " + std::to_string(k) +
                                " timesteps, have " + std::to_string(s));
  WindowedDataset ds;
  ds.num_series = m;
  ds.lag = k;
  for (int t = k - 1; t + 1 < s; ++t) {
    Matrix window(k, m);
    for (int j = 0; j < k; ++j)
      for (int i = 0; i < m; ++i) window(j, i) = panel.values(i, t - k + 1 + j);
    std::vector<double> target(m);
    for (int i = 0; i < m; ++i) target[i] = panel.values(i, t + 1);
    ds.windows.push_back(std::move(window));
    ds.targets.push_back(std::move(target));
    ds.timestamps.push_back(t + 1);
  }
  return ds;
}

// Chronological 80/10/10 split: ⌊0.8n⌋ / ⌊0.1n⌋ / remainder, no shuffling.
inline DatasetSplit split_80_10_10(const WindowedDataset& ds) {
  const int n = ds.size();
  if (n < 10)
    throw std::invalid_argument("split_80_10_10: need at least 10 datapoints, have " +
                                std::to_string(n));
  const int n_train = static_cast<int>(std::floor(0.8 * n));
  const int n_val = static_cast<int>(std::floor(0.1 * n));
  auto slice = [&](int begin, int end) {
    WindowedDataset part;
    part.num_series = ds.num_series;
    part.lag = ds.lag;
    part.windows.assign(ds.windows.begin() + begin, ds.windows.begin() + end);
    part.targets.assign(ds.targets.begin() + begin, ds.targets.begin() + end);
    part.timestamps.assign(ds.timestamps.begin() + begin, ds.timestamps.begin() + end);
    return part;
  };
  return {slice(0, n_train), slice(n_train, n_train + n_val), slice(n_train + n_val, n)};
}

// ---------------------------------------------------------------------------
// Noisy-dataset construction: drop a random subset of leaves, keep aggregate
// values unchanged, so the surviving panel is no longer coherent.
// ---------------------------------------------------------------------------

struct NoisyDataset {
  SeriesPanel panel;
  HierarchySpec spec;
  AggregationMatrix agg;
  std::vector<std::string> dropped_ids;
};

inline NoisyDataset make_noisy(const SeriesPanel& panel, const HierarchySpec& spec,
                               double drop_fraction, uint64_t seed) {
  if (!(drop_fraction >= 0.0 && drop_fraction < 1.0))
    throw std::invalid_argument("make_noisy: drop_fraction must be in [0, 1)");
  if (panel.node_ids != spec.node_ids)
    throw std::invalid_argument("make_noisy: panel/spec node order mismatch");

  const auto leaves = spec.leaf_indices();
  const int n_drop = static_cast<int>(std::floor(drop_fraction * leaves.size()));

  // Partial Fisher-Yates over the leaf list.
  std::vector<int> pool = leaves;
  Rng rng(seed);
  std::vector<char> dropped(spec.num_nodes(), 0);
  NoisyDataset out;
  for (int i = 0; i < n_drop; ++i) {
    const int j = i + rng.index(static_cast<int>(pool.size()) - i);
    std::swap(pool[i], pool[j]);
    dropped[pool[i]] = 1;
    out.dropped_ids.push_back(spec.node_ids[pool[i]]);
  }

  // An aggregate whose children are all dropped would lose its definition.
  const auto children = spec.children_by_index();
  for (int i = 0; i < spec.num_nodes(); ++i) {
    if (children[i].empty() || dropped[i]) continue;
    bool any_left = false;
    for (int c : children[i]) any_left = any_left || !dropped[c];
    if (!any_left)
      throw std::runtime_error("make_noisy: dropping would leave aggregate '" +
                               spec.node_ids[i] + "' with zero children");
  }

  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<int> kept;
  for (int i = 0; i < spec.num_nodes(); ++i) {
    if (dropped[i]) continue;
    kept.push_back(i);
    auto it = spec.parent.find(spec.node_ids[i]);
    edges.emplace_back(spec.node_ids[i], it == spec.parent.end() ? "" : it->second);
  }
  out.spec = make_hierarchy(edges);
  out.agg = build_aggregation(out.spec);

  out.panel.node_ids = out.spec.node_ids;
  out.panel.scale_factor = panel.scale_factor;
  out.panel.is_scaled = panel.is_scaled;
  out.panel.values = Matrix(static_cast<int>(kept.size()), panel.num_timesteps());
  for (size_t r = 0; r < kept.size(); ++r)
    for (int t = 0; t < panel.num_timesteps(); ++t)
      out.panel.values(static_cast<int>(r), t) = panel.values(kept[r], t);
  out.panel.raw_coherency = coherency_panel(out.panel.values, out.agg);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic dataset generator: random tree, seasonal + trend + noise leaves,
// aggregates formed as exact sums. Lets the whole pipeline run without any
// external dataset.
// ---------------------------------------------------------------------------

inline HierarchySpec random_tree(int leaves, int depth, Rng& rng) {
  if (leaves < 1) throw std::invalid_argument("random_tree: need at least one leaf");
  if (depth < 1) throw std::invalid_argument("random_tree: need depth >= 1");
  std::vector<std::pair<std::string, std::string>> edges;
  int counter = 0;
  auto fresh = [&counter] { return "s" + std::to_string(counter++); };

  if (depth == 1) {
    // Flat forest: every node is its own root and leaf.
    for (int i = 0; i < leaves; ++i) edges.emplace_back(fresh(), "");
    return make_hierarchy(edges);
  }

  struct Slot {
    std::string id;
    int quota;
    int level;
  };
  const std::string root = fresh();
  edges.emplace_back(root, "");
  std::vector<Slot> open{{root, leaves, 1}};
  while (!open.empty()) {
    const Slot slot = open.back();
    open.pop_back();
    if (slot.level == depth - 1) {
      for (int i = 0; i < slot.quota; ++i) edges.emplace_back(fresh(), slot.id);
      continue;
    }
    const int n_children = std::min(slot.quota, 2 + rng.index(3));
    // Random composition of quota into n_children positive parts.
    std::vector<int> parts(n_children, 1);
    for (int extra = slot.quota - n_children; extra > 0; --extra)
      parts[rng.index(n_children)] += 1;
    for (int c = 0; c < n_children; ++c) {
      const std::string child = fresh();
      edges.emplace_back(child, slot.id);
      open.push_back({child, parts[c], slot.level + 1});
    }
  }
  return make_hierarchy(edges);
}

inline SeriesPanel gen_synthetic(int leaves, int depth, int timesteps, uint64_t seed,
                                 HierarchySpec* out_spec = nullptr) {
  Rng tree_rng(derive_seed(seed, "synthetic-tree"));
  HierarchySpec spec = random_tree(leaves, depth, tree_rng);
  const auto agg = build_aggregation(spec);

  Rng rng(derive_seed(seed, "synthetic-values"));
  const int m = spec.num_nodes();
  Matrix leaf_panel(m, timesteps);
  for (int l : agg.leaf_indices) {
    const double base = rng.uniform(0.5, 1.5);
    const double amp = rng.uniform(0.3, 1.0);
    const double period = (rng.index(2) == 0) ? 12.0 : 24.0;
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const double trend = rng.uniform(0.0, 0.5);
    for (int t = 0; t < timesteps; ++t) {
      const double season = amp * 0.5 * (1.0 + std::sin(2.0 * M_PI * t / period + phase));
      const double value =
          base + season + trend * t / timesteps + 0.05 * rng.normal();
      leaf_panel(l, t) = std::max(value, 0.0);
    }
  }
  SeriesPanel panel;
  panel.node_ids = spec.node_ids;
  panel.values = matmul(agg.entries, leaf_panel);  // exact leaf sums; leaf rows kept
  panel.raw_coherency = coherency_panel(panel.values, agg);
  if (out_spec) *out_spec = std::move(spec);
  return panel;
}

}  // namespace hts
