#include "smallarea/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <istream>
#include <mutex>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "smallarea/error.hpp"

namespace smallarea {

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) fail(ErrorKind::invalid_argument, "FeatureMatrix: value count mismatch");
}

std::size_t ForestParams::resolved_mtry(std::size_t n_features) const {
  if (n_features == 0) fail(ErrorKind::invalid_argument, "forest: no features");
  const std::size_t m = mtry == 0 ? (n_features + 2) / 3 : mtry;
  if (m < 1 || m > n_features) {
    fail(ErrorKind::invalid_argument,
         "forest: mtry " + std::to_string(m) + " outside [1, " + std::to_string(n_features) + "]");
  }
  return m;
}

namespace {

// Relative slack used both to call two SSE values tied and to demand a strict
// reduction over the parent.
constexpr double kSseTieTolerance = 1e-10;

double midpoint(double lo, double hi) {
  const double mid = 0.5 * (lo + hi);
  // Adjacent doubles can round the midpoint up onto `hi`.
  return mid < hi ? mid : lo;
}

}  // namespace

std::optional<Split> best_split(const FeatureMatrix& x, std::span<const double> y, std::span<const std::size_t> rows,
                                std::span<const std::size_t> features, std::size_t min_node_size) {
  const std::size_t n = rows.size();
  if (n < 2 || features.empty()) return std::nullopt;
  min_node_size = std::max<std::size_t>(min_node_size, 1);
  if (n < 2 * min_node_size) return std::nullopt;

  double mean = 0.0;
  for (auto r : rows) mean += y[r];
  mean /= static_cast<double>(n);
  double parent_sse = 0.0;
  for (auto r : rows) parent_sse += (y[r] - mean) * (y[r] - mean);
  if (!(parent_sse > 0.0)) return std::nullopt;
  const double tol = kSseTieTolerance * parent_sse;

  std::vector<std::size_t> order(features.begin(), features.end());
  std::sort(order.begin(), order.end());

  std::optional<Split> best;
  std::vector<std::pair<double, double>> column(n);  // (feature value, centred response)
  for (auto f : order) {
    for (std::size_t i = 0; i < n; ++i) column[i] = {x.at(rows[i], f), y[rows[i]] - mean};
    std::sort(column.begin(), column.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double total_sum = 0.0;
    double total_sq = 0.0;
    for (const auto& [v, yc] : column) {
      total_sum += yc;
      total_sq += yc * yc;
    }
    double left_sum = 0.0;
    double left_sq = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_sum += column[i].second;
      left_sq += column[i].second * column[i].second;
      if (!(column[i].first < column[i + 1].first)) continue;
      const std::size_t n_left = i + 1;
      const std::size_t n_right = n - n_left;
      if (n_left < min_node_size || n_right < min_node_size) continue;
      const double right_sum = total_sum - left_sum;
      const double right_sq = total_sq - left_sq;
      const double sse = (left_sq - left_sum * left_sum / static_cast<double>(n_left)) +
                         (right_sq - right_sum * right_sum / static_cast<double>(n_right));
      if (!best || sse < best->sse - tol) {
        best = Split{f, midpoint(column[i].first, column[i + 1].first), sse};
      }
    }
  }
  if (best && best->sse < parent_sse - tol) return best;
  return std::nullopt;
}

RegressionTree::RegressionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) fail(ErrorKind::invalid_argument, "RegressionTree: no nodes");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& nd = nodes_[i];
    if (!nd.is_leaf() && (nd.left <= i || nd.right <= i || nd.left >= nodes_.size() || nd.right >= nodes_.size())) {
      fail(ErrorKind::invalid_argument, "RegressionTree: malformed child index at node " + std::to_string(i));
    }
  }
}

std::size_t RegressionTree::leaf_for(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& nd = nodes_[i];
    i = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
  }
  return i;
}

namespace {

class TreeGrower {
 public:
  TreeGrower(const FeatureMatrix& x, std::span<const double> y, std::size_t mtry, std::size_t min_node_size, Rng& rng)
      : x_(x), y_(y), mtry_(mtry), min_node_size_(std::max<std::size_t>(min_node_size, 1)), rng_(rng) {}

  std::vector<RegressionTree::Node> grow(std::vector<std::size_t> rows) {
    std::sort(rows.begin(), rows.end());
    rows_ = std::move(rows);
    nodes_.clear();
    build(0, rows_.size());
    return std::move(nodes_);
  }

 private:
  // rows_[begin, end) stays in ascending order: stable_partition preserves it.
  std::uint32_t build(std::size_t begin, std::size_t end) {
    const auto index = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    const std::span<const std::size_t> node_rows(rows_.data() + begin, end - begin);

    double sum = 0.0;
    double lo = y_[node_rows.front()];
    double hi = lo;
    for (auto r : node_rows) {
      sum += y_[r];
      lo = std::min(lo, y_[r]);
      hi = std::max(hi, y_[r]);
    }
    nodes_[index].mean = sum / static_cast<double>(node_rows.size());
    nodes_[index].count = node_rows.size();

    if (node_rows.size() < 2 * min_node_size_ || lo == hi) return index;

    auto features = sample_without_replacement(rng_, x_.cols(), mtry_);
    auto split = best_split(x_, y_, node_rows, features, min_node_size_);
    if (!split) return index;

    const auto f = split->feature;
    const double t = split->threshold;
    auto mid = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                     rows_.begin() + static_cast<std::ptrdiff_t>(end),
                                     [&](std::size_t r) { return x_.at(r, f) <= t; });
    const auto split_at = static_cast<std::size_t>(mid - rows_.begin());
    const auto left = build(begin, split_at);
    const auto right = build(split_at, end);
    auto& nd = nodes_[index];
    nd.feature = static_cast<std::int32_t>(f);
    nd.threshold = t;
    nd.left = left;
    nd.right = right;
    return index;
  }

  const FeatureMatrix& x_;
  std::span<const double> y_;
  std::size_t mtry_;
  std::size_t min_node_size_;
  Rng& rng_;
  std::vector<std::size_t> rows_;
  std::vector<RegressionTree::Node> nodes_;
};

void check_training(const FeatureMatrix& x, std::span<const double> y) {
  if (x.rows() != y.size()) fail(ErrorKind::invalid_argument, "forest: X rows and y length differ");
  for (double v : y) {
    if (!std::isfinite(v)) fail(ErrorKind::invalid_argument, "forest: non-finite response");
  }
}

}  // namespace

RegressionTree grow_tree(const FeatureMatrix& x, std::span<const double> y, std::span<const std::size_t> rows,
                         std::size_t mtry, std::size_t min_node_size, Rng& rng) {
  check_training(x, y);
  if (rows.empty()) fail(ErrorKind::invalid_argument, "grow_tree: empty bootstrap");
  if (mtry < 1 || mtry > x.cols()) fail(ErrorKind::invalid_argument, "grow_tree: mtry outside [1, p]");
  TreeGrower grower(x, y, mtry, min_node_size, rng);
  return RegressionTree(grower.grow({rows.begin(), rows.end()}));
}

double Forest::predict(std::span<const double> x) const {
  if (x.size() != n_features_) {
    fail(ErrorKind::invalid_argument, "forest: expected " + std::to_string(n_features_) + " features, got " +
                                          std::to_string(x.size()));
  }
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict(x);
  return sum / static_cast<double>(trees_.size());
}

Forest fit_forest(const FeatureMatrix& x, std::span<const double> y, const ForestParams& params,
                  std::size_t n_threads) {
  check_training(x, y);
  if (x.rows() < 2) fail(ErrorKind::invalid_argument, "fit_forest: need at least 2 training rows");
  if (params.n_trees < 1) fail(ErrorKind::invalid_argument, "fit_forest: n_trees must be >= 1");
  const std::size_t mtry = params.resolved_mtry(x.cols());
  const std::size_t n = x.rows();

  Forest forest;
  forest.params_ = params;
  forest.params_.mtry = mtry;
  forest.n_features_ = x.cols();
  forest.n_rows_ = n;
  forest.trees_.resize(params.n_trees);
  forest.inbag_.assign(params.n_trees, std::vector<std::uint32_t>(n, 0));

  auto grow_one = [&](std::size_t t) {
    Rng rng(derive_seed(params.seed, t));
    std::vector<std::size_t> bootstrap(n);
    for (auto& r : bootstrap) {
      r = static_cast<std::size_t>(rng.uniform_index(n));
      ++forest.inbag_[t][r];
    }
    forest.trees_[t] = grow_tree(x, y, bootstrap, mtry, params.min_node_size, rng);
  };

  n_threads = std::clamp<std::size_t>(n_threads, 1, params.n_trees);
  if (n_threads == 1) {
    for (std::size_t t = 0; t < params.n_trees; ++t) grow_one(t);
    return forest;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < n_threads; ++w) {
    workers.emplace_back([&] {
      for (std::size_t t = next++; t < params.n_trees; t = next++) {
        try {
          grow_one(t);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
  return forest;
}

OobFit oob_fitted(const Forest& forest, const FeatureMatrix& x) {
  if (x.rows() != forest.n_training_rows() || x.cols() != forest.n_features()) {
    fail(ErrorKind::invalid_argument, "oob_fitted: X is not the forest's training matrix shape");
  }
  const std::size_t n = x.rows();
  OobFit fit{std::vector<double>(n, 0.0), std::vector<std::size_t>(n, 0), std::vector<bool>(n, false)};
  const auto& trees = forest.trees();
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t t = 0; t < trees.size(); ++t) {
      if (forest.inbag_counts()[t][i] != 0) continue;
      sum += trees[t].predict(x.row(i));
      ++used;
    }
    fit.oob_trees[i] = used;
    if (used == 0) {
      fit.no_oob_tree[i] = true;
      fit.fitted[i] = forest.predict(x.row(i));
    } else {
      fit.fitted[i] = sum / static_cast<double>(used);
    }
  }
  return fit;
}

namespace {
constexpr const char* kForestFormat = "smallarea-forest";
constexpr int kForestVersion = 1;
}  // namespace

void write_forest(std::ostream& out, const Forest& forest) {
  using nlohmann::json;
  json doc;
  doc["format"] = kForestFormat;
  doc["version"] = kForestVersion;
  doc["n_features"] = forest.n_features();
  doc["n_training_rows"] = forest.n_training_rows();
  const auto& p = forest.params();
  doc["params"] = {{"n_trees", p.n_trees},
                   {"mtry", p.resolved_mtry(forest.n_features())},
                   {"min_node_size", p.min_node_size},
                   {"seed", p.seed}};
  json trees = json::array();
  for (std::size_t t = 0; t < forest.trees().size(); ++t) {
    json nodes = json::array();
    for (const auto& nd : forest.trees()[t].nodes()) {
      nodes.push_back(json::array({nd.feature, nd.threshold, nd.left, nd.right, nd.mean, nd.count}));
    }
    trees.push_back({{"nodes", std::move(nodes)}, {"inbag", forest.inbag_counts()[t]}});
  }
  doc["trees"] = std::move(trees);
  out << doc.dump() << '\n';
}

Forest read_forest(std::istream& in) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::schema, std::string("forest file: ") + e.what());
  }
  try {
    if (doc.at("format") != kForestFormat) fail(ErrorKind::schema, "forest file: unexpected format tag");
    if (doc.at("version").get<int>() != kForestVersion) {
      fail(ErrorKind::schema, "forest file: unsupported version " + doc.at("version").dump());
    }
    Forest f;
    f.n_features_ = doc.at("n_features").get<std::size_t>();
    f.n_rows_ = doc.at("n_training_rows").get<std::size_t>();
    const auto& p = doc.at("params");
    f.params_.n_trees = p.at("n_trees").get<std::size_t>();
    f.params_.mtry = p.at("mtry").get<std::size_t>();
    f.params_.min_node_size = p.at("min_node_size").get<std::size_t>();
    f.params_.seed = p.at("seed").get<std::uint64_t>();
    for (const auto& t : doc.at("trees")) {
      std::vector<RegressionTree::Node> nodes;
      for (const auto& a : t.at("nodes")) {
        RegressionTree::Node nd;
        nd.feature = a.at(0).get<std::int32_t>();
        nd.threshold = a.at(1).get<double>();
        nd.left = a.at(2).get<std::uint32_t>();
        nd.right = a.at(3).get<std::uint32_t>();
        nd.mean = a.at(4).get<double>();
        nd.count = a.at(5).get<std::uint64_t>();
        if (!nd.is_leaf() && static_cast<std::size_t>(nd.feature) >= f.n_features_) {
          fail(ErrorKind::schema, "forest file: split feature out of range");
        }
        nodes.push_back(nd);
      }
      f.trees_.emplace_back(std::move(nodes));
      auto inbag = t.at("inbag").get<std::vector<std::uint32_t>>();
      if (inbag.size() != f.n_rows_) fail(ErrorKind::schema, "forest file: inbag length mismatch");
      f.inbag_.push_back(std::move(inbag));
    }
    if (f.trees_.size() != f.params_.n_trees) fail(ErrorKind::schema, "forest file: tree count mismatch");
    return f;
  } catch (const json::exception& e) {
    fail(ErrorKind::schema, std::string("forest file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    fail(ErrorKind::schema, std::string("forest file: ") + e.what());
  }
}

}  // namespace smallarea
