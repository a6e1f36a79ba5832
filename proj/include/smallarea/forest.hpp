#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "smallarea/random.hpp"

namespace smallarea {

/// Dense row-major design matrix.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

struct ForestParams {
  std::size_t n_trees = 500;
  /// Candidate features per split; 0 selects ceil(p / 3).
  std::size_t mtry = 0;
  /// Smallest admissible child size, counting bootstrap duplicates.
  std::size_t min_node_size = 5;
  std::uint64_t seed = 0;

  std::size_t resolved_mtry(std::size_t n_features) const;
  bool operator==(const ForestParams&) const = default;
};

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double sse = 0.0;  // summed child error sum of squares
};

/// Exhaustive CART split search over `features`. Candidate thresholds are
/// midpoints between consecutive distinct values; a row goes left when its
/// value is <= threshold. Ties in SSE go to the lowest feature index, then the
/// lowest threshold. Returns nothing when no admissible split strictly lowers
/// the node SSE. `rows` may repeat indices (bootstrap multiplicity).
std::optional<Split> best_split(const FeatureMatrix& x, std::span<const double> y, std::span<const std::size_t> rows,
                                std::span<const std::size_t> features, std::size_t min_node_size = 1);

class RegressionTree {
 public:
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    double mean = 0.0;       // response mean over training rows in the node
    std::uint64_t count = 0;  // training rows in the node

    bool is_leaf() const noexcept { return feature < 0; }
    bool operator==(const Node&) const = default;
  };

  RegressionTree() = default;
  explicit RegressionTree(std::vector<Node> nodes);

  /// Node 0 is the root.
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const Node& root() const { return nodes_.front(); }
  std::size_t leaf_for(std::span<const double> x) const;
  double predict(std::span<const double> x) const { return nodes_[leaf_for(x)].mean; }

  bool operator==(const RegressionTree&) const = default;

 private:
  std::vector<Node> nodes_;
};

/// Unpruned CART growth. A fresh subset of `mtry` features is drawn from
/// `rng` at every node; nodes stop splitting when they hold fewer than
/// 2 * min_node_size rows, have constant response, or admit no improving
/// split. Leaf means are summed in ascending row order.
RegressionTree grow_tree(const FeatureMatrix& x, std::span<const double> y, std::span<const std::size_t> rows,
                         std::size_t mtry, std::size_t min_node_size, Rng& rng);

class Forest {
 public:
  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
  /// inbag_counts()[t][i] = times row i was drawn into tree t's bootstrap.
  const std::vector<std::vector<std::uint32_t>>& inbag_counts() const noexcept { return inbag_; }
  const ForestParams& params() const noexcept { return params_; }
  std::size_t n_features() const noexcept { return n_features_; }
  std::size_t n_training_rows() const noexcept { return n_rows_; }

  /// Mean over all trees of the leaf mean `x` lands in.
  double predict(std::span<const double> x) const;

  bool operator==(const Forest&) const = default;

 private:
  friend Forest fit_forest(const FeatureMatrix&, std::span<const double>, const ForestParams&, std::size_t);
  friend Forest read_forest(std::istream&);

  std::vector<RegressionTree> trees_;
  std::vector<std::vector<std::uint32_t>> inbag_;
  ForestParams params_;
  std::size_t n_features_ = 0;
  std::size_t n_rows_ = 0;
};

/// Grows params.n_trees trees, each on a size-n bootstrap drawn with
/// replacement. Tree t uses the stream derive_seed(params.seed, t), so the
/// result does not depend on `n_threads`.
Forest fit_forest(const FeatureMatrix& x, std::span<const double> y, const ForestParams& params,
                  std::size_t n_threads = 1);

struct OobFit {
  std::vector<double> fitted;
  std::vector<std::size_t> oob_trees;  // trees whose bootstrap left the row out
  std::vector<bool> no_oob_tree;       // fitted falls back to the all-tree prediction
};

/// Out-of-bag fitted values for the forest's own training rows.
OobFit oob_fitted(const Forest& forest, const FeatureMatrix& x);

/// Versioned JSON text: params, seed, tree topology, thresholds, leaf means,
/// and bootstrap counts. Doubles are written in shortest round-trip form.
void write_forest(std::ostream& out, const Forest& forest);
Forest read_forest(std::istream& in);

}  // namespace smallarea
