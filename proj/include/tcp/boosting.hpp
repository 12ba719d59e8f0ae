#pragma once

// Regression trees grown best-first on pre-binned features. Shared by the
// bagged MART ranker (squared loss) and the commit classifier (logistic loss).

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace tcp::gbt {

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  void append_row(std::span<const double> values);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// One feature quantised into at most 256 bins. Bin b holds values
/// v <= edges[b] (and > edges[b-1]); the last bin is unbounded above.
struct BinnedColumn {
  std::vector<double> edges;
  std::uint8_t default_bin = 0;
  std::vector<std::uint32_t> sparse_rows;  // rows whose bin differs from default_bin
  int bin_count() const noexcept { return static_cast<int>(edges.size()) + 1; }
};

class BinnedMatrix {
 public:
  static constexpr int kMaxBins = 256;

  /// `column(c, out)` must fill `out` with the `rows` values of column c.
  static BinnedMatrix build(std::size_t rows, std::size_t cols,
                            const std::function<void(std::size_t, std::vector<double>&)>& column,
                            int max_bins = kMaxBins);
  static BinnedMatrix build(const Matrix& x, int max_bins = kMaxBins);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return columns_.size(); }
  const BinnedColumn& column(std::size_t c) const { return columns_[c]; }
  std::uint8_t bin(std::size_t r, std::size_t c) const { return bins_[c * rows_ + r]; }

 private:
  std::size_t rows_ = 0;
  std::vector<BinnedColumn> columns_;
  std::vector<std::uint8_t> bins_;  // column-major
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // go left when x[feature] <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;  // leaf output
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class RegressionTree {
 public:
  RegressionTree() : nodes_(1) {}
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> x) const;
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  int split_count() const noexcept;
  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

 private:
  std::vector<TreeNode> nodes_;
};

struct TreeOptions {
  int max_leaves = 200;
  int min_leaf = 1;
  double lambda = 0.0;  // L2 on leaf values; 0 with unit hessians = variance reduction
  double scale = 1.0;   // multiplies every leaf value (shrinkage)
};

/// Fits one tree to `grad` (with optional per-row `hess`, unit when empty)
/// over `rows`, considering only `features`. Leaf value = scale * G/(H+lambda);
/// a split is taken only when its gain is positive. When `fitted` is non-null
/// it receives each training row's leaf value (indexed by row). When `usage`
/// is non-null its entry for every split feature is incremented.
RegressionTree fit_tree(const BinnedMatrix& x, std::span<const std::uint32_t> rows,
                        std::span<const int> features, std::span<const double> grad,
                        std::span<const double> hess, const TreeOptions& options,
                        std::vector<double>* fitted = nullptr, std::vector<int>* usage = nullptr);

}  // namespace tcp::gbt
