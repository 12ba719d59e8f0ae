#include "tcp/boosting.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>

#include <fmt/format.h>

#include "json_io.hpp"
#include "tcp/core.hpp"

namespace tcp::gbt {

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_)
    throw Error(Errc::Invariant, fmt::format("row of width {} appended to {}-column matrix",
                                             values.size(), cols_));
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

namespace {

// Largest value in [a, b) halfway between a and b.
double midpoint(double a, double b) {
  double m = a + (b - a) / 2.0;
  return m < b ? m : a;
}

std::vector<double> bin_edges(std::vector<double> sorted, int max_bins) {
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges;
  if (sorted.empty()) return edges;
  std::size_t distinct = 1;
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i] != sorted[i - 1]) ++distinct;

  if (distinct <= static_cast<std::size_t>(max_bins)) {
    for (std::size_t i = 1; i < sorted.size(); ++i)
      if (sorted[i] != sorted[i - 1]) edges.push_back(midpoint(sorted[i - 1], sorted[i]));
    return edges;
  }
  const std::size_t n = sorted.size();
  for (int q = 1; q < max_bins; ++q) {
    double v = sorted[static_cast<std::size_t>(q) * n / static_cast<std::size_t>(max_bins)];
    auto next = std::upper_bound(sorted.begin(), sorted.end(), v);
    if (next == sorted.end()) break;
    double e = midpoint(v, *next);
    if (edges.empty() || e > edges.back()) edges.push_back(e);
  }
  return edges;
}

}  // namespace

BinnedMatrix BinnedMatrix::build(std::size_t rows, std::size_t cols,
                                 const std::function<void(std::size_t, std::vector<double>&)>& column,
                                 int max_bins) {
  max_bins = std::clamp(max_bins, 2, kMaxBins);
  BinnedMatrix m;
  m.rows_ = rows;
  m.columns_.resize(cols);
  m.bins_.assign(rows * cols, 0);
  std::vector<double> values;
  std::array<std::size_t, kMaxBins> counts{};
  for (std::size_t c = 0; c < cols; ++c) {
    values.clear();
    column(c, values);
    if (values.size() != rows)
      throw Error(Errc::Invariant, fmt::format("column {} has {} values, expected {}", c,
                                               values.size(), rows));
    BinnedColumn& col = m.columns_[c];
    col.edges = bin_edges(values, max_bins);
    counts.fill(0);
    std::uint8_t* out = m.bins_.data() + c * rows;
    for (std::size_t r = 0; r < rows; ++r) {
      auto b = static_cast<std::size_t>(
          std::lower_bound(col.edges.begin(), col.edges.end(), values[r]) - col.edges.begin());
      out[r] = static_cast<std::uint8_t>(b);
      ++counts[b];
    }
    col.default_bin = static_cast<std::uint8_t>(
        std::max_element(counts.begin(), counts.begin() + col.bin_count()) - counts.begin());
    for (std::size_t r = 0; r < rows; ++r)
      if (out[r] != col.default_bin) col.sparse_rows.push_back(static_cast<std::uint32_t>(r));
  }
  return m;
}

BinnedMatrix BinnedMatrix::build(const Matrix& x, int max_bins) {
  return build(
      x.rows(), x.cols(),
      [&x](std::size_t c, std::vector<double>& out) {
        out.reserve(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r) out.push_back(x.at(r, c));
      },
      max_bins);
}

double RegressionTree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  for (;;) {
    const TreeNode& n = nodes_[i];
    if (n.feature < 0) return n.value;
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                        : n.right);
  }
}

int RegressionTree::split_count() const noexcept {
  return static_cast<int>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.feature >= 0; }));
}

namespace {

struct HistBin {
  double g = 0.0;
  double h = 0.0;
  std::uint32_t n = 0;
};

struct Split {
  double gain = 0.0;
  int feature = -1;
  int bin = -1;
  double threshold = 0.0;
  double g_left = 0.0;
  double h_left = 0.0;
  std::uint32_t n_left = 0;
};

struct Leaf {
  std::int32_t node = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  double g = 0.0;
  double h = 0.0;
  Split best;
  bool split = false;
};

class TreeGrower {
 public:
  TreeGrower(const BinnedMatrix& x, std::span<const std::uint32_t> rows,
             std::span<const int> features, std::span<const double> grad,
             std::span<const double> hess, const TreeOptions& options)
      : x_(x),
        features_(features),
        grad_(grad),
        hess_(hess),
        opt_(options),
        buf_(rows.begin(), rows.end()),
        leaf_of_(x.rows(), -1) {
    double sum_sq = 0.0;
    for (auto r : buf_) sum_sq += grad_[r] * grad_[r];
    min_gain_ = 1e-12 * std::max(1.0, sum_sq);
  }

  RegressionTree grow(std::vector<double>* fitted, std::vector<int>* usage) {
    nodes_.assign(1, TreeNode{});
    Leaf root;
    root.begin = 0;
    root.end = buf_.size();
    for (auto r : buf_) {
      root.g += grad_[r];
      root.h += h(r);
      leaf_of_[r] = 0;
    }
    leaves_.push_back(root);
    evaluate(0);

    auto cmp = [this](std::size_t a, std::size_t b) {
      if (leaves_[a].best.gain != leaves_[b].best.gain)
        return leaves_[a].best.gain < leaves_[b].best.gain;
      return a > b;
    };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(cmp)> queue(cmp);
    if (leaves_[0].best.feature >= 0) queue.push(0);

    int leaf_count = 1;
    while (leaf_count < opt_.max_leaves && !queue.empty()) {
      std::size_t li = queue.top();
      queue.pop();
      auto [left, right] = split(li, usage);
      ++leaf_count;
      for (std::size_t child : {left, right})
        if (leaves_[child].best.feature >= 0) queue.push(child);
    }

    if (fitted && fitted->size() < x_.rows()) fitted->resize(x_.rows());
    for (const Leaf& leaf : leaves_) {
      if (leaf.split) continue;
      double denom = leaf.h + opt_.lambda;
      double value = denom > 0.0 ? opt_.scale * leaf.g / denom : 0.0;
      nodes_[static_cast<std::size_t>(leaf.node)].value = value;
      if (fitted)
        for (std::size_t i = leaf.begin; i < leaf.end; ++i) (*fitted)[buf_[i]] = value;
    }
    return RegressionTree(std::move(nodes_));
  }

 private:
  double h(std::uint32_t r) const { return hess_.empty() ? 1.0 : hess_[r]; }

  double score(double g, double hs) const {
    double d = hs + opt_.lambda;
    return d > 0.0 ? g * g / d : 0.0;
  }

  void evaluate(std::size_t li) {
    Leaf& leaf = leaves_[li];
    const auto node_rows = static_cast<std::uint32_t>(leaf.end - leaf.begin);
    Split best;
    best.gain = min_gain_;
    if (node_rows < static_cast<std::uint32_t>(2 * opt_.min_leaf)) {
      leaf.best = Split{};
      return;
    }
    const double parent = score(leaf.g, leaf.h);
    const auto id = static_cast<std::int32_t>(li);

    for (int f : features_) {
      const BinnedColumn& col = x_.column(static_cast<std::size_t>(f));
      if (col.bin_count() < 2) continue;
      touched_.clear();
      auto add = [&](std::uint32_t r) {
        std::uint8_t b = x_.bin(r, static_cast<std::size_t>(f));
        HistBin& hb = hist_[b];
        if (hb.n == 0) touched_.push_back(b);
        hb.g += grad_[r];
        hb.h += h(r);
        ++hb.n;
      };
      if (col.sparse_rows.size() < node_rows) {
        double g = 0.0;
        double hs = 0.0;
        std::uint32_t n = 0;
        for (auto r : col.sparse_rows) {
          if (leaf_of_[r] != id) continue;
          add(r);
          g += grad_[r];
          hs += h(r);
          ++n;
        }
        if (n < node_rows) {
          HistBin& hb = hist_[col.default_bin];
          touched_.push_back(col.default_bin);
          hb.g = leaf.g - g;
          hb.h = leaf.h - hs;
          hb.n = node_rows - n;
        }
      } else {
        for (std::size_t i = leaf.begin; i < leaf.end; ++i) add(buf_[i]);
      }
      std::sort(touched_.begin(), touched_.end());

      double gl = 0.0;
      double hl = 0.0;
      std::uint32_t nl = 0;
      for (std::size_t t = 0; t + 1 < touched_.size(); ++t) {
        const HistBin& hb = hist_[touched_[t]];
        gl += hb.g;
        hl += hb.h;
        nl += hb.n;
        if (nl < static_cast<std::uint32_t>(opt_.min_leaf)) continue;
        if (node_rows - nl < static_cast<std::uint32_t>(opt_.min_leaf)) break;
        double gain = score(gl, hl) + score(leaf.g - gl, leaf.h - hl) - parent;
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = f;
          best.bin = touched_[t];
          best.threshold = col.edges[touched_[t]];
          best.g_left = gl;
          best.h_left = hl;
          best.n_left = nl;
        }
      }
      for (auto b : touched_) hist_[b] = HistBin{};
    }
    leaf.best = best.feature >= 0 ? best : Split{};
  }

  std::pair<std::size_t, std::size_t> split(std::size_t li, std::vector<int>* usage) {
    const Split s = leaves_[li].best;
    const auto f = static_cast<std::size_t>(s.feature);
    const std::size_t begin = leaves_[li].begin;
    const std::size_t end = leaves_[li].end;
    auto mid = std::stable_partition(buf_.begin() + static_cast<std::ptrdiff_t>(begin),
                                     buf_.begin() + static_cast<std::ptrdiff_t>(end),
                                     [&](std::uint32_t r) { return x_.bin(r, f) <= s.bin; });
    const auto split_at = static_cast<std::size_t>(mid - buf_.begin());

    const auto left_node = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(TreeNode{});
    nodes_.push_back(TreeNode{});
    TreeNode& parent = nodes_[static_cast<std::size_t>(leaves_[li].node)];
    parent.feature = s.feature;
    parent.threshold = s.threshold;
    parent.left = left_node;
    parent.right = left_node + 1;
    if (usage) ++(*usage)[f];

    Leaf left;
    left.node = left_node;
    left.begin = begin;
    left.end = split_at;
    left.g = s.g_left;
    left.h = s.h_left;
    Leaf right;
    right.node = left_node + 1;
    right.begin = split_at;
    right.end = end;
    right.g = leaves_[li].g - s.g_left;
    right.h = leaves_[li].h - s.h_left;
    leaves_[li].split = true;

    const std::size_t li_left = leaves_.size();
    leaves_.push_back(left);
    leaves_.push_back(right);
    for (std::size_t i = begin; i < split_at; ++i) leaf_of_[buf_[i]] = static_cast<std::int32_t>(li_left);
    for (std::size_t i = split_at; i < end; ++i)
      leaf_of_[buf_[i]] = static_cast<std::int32_t>(li_left + 1);
    evaluate(li_left);
    evaluate(li_left + 1);
    return {li_left, li_left + 1};
  }

  const BinnedMatrix& x_;
  std::span<const int> features_;
  std::span<const double> grad_;
  std::span<const double> hess_;
  TreeOptions opt_;
  std::vector<std::uint32_t> buf_;
  std::vector<std::int32_t> leaf_of_;
  std::vector<TreeNode> nodes_;
  std::vector<Leaf> leaves_;
  std::array<HistBin, BinnedMatrix::kMaxBins> hist_{};
  std::vector<std::uint8_t> touched_;
  double min_gain_ = 0.0;
};

}  // namespace

RegressionTree fit_tree(const BinnedMatrix& x, std::span<const std::uint32_t> rows,
                        std::span<const int> features, std::span<const double> grad,
                        std::span<const double> hess, const TreeOptions& options,
                        std::vector<double>* fitted, std::vector<int>* usage) {
  if (options.max_leaves < 1 || options.min_leaf < 1)
    throw Error(Errc::InvalidConfig, "tree needs max_leaves >= 1 and min_leaf >= 1");
  if (rows.empty()) return RegressionTree();
  TreeGrower grower(x, rows, features, grad, hess, options);
  return grower.grow(fitted, usage);
}

}  // namespace tcp::gbt

namespace tcp::detail {

namespace {

json node_to_json(const std::vector<gbt::TreeNode>& nodes, std::int32_t i) {
  const auto& n = nodes[i];
  if (n.feature < 0) return json{{"leaf", n.value}};
  return json{{"feature", n.feature},
              {"threshold", n.threshold},
              {"left", node_to_json(nodes, n.left)},
              {"right", node_to_json(nodes, n.right)}};
}

// Pre-order layout, root at 0.
std::int32_t node_from_json(const json& j, std::vector<gbt::TreeNode>& nodes) {
  if (!j.is_object()) throw Error(Errc::SchemaError, "tree node must be an object");
  const auto at = static_cast<std::int32_t>(nodes.size());
  nodes.emplace_back();
  if (j.contains("leaf")) {
    nodes[at].value = j.at("leaf").get<double>();
    return at;
  }
  const auto feature = j.at("feature").get<std::int32_t>();
  if (feature < 0) throw Error(Errc::SchemaError, "negative split feature");
  nodes[at].feature = feature;
  nodes[at].threshold = j.at("threshold").get<double>();
  const auto left = node_from_json(j.at("left"), nodes);
  const auto right = node_from_json(j.at("right"), nodes);
  nodes[at].left = left;
  nodes[at].right = right;
  return at;
}

}  // namespace

json tree_to_json(const gbt::RegressionTree& tree) { return node_to_json(tree.nodes(), 0); }

gbt::RegressionTree tree_from_json(const json& j) {
  std::vector<gbt::TreeNode> nodes;
  try {
    node_from_json(j, nodes);
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, fmt::format("malformed tree: {}", e.what()));
  }
  return gbt::RegressionTree(std::move(nodes));
}

void expect_format(const json& j, std::string_view format, int version) {
  if (!j.is_object() || j.value("format", std::string{}) != format || j.value("version", 0) != version)
    throw Error(Errc::SchemaError, fmt::format("expected a {} v{} document", format, version));
}

}  // namespace tcp::detail
