#include <algorithm>
#include <cmath>
#include <numeric>

#include "modad/detectors.hpp"
#include "modad/rng.hpp"

namespace modad {

namespace {

int build_node(IsolationTree& tree, const Matrix& x, std::vector<Eigen::Index>& rows, std::size_t lo,
               std::size_t hi, int depth, int height_limit, Rng& rng) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(IsolationNode{});
  const std::size_t size = hi - lo;
  auto make_leaf = [&] {
    tree.nodes[static_cast<std::size_t>(id)].size = size;
    return id;
  };
  if (depth >= height_limit || size <= 1) return make_leaf();

  // Random feature with a non-degenerate range; a few retries before giving up.
  const auto dim = static_cast<int>(x.cols());
  std::uniform_int_distribution<int> pick_feature(0, dim - 1);
  int feature = -1;
  double mn = 0.0, mx = 0.0;
  for (int attempt = 0; attempt < dim && feature < 0; ++attempt) {
    const int f = pick_feature(rng);
    mn = mx = x(rows[lo], f);
    for (std::size_t r = lo + 1; r < hi; ++r) {
      mn = std::min(mn, x(rows[r], f));
      mx = std::max(mx, x(rows[r], f));
    }
    if (mx > mn) feature = f;
  }
  if (feature < 0) return make_leaf();

  std::uniform_real_distribution<double> pick_split(mn, mx);
  const double split = pick_split(rng);
  const auto mid_it = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(lo),
                                     rows.begin() + static_cast<std::ptrdiff_t>(hi),
                                     [&](Eigen::Index r) { return x(r, feature) < split; });
  const auto mid = static_cast<std::size_t>(mid_it - rows.begin());

  const int left = build_node(tree, x, rows, lo, mid, depth + 1, height_limit, rng);
  const int right = build_node(tree, x, rows, mid, hi, depth + 1, height_limit, rng);
  IsolationNode& node = tree.nodes[static_cast<std::size_t>(id)];
  node.feature = feature;
  node.split = split;
  node.left = left;
  node.right = right;
  node.size = size;
  return id;
}

}  // namespace

double iforest_normalizer(std::size_t n) {
  if (n <= 1) return 0.0;
  double harmonic = 0.0;  // H(n - 1)
  for (std::size_t i = 1; i < n; ++i) harmonic += 1.0 / static_cast<double>(i);
  const auto nd = static_cast<double>(n);
  return 2.0 * harmonic - 2.0 * (nd - 1.0) / nd;
}

IforestModel fit_iforest(const Matrix& x, int trees, std::size_t subsample, std::uint64_t seed) {
  if (x.rows() < 8) throw ValidationError("isolation forest needs at least 8 points");
  if (trees < 1 || subsample < 2) throw ValidationError("isolation forest needs trees >= 1, subsample >= 2");
  IforestModel model;
  model.dim = static_cast<int>(x.cols());
  model.subsample_size = std::min<std::size_t>(subsample, static_cast<std::size_t>(x.rows()));
  model.normalizer = iforest_normalizer(model.subsample_size);
  const int height_limit =
      static_cast<int>(std::ceil(std::log2(static_cast<double>(model.subsample_size))));

  Rng rng(seed);
  std::vector<Eigen::Index> all(static_cast<std::size_t>(x.rows()));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  model.trees.resize(static_cast<std::size_t>(trees));
  for (auto& tree : model.trees) {
    // Partial shuffle draws the subsample without replacement.
    for (std::size_t i = 0; i < model.subsample_size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    std::vector<Eigen::Index> rows(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(model.subsample_size));
    build_node(tree, x, rows, 0, rows.size(), 0, height_limit, rng);
  }
  return model;
}

double iforest_anomaly(const IforestModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.dim) throw ShapeError("isolation forest: dimension mismatch");
  double total = 0.0;
  for (const auto& tree : model.trees) {
    int id = 0;
    int depth = 0;
    while (tree.nodes[static_cast<std::size_t>(id)].feature >= 0) {
      const IsolationNode& node = tree.nodes[static_cast<std::size_t>(id)];
      id = x[static_cast<std::size_t>(node.feature)] < node.split ? node.left : node.right;
      ++depth;
    }
    total += depth + iforest_normalizer(tree.nodes[static_cast<std::size_t>(id)].size);
  }
  const double mean_path = total / static_cast<double>(model.trees.size());
  return std::pow(2.0, -mean_path / model.normalizer);
}

}  // namespace modad
