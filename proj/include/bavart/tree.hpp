#pragma once

// Regression trees for the sum-of-trees mean: structure, the branching-process
// prior, conjugate leaf updates and the Metropolis-Hastings proposal kernel
// (grow / prune / swap / change).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bavart/error.hpp"
#include "bavart/rng.hpp"

namespace bavart {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Observation goes left ("yes") when x[covariate] <= threshold.
struct SplitRule {
  int covariate = -1;
  double threshold = 0.0;

  friend bool operator==(const SplitRule&, const SplitRule&) = default;
};

struct TreeNode {
  int parent = -1;
  int left = -1;
  int right = -1;
  int depth = 0;
  SplitRule rule;
  double mu = 0.0;
  bool live = true;

  bool is_leaf() const noexcept { return left < 0; }
};

/// Binary tree stored in a node arena. Node ids stay stable across grow and
/// prune; pruned slots are recycled.
class DecisionTree {
 public:
  static constexpr int kRoot = 0;

  explicit DecisionTree(double mu = 0.0) { nodes_.push_back(TreeNode{.rule = {}, .mu = mu}); }

  const TreeNode& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  TreeNode& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t capacity() const noexcept { return nodes_.size(); }

  /// Split a leaf; returns the id of the new left child (right child id is
  /// returned by node(leaf).right).
  int grow(int leaf, SplitRule rule, double mu_left = 0.0, double mu_right = 0.0) {
    const int d = node(leaf).depth + 1;
    const int l = allocate(TreeNode{.parent = leaf, .depth = d, .rule = {}, .mu = mu_left});
    const int r = allocate(TreeNode{.parent = leaf, .depth = d, .rule = {}, .mu = mu_right});
    TreeNode& n = node(leaf);
    n.left = l;
    n.right = r;
    n.rule = rule;
    return l;
  }

  /// Collapse an internal node whose children are both leaves.
  void prune(int id, double mu = 0.0) {
    TreeNode& n = node(id);
    if (n.is_leaf() || !node(n.left).is_leaf() || !node(n.right).is_leaf())
      throw runtime_error("tree.prune", "prune requires two terminal children");
    release(n.left);
    release(n.right);
    n.left = n.right = -1;
    n.rule = SplitRule{};
    n.mu = mu;
  }

  /// Live node ids in pre-order (node, left subtree, right subtree).
  std::vector<int> preorder(int from = kRoot) const {
    std::vector<int> out;
    std::vector<int> stack{from};
    while (!stack.empty()) {
      const int id = stack.back();
      stack.pop_back();
      out.push_back(id);
      const TreeNode& n = node(id);
      if (!n.is_leaf()) {
        stack.push_back(n.right);
        stack.push_back(n.left);
      }
    }
    return out;
  }

  std::vector<int> leaves() const {
    std::vector<int> out;
    for (int id : preorder())
      if (node(id).is_leaf()) out.push_back(id);
    return out;
  }

  std::vector<int> internal_nodes() const {
    std::vector<int> out;
    for (int id : preorder())
      if (!node(id).is_leaf()) out.push_back(id);
    return out;
  }

  /// Internal nodes whose two children are terminal (prunable).
  std::vector<int> nog_nodes() const {
    std::vector<int> out;
    for (int id : preorder()) {
      const TreeNode& n = node(id);
      if (!n.is_leaf() && node(n.left).is_leaf() && node(n.right).is_leaf()) out.push_back(id);
    }
    return out;
  }

  /// (parent, child) pairs where both are internal; candidates for a swap.
  std::vector<std::pair<int, int>> swap_pairs() const {
    std::vector<std::pair<int, int>> out;
    for (int id : preorder()) {
      const TreeNode& n = node(id);
      if (n.is_leaf()) continue;
      if (!node(n.left).is_leaf()) out.emplace_back(id, n.left);
      if (!node(n.right).is_leaf()) out.emplace_back(id, n.right);
    }
    return out;
  }

  std::size_t leaf_count() const { return leaves().size(); }
  std::size_t internal_count() const { return internal_nodes().size(); }
  bool is_stump() const { return node(kRoot).is_leaf(); }

  int max_depth() const {
    int d = 0;
    for (int id : preorder()) d = std::max(d, node(id).depth);
    return d;
  }

  template <class Row>
  int find_leaf(const Row& x) const {
    int id = kRoot;
    while (!node(id).is_leaf()) {
      const TreeNode& n = node(id);
      id = x[n.rule.covariate] <= n.rule.threshold ? n.left : n.right;
    }
    return id;
  }

  template <class Row>
  double evaluate(const Row& x) const {
    return node(find_leaf(x)).mu;
  }

  /// Canonical text of the structure (rules only, no leaf values).
  std::string structure_key() const {
    std::string key;
    for (int id : preorder()) {
      const TreeNode& n = node(id);
      if (n.is_leaf()) {
        key += 'L';
      } else {
        char buf[32];
        auto end = std::to_chars(buf, buf + sizeof(buf), n.rule.threshold).ptr;
        key += '(' + std::to_string(n.rule.covariate) + ':' + std::string(buf, end) + ')';
      }
    }
    return key;
  }

 private:
  int allocate(TreeNode n) {
    if (!free_.empty()) {
      const int id = free_.back();
      free_.pop_back();
      nodes_[static_cast<std::size_t>(id)] = n;
      return id;
    }
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  void release(int id) {
    node(id).live = false;
    free_.push_back(id);
  }

  std::vector<TreeNode> nodes_;
  std::vector<int> free_;
};

template <class Row>
double evaluate(const DecisionTree& tree, const Row& x) {
  return tree.evaluate(x);
}

struct TreePriorConfig {
  double alpha = 0.95;
  double beta = 2.0;
  double leaf_variance = 1.0;  // sigma^2_mu
  int min_leaf_size = 5;
  int max_depth = std::numeric_limits<int>::max();  // nodes at this depth never split

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("tree.alpha", "alpha must lie in (0,1)");
    if (!(beta >= 0.0)) throw config_error("tree.beta", "beta must be non-negative");
    if (!(leaf_variance >= 0.0)) throw config_error("tree.leaf_variance", "leaf variance must be non-negative");
    if (min_leaf_size < 1) throw config_error("tree.min_leaf_size", "minimum leaf size must be positive");
  }
};

/// Prior probability that a node at depth d is split: alpha (1+d)^-beta.
inline double split_probability(int depth, const TreePriorConfig& cfg) {
  if (depth >= cfg.max_depth) return 0.0;
  return cfg.alpha * std::pow(1.0 + depth, -cfg.beta);
}

/// range / (2 s sqrt(N)): the prior leaf scale before any squaring.
inline double leaf_scale(double range, double prior_sds, int n_trees) {
  if (!(range > 0.0)) throw runtime_error("tree.range", "response range must be positive (constant series?)");
  if (n_trees < 1) throw config_error("model.trees", "tree count must be positive");
  return range / (2.0 * prior_sds * std::sqrt(static_cast<double>(n_trees)));
}

/// Leaf variance implied by leaf_scale(); by default the scale is read as a
/// standard deviation and squared.
inline double leaf_variance(double range, double prior_sds, int n_trees, bool scale_is_stddev = true) {
  const double s = leaf_scale(range, prior_sds, n_trees);
  return scale_is_stddev ? s * s : s;
}

// ---------------------------------------------------------------------------
// Design with per-column ranks

/// Covariate matrix plus, for each column, the sorted distinct values and the
/// rank of every cell among them. Thresholds are always observed values.
class TreeData {
 public:
  TreeData() = default;
  explicit TreeData(Eigen::MatrixXd X) : X_(std::move(X)) {
    const Eigen::Index n = X_.rows();
    const Eigen::Index k = X_.cols();
    ranks_.resize(n, k);
    distinct_.resize(static_cast<std::size_t>(k));
    for (Eigen::Index j = 0; j < k; ++j) {
      auto& vals = distinct_[static_cast<std::size_t>(j)];
      vals.assign(X_.col(j).data(), X_.col(j).data() + n);
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      for (Eigen::Index i = 0; i < n; ++i)
        ranks_(i, j) = static_cast<int>(std::lower_bound(vals.begin(), vals.end(), X_(i, j)) - vals.begin());
    }
  }

  const Eigen::MatrixXd& X() const noexcept { return X_; }
  int n() const noexcept { return static_cast<int>(X_.rows()); }
  int k() const noexcept { return static_cast<int>(X_.cols()); }
  int rank(int i, int j) const { return ranks_(i, j); }
  double value(int j, int r) const { return distinct_[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)]; }

  /// Rank of `v` in column j, or -1 when v is not an observed value.
  int rank_of(int j, double v) const {
    const auto& vals = distinct_[static_cast<std::size_t>(j)];
    auto it = std::lower_bound(vals.begin(), vals.end(), v);
    if (it == vals.end() || *it != v) return -1;
    return static_cast<int>(it - vals.begin());
  }

  bool goes_left(int i, const SplitRule& r) const { return X_(i, r.covariate) <= r.threshold; }

  /// True when covariate j takes at least two values among `obs`.
  bool varies(std::span<const int> obs, int j) const {
    if (obs.empty()) return false;
    const int first = ranks_(obs[0], j);
    for (int i : obs)
      if (ranks_(i, j) != first) return true;
    return false;
  }

  /// Sorted distinct ranks of covariate j among `obs`.
  void distinct_ranks(std::span<const int> obs, int j, std::vector<int>& out) const {
    out.clear();
    const auto d = distinct_[static_cast<std::size_t>(j)].size();
    if (d <= 4 * obs.size()) {
      thread_local std::vector<char> seen;
      seen.assign(d, 0);
      for (int i : obs) seen[static_cast<std::size_t>(ranks_(i, j))] = 1;
      for (std::size_t r = 0; r < d; ++r)
        if (seen[r]) out.push_back(static_cast<int>(r));
      return;
    }
    for (int i : obs) out.push_back(ranks_(i, j));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }

  /// Covariates with at least two distinct values among `obs`.
  std::vector<int> splittable_covariates(std::span<const int> obs) const {
    std::vector<int> out;
    for (int j = 0; j < k(); ++j)
      if (varies(obs, j)) out.push_back(j);
    return out;
  }

  bool splittable(std::span<const int> obs) const {
    for (int j = 0; j < k(); ++j)
      if (varies(obs, j)) return true;
    return false;
  }

 private:
  Eigen::MatrixXd X_;
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> ranks_;
  std::vector<std::vector<double>> distinct_;
};

/// Leaf index of every observation.
inline std::vector<int> route(const DecisionTree& tree, const TreeData& data) {
  std::vector<int> leaf(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) leaf[static_cast<std::size_t>(i)] = tree.find_leaf(data.X().row(i));
  return leaf;
}

/// Observations grouped by node id (only leaves are populated).
inline std::vector<std::vector<int>> leaf_members(const DecisionTree& tree, const TreeData& data) {
  std::vector<std::vector<int>> members(tree.capacity());
  for (int i = 0; i < data.n(); ++i)
    members[static_cast<std::size_t>(tree.find_leaf(data.X().row(i)))].push_back(i);
  return members;
}

/// Observations whose path passes through node `id`.
inline std::vector<int> observations_at(const DecisionTree& tree, const TreeData& data, int id) {
  std::vector<std::pair<int, bool>> path;  // ancestor, went-left
  for (int child = id, p = tree.node(id).parent; p >= 0; child = p, p = tree.node(p).parent)
    path.emplace_back(p, tree.node(p).left == child);
  std::vector<int> obs;
  obs.reserve(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) {
    bool in = true;
    for (auto it = path.rbegin(); it != path.rend() && in; ++it)
      in = data.goes_left(i, tree.node(it->first).rule) == it->second;
    if (in) obs.push_back(i);
  }
  return obs;
}

// ---------------------------------------------------------------------------
// Conjugate leaf model: R_i ~ N(mu, w_i), mu ~ N(0, sigma2_mu)

struct LeafStats {
  int n = 0;
  double sum_r_w = 0.0;   // sum R_i / w_i
  double sum_inv_w = 0.0;  // sum 1 / w_i
  double sum_r2_w = 0.0;  // sum R_i^2 / w_i
  double sum_log_w = 0.0;

  void add(double r, double w) {
    ++n;
    sum_r_w += r / w;
    sum_inv_w += 1.0 / w;
    sum_r2_w += r * r / w;
    sum_log_w += std::log(w);
  }
};

inline LeafStats leaf_stats(std::span<const int> obs, std::span<const double> r, std::span<const double> w) {
  LeafStats s;
  for (int i : obs) {
    const double wi = w[static_cast<std::size_t>(i)];
    if (!(wi > 0.0)) throw runtime_error("tree.variance", "observation variances must be positive");
    s.add(r[static_cast<std::size_t>(i)], wi);
  }
  return s;
}

/// log N(R; 0, diag(w) + sigma2_mu 11') via the precision-weighted update.
inline double leaf_log_marginal(const LeafStats& s, double sigma2_mu) {
  if (s.n == 0) throw runtime_error("tree.empty_leaf", "empty leaf");
  const double shrink = 1.0 + sigma2_mu * s.sum_inv_w;  // sigma2_mu * posterior precision
  return -0.5 * s.n * std::log(2.0 * std::numbers::pi) - 0.5 * s.sum_log_w - 0.5 * s.sum_r2_w -
         0.5 * std::log(shrink) + 0.5 * sigma2_mu * s.sum_r_w * s.sum_r_w / shrink;
}

struct LeafPosterior {
  double mean;
  double variance;
};

inline LeafPosterior leaf_posterior(const LeafStats& s, double sigma2_mu) {
  const double shrink = 1.0 + sigma2_mu * s.sum_inv_w;
  return {sigma2_mu * s.sum_r_w / shrink, sigma2_mu / shrink};
}

/// Sum over leaves of the integrated (leaf mean marginalised) log-likelihood.
inline double log_marginal_likelihood(const DecisionTree& tree, const TreeData& data, std::span<const double> r,
                                      std::span<const double> w, double sigma2_mu) {
  if (r.size() != w.size() || static_cast<int>(r.size()) != data.n())
    throw runtime_error("tree.dimensions", "residual, variance and design lengths differ");
  const auto members = leaf_members(tree, data);
  double total = 0.0;
  for (int id : tree.leaves()) total += leaf_log_marginal(leaf_stats(members[static_cast<std::size_t>(id)], r, w), sigma2_mu);
  return total;
}

/// Redraw every leaf mean from its Gaussian full conditional.
inline void sample_leaf_params(DecisionTree& tree, const std::vector<std::vector<int>>& members,
                               std::span<const double> r, std::span<const double> w, double sigma2_mu, Rng& rng) {
  for (int id : tree.leaves()) {
    const auto& obs = members[static_cast<std::size_t>(id)];
    if (obs.empty()) throw runtime_error("tree.empty_leaf", "empty leaf");
    const auto post = leaf_posterior(leaf_stats(obs, r, w), sigma2_mu);
    tree.node(id).mu = post.mean + std::sqrt(post.variance) * rng.normal();
  }
}

inline void sample_leaf_params(DecisionTree& tree, const TreeData& data, std::span<const double> r,
                               std::span<const double> w, double sigma2_mu, Rng& rng) {
  sample_leaf_params(tree, leaf_members(tree, data), r, w, sigma2_mu, rng);
}

// ---------------------------------------------------------------------------
// Tree prior

namespace detail {

// Log prior of the rule at a node holding `obs`: uniform covariate among those
// that vary, uniform threshold among the node's values except the largest.
// -inf when the rule is not one the prior can generate at this node.
inline double log_rule_prior(const TreeData& data, std::span<const int> obs, const SplitRule& rule,
                             std::vector<int>& scratch) {
  if (rule.covariate < 0 || rule.covariate >= data.k() || !data.varies(obs, rule.covariate)) return kNegInf;
  int n_vars = 0;
  for (int j = 0; j < data.k(); ++j) n_vars += data.varies(obs, j) ? 1 : 0;
  data.distinct_ranks(obs, rule.covariate, scratch);
  const int r = data.rank_of(rule.covariate, rule.threshold);
  if (r < 0 || r == scratch.back() || !std::binary_search(scratch.begin(), scratch.end(), r)) return kNegInf;
  return -std::log(static_cast<double>(n_vars)) - std::log(static_cast<double>(scratch.size() - 1));
}

inline void partition(const TreeData& data, std::span<const int> obs, const SplitRule& rule, std::vector<int>& left,
                      std::vector<int>& right) {
  left.clear();
  right.clear();
  for (int i : obs) (data.goes_left(i, rule) ? left : right).push_back(i);
}

}  // namespace detail

/// Log prior of the subtree rooted at `id` plus (when `r` is non-empty) the
/// integrated log-likelihood of its leaves, given the observations reaching it.
inline double subtree_log_score(const DecisionTree& tree, int id, std::span<const int> obs, const TreeData& data,
                                const TreePriorConfig& prior, std::span<const double> r, std::span<const double> w) {
  const TreeNode& n = tree.node(id);
  if (n.is_leaf()) {
    if (static_cast<int>(obs.size()) < prior.min_leaf_size || obs.empty()) return kNegInf;
    const double p = data.splittable(obs) ? split_probability(n.depth, prior) : 0.0;
    double s = std::log1p(-p);
    if (!r.empty()) s += leaf_log_marginal(leaf_stats(obs, r, w), prior.leaf_variance);
    return s;
  }
  const double p = split_probability(n.depth, prior);
  if (p <= 0.0) return kNegInf;
  std::vector<int> scratch;
  const double rule_lp = detail::log_rule_prior(data, obs, n.rule, scratch);
  if (rule_lp == kNegInf) return kNegInf;
  std::vector<int> left, right;
  detail::partition(data, obs, n.rule, left, right);
  const double sl = subtree_log_score(tree, n.left, left, data, prior, r, w);
  if (sl == kNegInf) return kNegInf;
  return std::log(p) + rule_lp + sl + subtree_log_score(tree, n.right, right, data, prior, r, w);
}

inline std::vector<int> all_observations(const TreeData& data) {
  std::vector<int> obs(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) obs[static_cast<std::size_t>(i)] = i;
  return obs;
}

/// Log prior probability of the whole tree (includes the minimum leaf size
/// truncation, so invalid trees score -inf).
inline double log_tree_prior(const DecisionTree& tree, const TreeData& data, const TreePriorConfig& prior) {
  return subtree_log_score(tree, DecisionTree::kRoot, all_observations(data), data, prior, {}, {});
}

/// Draw a tree from the branching-process prior on `data` (no leaf-size
/// truncation; leaf means are left at zero).
inline DecisionTree sample_prior_tree(const TreePriorConfig& prior, const TreeData& data, Rng& rng) {
  DecisionTree tree;
  std::vector<std::pair<int, std::vector<int>>> stack{{DecisionTree::kRoot, all_observations(data)}};
  std::vector<int> ranks, left, right;
  while (!stack.empty()) {
    auto [id, obs] = std::move(stack.back());
    stack.pop_back();
    if (rng.uniform() >= split_probability(tree.node(id).depth, prior)) continue;
    const auto vars = data.splittable_covariates(obs);
    if (vars.empty()) continue;
    const int j = vars[rng.index(vars.size())];
    data.distinct_ranks(obs, j, ranks);
    const SplitRule rule{j, data.value(j, ranks[rng.index(ranks.size() - 1)])};
    detail::partition(data, obs, rule, left, right);
    tree.grow(id, rule);
    stack.emplace_back(tree.node(id).right, right);
    stack.emplace_back(tree.node(id).left, left);
  }
  return tree;
}

// ---------------------------------------------------------------------------
// Proposal kernel

enum class MoveType { Grow, Prune, Swap, Change, None };

inline const char* to_string(MoveType m) {
  switch (m) {
    case MoveType::Grow: return "grow";
    case MoveType::Prune: return "prune";
    case MoveType::Swap: return "swap";
    case MoveType::Change: return "change";
    case MoveType::None: return "none";
  }
  return "?";
}

struct MoveProbabilities {
  double grow = 0.25;
  double prune = 0.25;
  double swap = 0.4;
  double change = 0.1;
};

/// What the kernel needs to know about a tree to weigh its moves.
struct TreeMoveSummary {
  std::vector<int> splittable_leaves;
  std::vector<int> nogs;
  std::vector<int> internal;
  std::vector<std::pair<int, int>> swap_pairs;
  std::vector<std::vector<int>> members;  // by node id, leaves only

  /// Move-type probabilities renormalised over the moves available here.
  std::array<double, 4> move_probabilities(const MoveProbabilities& base) const {
    std::array<double, 4> p{splittable_leaves.empty() ? 0.0 : base.grow, nogs.empty() ? 0.0 : base.prune,
                            swap_pairs.empty() ? 0.0 : base.swap, internal.empty() ? 0.0 : base.change};
    const double total = p[0] + p[1] + p[2] + p[3];
    if (total > 0.0)
      for (double& x : p) x /= total;
    return p;
  }
};

inline TreeMoveSummary summarize(const DecisionTree& tree, const TreeData& data) {
  TreeMoveSummary s;
  s.members = leaf_members(tree, data);
  for (int id : tree.leaves())
    if (data.splittable(s.members[static_cast<std::size_t>(id)])) s.splittable_leaves.push_back(id);
  s.nogs = tree.nog_nodes();
  s.internal = tree.internal_nodes();
  s.swap_pairs = tree.swap_pairs();
  return s;
}

struct Proposal {
  DecisionTree candidate;
  double log_q_ratio = 0.0;  // log q(candidate -> tree) - log q(tree -> candidate)
  MoveType move = MoveType::None;
  int node = -1;  // root of the changed subtree (same id in both trees)
};

namespace detail {

inline double log_or_neginf(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

inline int move_index(MoveType m) { return static_cast<int>(m); }

// Log probability of choosing `rule` among the node's candidate rules.
inline double log_rule_choice(const TreeData& data, std::span<const int> obs, const SplitRule& rule) {
  std::vector<int> scratch;
  return log_rule_prior(data, obs, rule, scratch);
}

}  // namespace detail

/// Grow leaf `leaf` with `rule`; the proposal ratio is exact given `summary`
/// of the current tree.
inline Proposal make_grow(const DecisionTree& tree, const TreeMoveSummary& summary, int leaf, const SplitRule& rule,
                          const TreeData& data, const MoveProbabilities& base = {}) {
  Proposal p{tree, 0.0, MoveType::Grow, leaf};
  p.candidate.grow(leaf, rule);
  const auto& obs = summary.members[static_cast<std::size_t>(leaf)];
  const TreeMoveSummary next = summarize(p.candidate, data);
  const double fwd = detail::log_or_neginf(summary.move_probabilities(base)[0]) -
                     std::log(static_cast<double>(summary.splittable_leaves.size())) +
                     detail::log_rule_choice(data, obs, rule);
  const double rev = detail::log_or_neginf(next.move_probabilities(base)[1]) -
                     std::log(static_cast<double>(next.nogs.size()));
  p.log_q_ratio = rev - fwd;
  return p;
}

inline Proposal make_prune(const DecisionTree& tree, const TreeMoveSummary& summary, int nog, const TreeData& data,
                           const MoveProbabilities& base = {}) {
  Proposal p{tree, 0.0, MoveType::Prune, nog};
  const SplitRule old_rule = tree.node(nog).rule;
  p.candidate.prune(nog);
  const TreeMoveSummary next = summarize(p.candidate, data);
  const auto& obs = next.members[static_cast<std::size_t>(nog)];
  const double fwd = detail::log_or_neginf(summary.move_probabilities(base)[1]) -
                     std::log(static_cast<double>(summary.nogs.size()));
  double rev = kNegInf;
  if (!next.splittable_leaves.empty())
    rev = detail::log_or_neginf(next.move_probabilities(base)[0]) -
          std::log(static_cast<double>(next.splittable_leaves.size())) +
          detail::log_rule_choice(data, obs, old_rule);
  p.log_q_ratio = rev - fwd;
  return p;
}

inline Proposal make_change(const DecisionTree& tree, const TreeMoveSummary& summary, int id, const SplitRule& rule,
                            const TreeData& data, const MoveProbabilities& base = {}) {
  Proposal p{tree, 0.0, MoveType::Change, id};
  const SplitRule old_rule = tree.node(id).rule;
  p.candidate.node(id).rule = rule;
  const TreeMoveSummary next = summarize(p.candidate, data);
  const auto obs = observations_at(tree, data, id);
  p.log_q_ratio = detail::log_or_neginf(next.move_probabilities(base)[3]) -
                  detail::log_or_neginf(summary.move_probabilities(base)[3]) +
                  detail::log_rule_choice(data, obs, old_rule) - detail::log_rule_choice(data, obs, rule);
  return p;
}

inline Proposal make_swap(const DecisionTree& tree, const TreeMoveSummary& summary, std::pair<int, int> pair,
                          const TreeData& data, const MoveProbabilities& base = {}) {
  Proposal p{tree, 0.0, MoveType::Swap, pair.first};
  std::swap(p.candidate.node(pair.first).rule, p.candidate.node(pair.second).rule);
  const TreeMoveSummary next = summarize(p.candidate, data);
  p.log_q_ratio = detail::log_or_neginf(next.move_probabilities(base)[2]) -
                  detail::log_or_neginf(summary.move_probabilities(base)[2]);
  return p;
}

namespace detail {

inline SplitRule draw_rule(const TreeData& data, std::span<const int> obs, Rng& rng) {
  const auto vars = data.splittable_covariates(obs);
  const int j = vars[rng.index(vars.size())];
  std::vector<int> ranks;
  data.distinct_ranks(obs, j, ranks);
  return SplitRule{j, data.value(j, ranks[rng.index(ranks.size() - 1)])};
}

}  // namespace detail

/// Draw a candidate from the four-move kernel. With no move available the
/// tree is returned unchanged with ratio 0 (move None).
inline Proposal propose_move(const DecisionTree& tree, const TreeMoveSummary& summary, const TreeData& data, Rng& rng,
                             const MoveProbabilities& base = {}) {
  const auto probs = summary.move_probabilities(base);
  if (probs[0] + probs[1] + probs[2] + probs[3] <= 0.0) return Proposal{tree, 0.0, MoveType::None, -1};
  switch (static_cast<MoveType>(rng.categorical(probs.data(), probs.size()))) {
    case MoveType::Grow: {
      const int leaf = summary.splittable_leaves[rng.index(summary.splittable_leaves.size())];
      const SplitRule rule = detail::draw_rule(data, summary.members[static_cast<std::size_t>(leaf)], rng);
      return make_grow(tree, summary, leaf, rule, data, base);
    }
    case MoveType::Prune:
      return make_prune(tree, summary, summary.nogs[rng.index(summary.nogs.size())], data, base);
    case MoveType::Swap:
      return make_swap(tree, summary, summary.swap_pairs[rng.index(summary.swap_pairs.size())], data, base);
    case MoveType::Change: {
      const int id = summary.internal[rng.index(summary.internal.size())];
      const SplitRule rule = detail::draw_rule(data, observations_at(tree, data, id), rng);
      return make_change(tree, summary, id, rule, data, base);
    }
    case MoveType::None: break;
  }
  return Proposal{tree, 0.0, MoveType::None, -1};
}

inline Proposal propose_move(const DecisionTree& tree, const TreeData& data, Rng& rng,
                             const MoveProbabilities& base = {}) {
  return propose_move(tree, summarize(tree, data), data, rng, base);
}

/// Log MH acceptance ratio: proposal ratio plus the change in integrated
/// likelihood and tree prior, evaluated on the changed subtree only.
inline double log_acceptance(const DecisionTree& tree, const Proposal& p, const TreeData& data,
                             std::span<const double> r, std::span<const double> w, const TreePriorConfig& prior) {
  if (p.move == MoveType::None || p.node < 0) return 0.0;
  if (p.log_q_ratio == kNegInf) return kNegInf;
  const auto obs = observations_at(tree, data, p.node);
  const double fresh = subtree_log_score(p.candidate, p.node, obs, data, prior, r, w);
  if (fresh == kNegInf) return kNegInf;
  const double old = subtree_log_score(tree, p.node, obs, data, prior, r, w);
  return p.log_q_ratio + fresh - old;
}

/// Replace `tree` by the candidate with probability min(1, exp(log ratio)).
inline bool mh_accept(DecisionTree& tree, Proposal&& p, const TreeData& data, std::span<const double> r,
                      std::span<const double> w, const TreePriorConfig& prior, Rng& rng) {
  const double la = log_acceptance(tree, p, data, r, w, prior);
  if (std::isnan(la) || la == kNegInf) return false;
  if (la >= 0.0 || std::log(rng.uniform()) < la) {
    tree = std::move(p.candidate);
    return true;
  }
  return false;
}

// ---------------------------------------------------------------------------

/// Internal-node counts per covariate (rows) and equation (columns).
inline Eigen::MatrixXi splitting_rule_counts(const std::vector<std::vector<DecisionTree>>& forests, int n_covariates) {
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(n_covariates, static_cast<Eigen::Index>(forests.size()));
  for (std::size_t j = 0; j < forests.size(); ++j)
    for (const auto& tree : forests[j])
      for (int id : tree.internal_nodes()) ++counts(tree.node(id).rule.covariate, static_cast<Eigen::Index>(j));
  return counts;
}

/// Immutable forest in preorder layout, used for retained draws. An internal
/// node's left child is the next node; a leaf has covariate -1 and stores mu.
struct FlatNode {
  int covariate = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const noexcept { return covariate < 0; }
};

class FlatForest {
 public:
  FlatForest() = default;

  explicit FlatForest(const std::vector<DecisionTree>& forest) {
    for (const auto& tree : forest) {
      roots_.push_back(static_cast<int>(nodes_.size()));
      append(tree, DecisionTree::kRoot);
    }
  }

  /// Build from raw preorder nodes and tree start offsets.
  FlatForest(std::vector<FlatNode> nodes, std::vector<int> roots) : nodes_(std::move(nodes)), roots_(std::move(roots)) {}

  std::size_t tree_count() const noexcept { return roots_.size(); }
  const std::vector<FlatNode>& nodes() const noexcept { return nodes_; }
  const std::vector<int>& roots() const noexcept { return roots_; }

  /// Node index range [first, last) of tree t.
  std::pair<int, int> span_of(std::size_t t) const {
    const int last = t + 1 < roots_.size() ? roots_[t + 1] : static_cast<int>(nodes_.size());
    return {roots_[t], last};
  }

  template <class Row>
  double predict(const Row& x) const {
    double s = 0.0;
    for (int root : roots_) {
      int id = root;
      while (!nodes_[static_cast<std::size_t>(id)].is_leaf()) {
        const FlatNode& n = nodes_[static_cast<std::size_t>(id)];
        id = x[n.covariate] <= n.value ? id + 1 : n.right;
      }
      s += nodes_[static_cast<std::size_t>(id)].value;
    }
    return s;
  }

  DecisionTree tree(std::size_t t) const {
    DecisionTree out;
    rebuild(out, DecisionTree::kRoot, roots_[t]);
    return out;
  }

 private:
  void append(const DecisionTree& tree, int id) {
    const TreeNode& n = tree.node(id);
    const auto at = nodes_.size();
    if (n.is_leaf()) {
      nodes_.push_back({-1, -1, n.mu});
      return;
    }
    nodes_.push_back({n.rule.covariate, -1, n.rule.threshold});
    append(tree, n.left);
    nodes_[at].right = static_cast<int>(nodes_.size());
    append(tree, n.right);
  }

  void rebuild(DecisionTree& out, int target, int id) const {
    const FlatNode& n = nodes_[static_cast<std::size_t>(id)];
    if (n.is_leaf()) {
      out.node(target).mu = n.value;
      return;
    }
    out.grow(target, SplitRule{n.covariate, n.value});
    const int l = out.node(target).left, r = out.node(target).right;
    rebuild(out, l, id + 1);
    rebuild(out, r, n.right);
  }

  std::vector<FlatNode> nodes_;
  std::vector<int> roots_;
};

template <class Row>
double forest_predict(const FlatForest& forest, const Row& x) {
  return forest.predict(x);
}

/// Counts for one retained draw of flattened forests.
inline Eigen::MatrixXi splitting_rule_counts(const std::vector<FlatForest>& forests, int n_covariates) {
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(n_covariates, static_cast<Eigen::Index>(forests.size()));
  for (std::size_t j = 0; j < forests.size(); ++j)
    for (const FlatNode& n : forests[j].nodes())
      if (!n.is_leaf()) ++counts(n.covariate, static_cast<Eigen::Index>(j));
  return counts;
}

}  // namespace bavart
