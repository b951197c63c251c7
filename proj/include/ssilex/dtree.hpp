#pragma once

// Binary-feature decision tree: information-gain induction with a minimum
// leaf size, pessimistic-error subtree replacement, and stratified folds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "ssilex/corpus.hpp"
#include "ssilex/rng.hpp"

namespace ssilex {

struct Instance {
  std::string case_id;
  std::vector<bool> features;
  Label label = Label::NonSSI;
};

struct ClassCounts {
  std::size_t ssi = 0;
  std::size_t non_ssi = 0;

  std::size_t total() const { return ssi + non_ssi; }
  std::size_t of(Label l) const { return l == Label::SSI ? ssi : non_ssi; }
  void add(Label l) { (l == Label::SSI ? ssi : non_ssi) += 1; }
  // Ties go to NonSSI.
  Label majority() const { return ssi > non_ssi ? Label::SSI : Label::NonSSI; }
  bool pure() const { return ssi == 0 || non_ssi == 0; }

  bool operator==(const ClassCounts&) const = default;
};

inline double entropy(const ClassCounts& c) {
  const double n = static_cast<double>(c.total());
  if (n == 0) return 0.0;
  double h = 0.0;
  for (auto k : {c.ssi, c.non_ssi}) {
    if (k == 0) continue;
    const double p = static_cast<double>(k) / n;
    h -= p * std::log2(p);
  }
  return h;
}

inline ClassCounts count_labels(std::span<const Instance> data, std::span<const std::size_t> rows) {
  ClassCounts c;
  for (auto r : rows) c.add(data[r].label);
  return c;
}

namespace detail {

struct SplitCounts {
  ClassCounts branch[2];
};

inline SplitCounts split_counts(std::span<const Instance> data, std::span<const std::size_t> rows,
                                std::size_t attribute) {
  SplitCounts s;
  for (auto r : rows) s.branch[data[r].features[attribute] ? 1 : 0].add(data[r].label);
  return s;
}

inline double gain_from(const ClassCounts& parent, const SplitCounts& s) {
  const double n = static_cast<double>(parent.total());
  if (n == 0) return 0.0;
  double remainder = 0.0;
  for (const auto& b : s.branch) remainder += static_cast<double>(b.total()) / n * entropy(b);
  return std::max(0.0, entropy(parent) - remainder);
}

}  // namespace detail

inline double information_gain(std::span<const Instance> data, std::span<const std::size_t> rows,
                               std::size_t attribute) {
  return detail::gain_from(count_labels(data, rows), detail::split_counts(data, rows, attribute));
}

inline double information_gain(std::span<const Instance> data, std::size_t attribute) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  return information_gain(data, rows, attribute);
}

// Internal nodes test one boolean attribute and have children {false, true};
// leaves carry a label. Every node keeps the class counts of the training
// rows that reached it.
struct TreeNode {
  ClassCounts counts;
  Label label = Label::NonSSI;
  std::optional<std::size_t> attribute;
  std::vector<TreeNode> children;

  bool is_leaf() const { return !attribute.has_value(); }
  static TreeNode leaf(ClassCounts counts, Label label) { return TreeNode{counts, label, std::nullopt, {}}; }
};

inline std::size_t node_count(const TreeNode& t) {
  std::size_t n = 1;
  for (const auto& c : t.children) n += node_count(c);
  return n;
}

inline std::size_t tree_depth(const TreeNode& t) {
  std::size_t d = 0;
  for (const auto& c : t.children) d = std::max(d, 1 + tree_depth(c));
  return d;
}

inline Label classify(const TreeNode& t, const std::vector<bool>& features) {
  const TreeNode* node = &t;
  while (!node->is_leaf()) node = &node->children[features[*node->attribute] ? 1 : 0];
  return node->label;
}

namespace detail {

inline TreeNode grow(std::span<const Instance> data, std::vector<std::size_t> rows, std::vector<std::size_t> attributes,
                     std::size_t min_leaf, Label parent_majority) {
  const ClassCounts counts = count_labels(data, rows);
  if (rows.empty()) return TreeNode::leaf(counts, parent_majority);
  if (counts.pure()) return TreeNode::leaf(counts, data[rows.front()].label);
  const Label majority = counts.majority();
  if (attributes.empty()) return TreeNode::leaf(counts, majority);

  // Candidates split the rows non-trivially and leave each branch with either
  // zero or at least min_leaf rows. Gain ties go to the earlier attribute.
  std::optional<std::size_t> best;
  double best_gain = -1.0;
  for (auto a : attributes) {
    const auto s = split_counts(data, rows, a);
    const auto n0 = s.branch[0].total(), n1 = s.branch[1].total();
    if (n0 == 0 || n1 == 0) continue;
    if (n0 < min_leaf || n1 < min_leaf) continue;
    const double g = gain_from(counts, s);
    if (g > best_gain) {
      best_gain = g;
      best = a;
    }
  }
  if (!best) return TreeNode::leaf(counts, majority);

  TreeNode node{counts, majority, *best, {}};
  std::vector<std::size_t> rest;
  for (auto a : attributes)
    if (a != *best) rest.push_back(a);
  for (int v = 0; v < 2; ++v) {
    std::vector<std::size_t> subset;
    for (auto r : rows)
      if (data[r].features[*best] == (v == 1)) subset.push_back(r);
    node.children.push_back(grow(data, std::move(subset), rest, min_leaf, majority));
  }
  return node;
}

}  // namespace detail

// Decision tree construction over the given attribute indices (in priority
// order for gain ties).
inline TreeNode dtc(std::span<const Instance> training, std::span<const std::size_t> attributes,
                    std::size_t min_leaf = 2) {
  if (training.empty()) throw std::invalid_argument("dtc: empty training set");
  if (min_leaf < 1) throw std::invalid_argument("dtc: min_leaf must be >= 1");
  std::vector<std::size_t> rows(training.size());
  std::iota(rows.begin(), rows.end(), 0);
  return detail::grow(training, std::move(rows), {attributes.begin(), attributes.end()}, min_leaf, Label::NonSSI);
}

inline TreeNode dtc(std::span<const Instance> training, std::size_t min_leaf = 2) {
  std::vector<std::size_t> attributes(training.empty() ? 0 : training.front().features.size());
  std::iota(attributes.begin(), attributes.end(), 0);
  return dtc(training, attributes, min_leaf);
}

// One-sided standard normal quantile at 1 - confidence.
inline double confidence_z(double confidence) {
  if (!(confidence > 0.0 && confidence < 0.5))
    throw std::invalid_argument("pruning confidence must lie in (0, 0.5)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - confidence);
}

// Upper confidence bound on the error rate of a node covering n rows with
// `errors` misclassified.
inline double pessimistic_error_rate(std::size_t errors, std::size_t n, double z) {
  if (n == 0) return 0.0;
  const double N = static_cast<double>(n);
  const double f = static_cast<double>(errors) / N;
  const double z2 = z * z;
  return (f + z2 / (2 * N) + z * std::sqrt(f / N - f * f / N / N + z2 / (4 * N * N))) / (1 + z2 / N);
}

inline double pessimistic_errors(std::size_t errors, std::size_t n, double z) {
  return static_cast<double>(n) * pessimistic_error_rate(errors, n, z);
}

namespace detail {

inline void recount(TreeNode& node, std::span<const Instance> data, std::span<const std::size_t> rows) {
  node.counts = count_labels(data, rows);
  if (node.is_leaf()) return;
  std::vector<std::size_t> branch[2];
  for (auto r : rows) branch[data[r].features[*node.attribute] ? 1 : 0].push_back(r);
  for (int v = 0; v < 2; ++v) recount(node.children[static_cast<std::size_t>(v)], data, branch[v]);
}

// Returns the estimated errors of the (possibly pruned) subtree.
inline double prune_node(TreeNode& node, double z) {
  if (node.is_leaf()) {
    const auto n = node.counts.total();
    return pessimistic_errors(n - node.counts.of(node.label), n, z);
  }
  double subtree = 0.0;
  for (auto& child : node.children) subtree += prune_node(child, z);
  const auto n = node.counts.total();
  const Label label = n ? node.counts.majority() : node.label;
  const double as_leaf = pessimistic_errors(n - node.counts.of(label), n, z);
  if (as_leaf <= subtree) {
    node = TreeNode::leaf(node.counts, label);
    return as_leaf;
  }
  return subtree;
}

}  // namespace detail

// Bottom-up subtree replacement: a subtree becomes a majority leaf when the
// leaf's pessimistic error estimate does not exceed the sum of its children's.
inline TreeNode prune(TreeNode tree, std::span<const Instance> training, double confidence = 0.25) {
  const double z = confidence_z(confidence);
  std::vector<std::size_t> rows(training.size());
  std::iota(rows.begin(), rows.end(), 0);
  detail::recount(tree, training, rows);
  detail::prune_node(tree, z);
  return tree;
}

struct Folds {
  std::vector<std::vector<std::size_t>> folds;  // instance indices, ascending
  // Some label had fewer members than folds, so at least one fold lacks it.
  bool label_underfilled = false;
};

// Each label's members are shuffled and dealt round-robin, continuing the
// deal across labels (SSI first), so per-label fold counts differ by <= 1.
inline Folds stratified_kfold(std::span<const Label> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_kfold: k must be >= 2");
  if (k > labels.size())
    throw std::invalid_argument("stratified_kfold: k=" + std::to_string(k) + " exceeds " +
                                std::to_string(labels.size()) + " instances");
  Rng rng(seed);
  Folds out;
  out.folds.resize(k);
  std::size_t next = 0;
  for (Label l : {Label::SSI, Label::NonSSI}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == l) members.push_back(i);
    if (!members.empty() && members.size() < k) out.label_underfilled = true;
    rng.shuffle(members);
    for (auto m : members) {
      out.folds[next].push_back(m);
      next = (next + 1) % k;
    }
  }
  for (auto& f : out.folds) std::sort(f.begin(), f.end());
  return out;
}

inline Folds stratified_kfold(std::span<const Instance> instances, std::size_t k, std::uint64_t seed) {
  std::vector<Label> labels;
  labels.reserve(instances.size());
  for (const auto& i : instances) labels.push_back(i.label);
  return stratified_kfold(labels, k, seed);
}

}  // namespace ssilex
