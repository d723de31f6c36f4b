#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fragbn {

struct BnNode {
  std::string name;
  std::vector<std::string> states;
  std::vector<std::size_t> parents;  // node indices, in table order
  /// Row-major conditional table, first parent slowest, own state fastest.
  /// Empty for open inputs.
  std::vector<double> cpt;
  /// An input whose distribution is carried outside the model. It has no
  /// parents; default_prior is what close_with_defaults() would assign.
  bool open_input = false;
  std::vector<double> default_prior;

  std::size_t card() const noexcept { return states.size(); }
};

/// A materialized discrete Bayesian network. Nodes are stored in
/// topological order: every parent index is smaller than its child's.
class BayesNet {
 public:
  /// Appends a node; its parents must already be present. Throws
  /// InvalidQuery on a bad node and InvalidDistribution on a table whose
  /// columns do not sum to one within kNormTolerance.
  std::size_t add_node(BnNode node);

  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<BnNode>& nodes() const noexcept { return nodes_; }
  const BnNode& node(std::size_t i) const { return nodes_.at(i); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  /// Throws UnknownNode.
  std::size_t find(std::string_view name) const;
  std::optional<std::size_t> state_index(std::size_t node, std::string_view label) const;

  std::vector<std::size_t> open_inputs() const;
  std::vector<std::size_t> children(std::size_t node) const;

  /// Turns an open input into a closed root with the given prior.
  void close_input(std::size_t node, std::vector<double> prior);

  /// P(node = state | parents) for a full assignment indexed by node.
  double conditional(std::size_t node, std::span<const std::size_t> assignment) const;

  bool operator==(const BayesNet& other) const;

 private:
  std::vector<BnNode> nodes_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Text export, one `node <name> { states ...; parents ...; table ...; }`
/// block per node in topological order. Open inputs carry `input <default>`
/// in place of `table`. Probabilities are printed with 17 significant
/// digits so the export reloads bit-exactly.
std::string export_bn(const BayesNet& bn);

/// Inverse of export_bn. Throws Error(ParseError) with a line number.
BayesNet parse_bn(std::string_view text);

/// `%.17g` formatting used by every text writer in the library.
std::string format_probability(double p);

}  // namespace fragbn
