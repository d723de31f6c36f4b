#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fragbn/bayes_net.hpp"

namespace fragbn {

/// P(targets | evidence) over node names of a materialized network.
struct Query {
  std::vector<std::string> targets;
  std::map<std::string, std::string, std::less<>> evidence;  // node -> state label
};

/// Dense non-negative table over the joint states of `scope` (node indices),
/// first scope variable varying slowest.
class Factor {
 public:
  /// The constant 1 over the empty scope.
  Factor() : values_{1.0} {}
  /// Throws InvalidDistribution on a size mismatch or a negative entry.
  Factor(std::vector<std::size_t> scope, std::vector<std::size_t> cards, std::vector<double> values);

  const std::vector<std::size_t>& scope() const noexcept { return scope_; }
  const std::vector<std::size_t>& cards() const noexcept { return cards_; }
  const std::vector<double>& values() const noexcept { return values_; }
  bool contains(std::size_t var) const;

  /// Scope of the product is the sorted union of both scopes.
  Factor multiply(const Factor& other) const;
  Factor sum_out(std::size_t var) const;
  /// Restricts `var` to one state and drops it from the scope.
  Factor reduce(std::size_t var, std::size_t state) const;
  /// Same table with the scope permuted into `order`.
  Factor reorder(const std::vector<std::size_t>& order) const;
  double total() const;

 private:
  std::vector<std::size_t> scope_;
  std::vector<std::size_t> cards_;
  std::vector<double> values_;
};

/// Every node of A is d-separated from every node of B given Z. Throws
/// InvalidQuery when the sets overlap.
bool d_separated(const BayesNet& bn, const std::set<std::size_t>& a, const std::set<std::size_t>& b,
                 const std::set<std::size_t>& z);
/// Name-based form; throws UnknownNode.
bool d_separated(const BayesNet& bn, const std::vector<std::string>& a,
                 const std::vector<std::string>& b, const std::vector<std::string>& z);

/// The evidence d-separates the targets from every open input that is not
/// itself observed. Throws UnknownNode / InvalidQuery / InvalidState.
bool query_complete(const BayesNet& bn, const Query& q);

/// Every open input becomes a root carrying its default prior.
BayesNet close_with_defaults(BayesNet bn);

/// Joint distribution over the query targets, in target order.
struct Posterior {
  std::vector<std::size_t> targets;  // node indices
  std::vector<std::size_t> cards;
  std::vector<double> probs;  // first target slowest
};

/// One line per joint target state: comma-joined labels, a tab and the
/// probability with 12 significant digits.
std::string format_posterior(const BayesNet& bn, const Posterior& posterior);

/// Exact variable elimination. The elimination order is min-degree unless
/// `order` is given, in which case it must list exactly the nodes that are
/// neither targets nor evidence. Observed open inputs act as indicators;
/// unobserved ones throw MissingPrior. Throws ZeroEvidence when the
/// evidence has probability zero.
Posterior eliminate(const BayesNet& bn, const Query& q,
                    std::optional<std::vector<std::size_t>> order = std::nullopt);

/// Guard for joint_enumerate.
inline constexpr std::size_t kMaxJointEntries = std::size_t{1} << 20;

struct JointTable {
  std::vector<std::size_t> cards;  // one per node, in node order
  std::vector<double> probs;       // first node slowest
};

/// Brute-force product of every CPT entry. Throws TooLarge above
/// kMaxJointEntries and MissingPrior on open inputs.
JointTable joint_enumerate(const BayesNet& bn);

/// Answers a query by marginalizing the enumerated joint.
Posterior enumerate_query(const BayesNet& bn, const JointTable& joint, const Query& q);

}  // namespace fragbn
