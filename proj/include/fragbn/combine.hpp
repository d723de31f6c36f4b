#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fragbn/bayes_net.hpp"
#include "fragbn/error.hpp"
#include "fragbn/hypothesis.hpp"
#include "fragbn/influence.hpp"
#include "fragbn/workspace.hpp"

namespace fragbn {

/// Node -> parent set. Every node of the graph is a key.
using Dag = std::map<VariableInstance, std::set<VariableInstance>>;

class CyclicUnionError : public Error {
 public:
  explicit CyclicUnionError(std::vector<VariableInstance> cycle);
  /// Closed walk: the first node is repeated at the end.
  const std::vector<VariableInstance>& cycle() const noexcept { return cycle_; }

 private:
  std::vector<VariableInstance> cycle_;
};

/// Union of the graphs of the fragments in D that subsume element v.
/// Throws CyclicUnionError.
Dag graph_union(std::span<const FragmentPtr> fragments, const HypothesisPartition& partition,
                std::size_t element);

/// Throws CyclicUnionError if the graph has a directed cycle.
void require_acyclic(const Dag& graph);

enum class ConsistencyCheck {
  Acyclicity,          // union of subsuming fragment graphs has a cycle
  HypothesisVariables, // fragment and partition disagree on hypothesis variables
  Coverage,            // home fragment, clause 1: no subsuming fragment holds X
  Residency,           // home fragment, clause 2: X resident in a straddling fragment
  Enabling,            // home fragment, clause 3: the combination method failed
};

const char* to_string(ConsistencyCheck c) noexcept;

struct ConsistencyIssue {
  ConsistencyCheck check;
  std::string element;
  std::string fragment;
  std::string variable;
  std::string message;
};

struct ConsistencyReport {
  std::vector<ConsistencyIssue> issues;

  bool ok() const noexcept { return issues.empty(); }
  bool has(ConsistencyCheck c) const noexcept;
  /// One line per issue, prefixed by the check it belongs to.
  std::string format() const;
};

class ConsistencyError : public Error {
 public:
  ConsistencyError(ErrorCode code, ConsistencyReport report);
  const ConsistencyReport& report() const noexcept { return report_; }

 private:
  ConsistencyReport report_;
};

/// Evaluates global consistency of D given element v: acyclicity, hypothesis
/// variable consistency of every fragment, and home fragment consistency
/// (coverage, residency, method enabling) of every resident variable.
ConsistencyReport check_global_consistency(const KnowledgeBase& kb,
                                           std::span<const FragmentPtr> fragments,
                                           const HypothesisPartition& partition,
                                           std::size_t element);

/// Point-mass-on-NA fragments for every NA-capable variable that is resident
/// somewhere in D but in no fragment that touches element v.
std::vector<FragmentPtr> synthesize_na(const KnowledgeBase& kb, std::span<const FragmentPtr> fragments,
                                       const HypothesisPartition& partition, std::size_t element);

/// Contributions for X: fragments in which X is resident and which subsume v.
std::vector<Contribution> contributions_for(std::span<const FragmentPtr> fragments,
                                            const HypothesisPartition& partition,
                                            std::size_t element, const VariableInstance& x);

struct CombineOptions {
  bool synthesize_na = true;
};

class CompoundFragment;
class MultiFragment;

using Component = std::variant<FragmentPtr, std::shared_ptr<const CompoundFragment>,
                               std::shared_ptr<const MultiFragment>>;

/// Elementary fragments of the components, deduplicated by identity and
/// sorted by identity key. Synthesized fragments are dropped; they are
/// recreated for whatever partition the result is combined under.
std::vector<FragmentPtr> flatten(std::span<const Component> components);

/// Result of combining a globally consistent fragment set for one
/// hypothesis element. Holds no influence functions of its own: local
/// distributions are computed from the components on first request.
class CompoundFragment {
 public:
  CompoundFragment(std::shared_ptr<const KnowledgeBase> kb, std::vector<FragmentPtr> components,
                   std::vector<FragmentPtr> synthesized, HypothesisPartition partition,
                   std::size_t element);

  const KnowledgeBase& kb() const noexcept { return *kb_; }
  const HypothesisPartition& partition() const noexcept { return partition_; }
  std::size_t element() const noexcept { return element_; }
  const std::set<VariableInstance>& residents() const noexcept { return residents_; }
  const std::set<VariableInstance>& inputs() const noexcept { return inputs_; }
  /// Nodes are inputs and residents; inputs are roots.
  const Dag& graph() const noexcept { return graph_; }
  const std::vector<FragmentPtr>& components() const noexcept { return components_; }
  const std::vector<FragmentPtr>& synthesized() const noexcept { return synthesized_; }
  std::vector<FragmentPtr> all_fragments() const;

  /// Lazily computed and cached; not safe for concurrent first calls.
  const CombinationResult& local_distribution(const VariableInstance& x) const;

 private:
  std::shared_ptr<const KnowledgeBase> kb_;
  std::vector<FragmentPtr> components_;
  std::vector<FragmentPtr> synthesized_;
  HypothesisPartition partition_;
  std::size_t element_;
  std::set<VariableInstance> residents_;
  std::set<VariableInstance> inputs_;
  Dag graph_;
  mutable std::map<VariableInstance, CombinationResult> cache_;
};

/// Hypothesis partition plus per-element combinations of one fragment set.
class MultiFragment {
 public:
  const KnowledgeBase& kb() const noexcept { return *kb_; }
  const HypothesisPartition& partition() const noexcept { return partition_; }
  const std::set<VariableInstance>& residents() const noexcept { return residents_; }
  const std::set<VariableInstance>& inputs() const noexcept { return inputs_; }
  /// Parents of X are the union over elements of its per-element parents.
  const Dag& graph() const noexcept { return graph_; }
  const std::vector<FragmentPtr>& components() const noexcept { return components_; }
  const std::vector<FragmentPtr>& synthesized() const noexcept { return synthesized_; }
  const CompoundFragment& element(std::size_t v) const { return elements_.at(v); }
  std::size_t size() const noexcept { return elements_.size(); }

 private:
  friend MultiFragment combine_multi(std::shared_ptr<const KnowledgeBase>, std::span<const Component>,
                                     const HypothesisPartition&, CombineOptions);
  MultiFragment() = default;

  std::shared_ptr<const KnowledgeBase> kb_;
  HypothesisPartition partition_;
  std::set<VariableInstance> residents_;
  std::set<VariableInstance> inputs_;
  Dag graph_;
  std::vector<FragmentPtr> components_;
  std::vector<FragmentPtr> synthesized_;
  std::vector<CompoundFragment> elements_;
};

/// Throws ConsistencyError with code CyclicUnion when the union of the
/// subsuming graphs has a cycle, CoverageGap when coverage is the only
/// failure, InconsistentSet otherwise.
CompoundFragment combine_compound(std::shared_ptr<const KnowledgeBase> kb,
                                  std::span<const Component> components,
                                  const HypothesisPartition& partition, std::size_t element,
                                  CombineOptions options = {});

/// Throws ConsistencyError (CoverageGap / InconsistentSet) or
/// CyclicUnionError when per-element graphs are acyclic but their union is
/// not.
MultiFragment combine_multi(std::shared_ptr<const KnowledgeBase> kb,
                            std::span<const Component> components,
                            const HypothesisPartition& partition, CombineOptions options = {});

using PriorMap = std::map<VariableInstance, std::vector<double>>;

struct MaterializeOptions {
  /// Throw MissingPrior instead of leaving unprioritized inputs open.
  bool require_closed = false;
};

/// Nodes are H, the inputs and the residents. Hypothesis variables get the
/// supplied prior or their schema default; other inputs get the supplied
/// prior or stay open. Residents of a compound keep their compound parents;
/// residents of a multi-fragment also gain the hypothesis variables of
/// every fragment in which they are resident.
BayesNet materialize_bn(const CompoundFragment& compound, const PriorMap& priors = {},
                        MaterializeOptions options = {});
BayesNet materialize_bn(const MultiFragment& multi, const PriorMap& priors = {},
                        MaterializeOptions options = {});

}  // namespace fragbn
