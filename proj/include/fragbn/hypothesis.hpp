#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fragbn/workspace.hpp"

namespace fragbn {

/// A set of joint hypothesis states, stored as sorted flat (mixed-radix)
/// indices into the Cartesian product of the partition's state spaces. The
/// first hypothesis variable varies slowest.
using TupleSet = std::vector<std::size_t>;

/// A set H of hypothesis variables with a partition of its joint state space.
class HypothesisPartition {
 public:
  HypothesisPartition() : HypothesisPartition({}, {}) {}
  /// Single element covering the whole product.
  HypothesisPartition(std::vector<VariableInstance> vars, std::vector<std::size_t> cards);
  /// Throws InvalidPartition unless the elements are non-empty, pairwise
  /// disjoint and jointly exhaustive.
  HypothesisPartition(std::vector<VariableInstance> vars, std::vector<std::size_t> cards,
                      std::vector<TupleSet> elements);

  /// Trivial partition with cardinalities looked up in the knowledge base.
  static HypothesisPartition over(const KnowledgeBase& kb, std::vector<VariableInstance> vars);

  const std::vector<VariableInstance>& vars() const noexcept { return vars_; }
  const std::vector<std::size_t>& cards() const noexcept { return cards_; }
  const std::vector<TupleSet>& elements() const noexcept { return elements_; }
  std::size_t size() const noexcept { return elements_.size(); }
  std::size_t product_size() const noexcept { return product_; }

  std::optional<std::size_t> var_index(const VariableInstance& v) const;
  std::vector<std::size_t> decode(std::size_t flat) const;
  std::size_t encode(const std::vector<std::size_t>& tuple) const;
  std::size_t element_of(std::size_t flat) const;

  /// Human-readable element, e.g. `{SA6, SCUD}` or `{(SA6,Open), ...}`.
  std::string describe(const KnowledgeBase& kb, std::size_t element) const;

  bool operator==(const HypothesisPartition&) const = default;

 private:
  std::vector<VariableInstance> vars_;
  std::vector<std::size_t> cards_;
  std::size_t product_ = 1;
  std::vector<TupleSet> elements_;
};

enum class Relation { Subsumes, Disjoint, Straddles };

const char* to_string(Relation r) noexcept;

/// H_F is contained in H and every variable of F that lies in H is one of
/// F's hypothesis variables.
bool hypothesis_variable_consistent(const FragmentInstance& f, const HypothesisPartition& s);

/// Cylindrical extension of the fragment's hypothesized subset to H: the
/// coordinates of H not in H_F range over all states. Throws
/// InvalidPartition when H_F is not contained in H.
TupleSet lift(const FragmentInstance& f, const HypothesisPartition& s);

Relation classify(const TupleSet& hypothesized, const TupleSet& element);
Relation classify(const FragmentInstance& f, const HypothesisPartition& s, std::size_t element);

/// Coarsest refinement in which every subset either contains or misses each
/// element: each element is split into its intersection with and difference
/// from every subset, dropping empty parts.
HypothesisPartition refine(const HypothesisPartition& s, std::span<const TupleSet> subsets);

/// refine() with the lifted hypothesized subsets of the given fragments.
HypothesisPartition refine(const HypothesisPartition& s, std::span<const FragmentPtr> fragments);

}  // namespace fragbn
