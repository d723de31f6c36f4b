#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fragbn/error.hpp"
#include "fragbn/kb.hpp"
#include "fragbn/workspace.hpp"

namespace fragbn {

/// One fragment's influence on a variable X: the fragment instance and its
/// instantiated resident entry for X. Callers pass only fragments in which
/// X is resident and which subsume the hypothesis element under study.
struct Contribution {
  const FragmentInstance* fragment = nullptr;
  const InstantiatedResident* resident = nullptr;
};

/// Parents and normalized local distribution of a variable. Parents are in
/// canonical (sorted) order; the table is row-major with the first parent
/// varying slowest and the child state fastest.
struct CombinationResult {
  VariableInstance child;
  std::size_t child_card = 0;
  std::vector<VariableInstance> parents;
  std::vector<std::size_t> parent_cards;
  std::vector<double> cpt;

  std::size_t rows() const noexcept { return child_card ? cpt.size() / child_card : 0; }
  /// Distribution of the child for one parent configuration.
  std::span<const double> row(const std::vector<std::size_t>& parent_states) const;
};

struct EnablingViolation {
  CombinationMethod method = CombinationMethod::Simple;
  std::string fragment;  // label of the offending fragment, empty if none in particular
  std::string clause;    // short name of the violated condition
  std::string message;
};

class CombinationError : public Error {
 public:
  explicit CombinationError(EnablingViolation v)
      : Error(ErrorCode::EnablingViolation, v.message), violation_(std::move(v)) {}
  const EnablingViolation& violation() const noexcept { return violation_; }

 private:
  EnablingViolation violation_;
};

/// Evaluates the enabling conditions of `method` for X over the given
/// contributions without computing a distribution.
std::optional<EnablingViolation> check_enabling(const KnowledgeBase& kb, CombinationMethod method,
                                                const VariableInstance& x,
                                                std::span<const Contribution> contributions);

/// Table payload of the single home fragment, normalized per parent state.
/// Throws CombinationError or Error(ZeroColumn).
CombinationResult simple_combination(const KnowledgeBase& kb, const VariableInstance& x,
                                     std::span<const Contribution> contributions);

/// The specific table overrides the default one when both are present.
CombinationResult default_combination(const KnowledgeBase& kb, const VariableInstance& x,
                                      std::span<const Contribution> contributions);

/// Leaky noisy-OR over the union of contributed parents. State index 1 of
/// a binary variable is "true".
CombinationResult noisy_or_combination(const KnowledgeBase& kb, const VariableInstance& x,
                                       std::span<const Contribution> contributions);

/// Leaky noisy-MIN per state of a shared conditioning parent:
/// P(X >= s | pa, c) is the product of the contributions' survival terms.
CombinationResult noisy_min_conditional(const KnowledgeBase& kb, const VariableInstance& x,
                                        std::span<const Contribution> contributions);

/// Logistic function of bias plus the weights of the parents that are true.
CombinationResult sigmoid_parameterized(const KnowledgeBase& kb, const VariableInstance& x,
                                        std::span<const Contribution> contributions);

/// Dispatches on X's combination method; NA-marker contributions yield a
/// point mass on NA regardless of the method.
CombinationResult combine_influences(const KnowledgeBase& kb, const VariableInstance& x,
                                     std::span<const Contribution> contributions);

}  // namespace fragbn
