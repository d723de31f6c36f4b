#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fragbn {

/// Reserved label for "variable undefined under this hypothesis".
inline constexpr std::string_view kNaState = "NA";

/// Tolerance used for every "sums to one" check in the library.
inline constexpr double kNormTolerance = 1e-9;

class StateSpace {
 public:
  StateSpace() = default;
  /// Throws Error(InvalidStateSpace) unless there are at least two distinct
  /// non-empty labels and `NA`, when present, is the last one.
  explicit StateSpace(std::vector<std::string> labels, bool ordered = false);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  bool ordered() const noexcept { return ordered_; }
  bool has_na() const noexcept;
  std::optional<std::size_t> na_index() const noexcept;
  std::optional<std::size_t> index_of(std::string_view label) const noexcept;

  bool operator==(const StateSpace&) const = default;

 private:
  std::vector<std::string> labels_;
  bool ordered_ = false;
};

enum class CombinationMethod { Simple, Default, NoisyOr, NoisyMin, Sigmoid };

std::string_view to_string(CombinationMethod m) noexcept;
std::optional<CombinationMethod> parse_method(std::string_view id) noexcept;

struct VariableSchema {
  std::string name;
  StateSpace states;
  std::vector<std::string> attributes;
  CombinationMethod method = CombinationMethod::Simple;
  /// nullopt means uniform over the non-NA states.
  std::optional<std::vector<double>> default_distribution;

  bool operator==(const VariableSchema&) const = default;
};

/// Explicit default if declared, otherwise uniform over non-NA states.
std::vector<double> default_distribution(const VariableSchema& schema);

/// One argument of a variable reference inside a fragment: either the name
/// of a fragment attribute or a literal attribute value.
struct AttributeArg {
  std::string text;
  bool literal = false;

  auto operator<=>(const AttributeArg&) const = default;
};

struct VariableRef {
  std::string schema;
  std::vector<AttributeArg> args;

  auto operator<=>(const VariableRef&) const = default;
};

std::string to_string(const VariableRef& ref);

// Influence function payloads. Conditional tables are row-major with the
// first parent varying slowest and the child state fastest.

struct TablePayload {
  std::vector<double> values;
  bool operator==(const TablePayload&) const = default;
};

enum class Specificity { Default, Specific };

struct DefaultTablePayload {
  Specificity specificity = Specificity::Default;
  std::vector<double> values;
  bool operator==(const DefaultTablePayload&) const = default;
};

struct NoisyOrPayload {
  double leak = 0.0;
  std::vector<double> links;  // one activation probability per parent
  bool operator==(const NoisyOrPayload&) const = default;
};

struct NoisyMinBlock {
  std::vector<double> leak;  // distribution over the child's states
  /// links[parent][parent_state][child_state]; empty for the conditioning
  /// parent.
  std::vector<std::vector<std::vector<double>>> links;
  bool operator==(const NoisyMinBlock&) const = default;
};

struct NoisyMinPayload {
  std::size_t conditioning = 0;       // position in the resident's parents
  std::vector<NoisyMinBlock> blocks;  // one per state of the conditioning parent
  bool operator==(const NoisyMinPayload&) const = default;
};

struct SigmoidPayload {
  double bias = 0.0;
  std::vector<double> weights;  // one per parent
  bool operator==(const SigmoidPayload&) const = default;
};

/// Marks the resident as undefined (point mass on NA) in this fragment.
struct NaPayload {
  bool operator==(const NaPayload&) const = default;
};

using InfluencePayload = std::variant<TablePayload, DefaultTablePayload, NoisyOrPayload,
                                      NoisyMinPayload, SigmoidPayload, NaPayload>;

struct ResidentSpec {
  VariableRef var;
  std::vector<VariableRef> parents;
  InfluencePayload influence;
  std::optional<std::vector<double>> table;  // optional explicit local distribution

  bool operator==(const ResidentSpec&) const = default;
};

struct FragmentArc {
  VariableRef from;
  VariableRef to;
  auto operator<=>(const FragmentArc&) const = default;
};

struct FragmentSchema {
  std::string name;
  std::vector<std::string> attributes;
  std::vector<ResidentSpec> residents;
  std::vector<VariableRef> inputs;
  std::vector<VariableRef> hypothesis_vars;  // subset of inputs
  /// Joint state tuples over hypothesis_vars. Registration sorts them by
  /// state index and removes duplicates; with no hypothesis variables it is
  /// the singleton empty tuple.
  std::vector<std::vector<std::string>> hypothesized_subset;

  /// Fragment graph arcs, derived from each resident's parent list.
  std::vector<FragmentArc> arcs() const;
  const ResidentSpec* find_resident(const VariableRef& ref) const;

  bool operator==(const FragmentSchema&) const = default;
};

/// Name-indexed registries of variable and fragment schemas. Immutable once
/// loading completes; share it through std::shared_ptr<const KnowledgeBase>.
class KnowledgeBase {
 public:
  /// Identical re-registration is a no-op. Throws DuplicateName,
  /// InvalidDistribution or InvalidStateSpace.
  void register_variable_schema(VariableSchema schema);

  /// Validates and stores a fragment schema (normalizing its hypothesized
  /// subset). Throws UnresolvedVariable, CyclicFragmentGraph, InputNotRoot,
  /// EmptyResidents, BadHypothesisSubset and friends.
  void register_fragment_schema(FragmentSchema schema);

  const VariableSchema* find_variable(std::string_view name) const;
  const VariableSchema& variable(std::string_view name) const;
  std::shared_ptr<const FragmentSchema> find_fragment(std::string_view name) const;
  std::shared_ptr<const FragmentSchema> fragment(std::string_view name) const;

  const std::map<std::string, VariableSchema, std::less<>>& variables() const noexcept {
    return variables_;
  }
  const std::map<std::string, std::shared_ptr<const FragmentSchema>, std::less<>>&
  fragments() const noexcept {
    return fragments_;
  }

  bool empty() const noexcept { return variables_.empty() && fragments_.empty(); }

  friend bool operator==(const KnowledgeBase& a, const KnowledgeBase& b);

 private:
  std::map<std::string, VariableSchema, std::less<>> variables_;
  std::map<std::string, std::shared_ptr<const FragmentSchema>, std::less<>> fragments_;
};

}  // namespace fragbn
