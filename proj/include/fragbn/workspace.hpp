#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fragbn/kb.hpp"

namespace fragbn {

/// A ground random variable. Two instances with the same schema name and
/// bound attribute values denote the same variable everywhere.
struct VariableInstance {
  std::string schema;
  std::vector<std::string> args;

  std::string name() const;
  auto operator<=>(const VariableInstance&) const = default;
};

/// Parses `Schema(arg1,...,argk)`; surrounding whitespace and quotes on the
/// arguments are stripped.
std::optional<VariableInstance> parse_variable_instance(std::string_view text);

using Binding = std::map<std::string, std::string, std::less<>>;

struct InstantiatedResident {
  VariableInstance var;
  std::vector<VariableInstance> parents;  // aligned with spec->parents
  const ResidentSpec* spec = nullptr;
};

/// A fragment schema with its identifying attributes bound.
class FragmentInstance {
 public:
  /// Throws IncompleteBinding when an attribute of the schema is unbound and
  /// InvalidInstance when the binding collapses distinct references into a
  /// structure that violates the fragment invariants.
  FragmentInstance(const KnowledgeBase& kb, std::shared_ptr<const FragmentSchema> schema,
                   const Binding& binding, bool synthesized = false);

  const std::string& schema_name() const noexcept { return schema_->name; }
  const FragmentSchema& schema() const noexcept { return *schema_; }
  /// Only the attributes the schema declares.
  const Binding& binding() const noexcept { return binding_; }
  std::string label() const;

  const std::vector<InstantiatedResident>& residents() const noexcept { return residents_; }
  const std::vector<VariableInstance>& inputs() const noexcept { return inputs_; }
  const std::vector<VariableInstance>& hypothesis_vars() const noexcept { return hypothesis_vars_; }
  /// Hypothesized subset as state-index tuples aligned with hypothesis_vars().
  const std::set<std::vector<std::size_t>>& hypothesized() const noexcept { return hypothesized_; }

  const InstantiatedResident* find_resident(const VariableInstance& v) const;
  bool is_resident(const VariableInstance& v) const { return find_resident(v) != nullptr; }
  bool is_input(const VariableInstance& v) const;
  std::vector<std::pair<VariableInstance, VariableInstance>> arcs() const;

  /// Created by the combination engine (NA point mass) rather than authored.
  bool synthesized() const noexcept { return synthesized_; }

  std::pair<std::string, Binding> identity() const { return {schema_->name, binding_}; }

 private:
  std::shared_ptr<const FragmentSchema> schema_;
  Binding binding_;
  std::vector<InstantiatedResident> residents_;
  std::vector<VariableInstance> inputs_;
  std::vector<VariableInstance> hypothesis_vars_;
  std::set<std::vector<std::size_t>> hypothesized_;
  bool synthesized_ = false;
};

using FragmentPtr = std::shared_ptr<const FragmentInstance>;

/// Arena holding the ground variables, fragment instances and evidence for
/// one problem. Confined to one thread at a time.
class Workspace {
 public:
  explicit Workspace(std::shared_ptr<const KnowledgeBase> kb);

  /// Idempotent for identical (schema, binding). Throws UnknownSchema,
  /// IncompleteBinding, InvalidInstance.
  FragmentPtr instantiate_fragment(std::string_view schema_name, const Binding& binding);

  /// Throws UnknownVariable or InvalidState; re-setting overwrites.
  void set_evidence(const VariableInstance& var, std::string_view state);
  void clear_evidence(const VariableInstance& var);

  const KnowledgeBase& kb() const noexcept { return *kb_; }
  std::shared_ptr<const KnowledgeBase> kb_ptr() const noexcept { return kb_; }
  const std::set<VariableInstance>& variables() const noexcept { return variables_; }
  /// Fragment instances ordered by identity key.
  std::vector<FragmentPtr> fragments() const;
  const std::map<VariableInstance, std::size_t>& evidence() const noexcept { return evidence_; }

 private:
  std::shared_ptr<const KnowledgeBase> kb_;
  std::set<VariableInstance> variables_;
  std::map<std::pair<std::string, Binding>, FragmentPtr> fragments_;
  std::map<VariableInstance, std::size_t> evidence_;
};

/// Resolves a schema-level reference under a binding.
VariableInstance bind_ref(const VariableRef& ref, const Binding& binding);

}  // namespace fragbn
