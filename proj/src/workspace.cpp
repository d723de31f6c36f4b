#include "fragbn/workspace.hpp"

#include <algorithm>
#include <cctype>

#include "fragbn/error.hpp"

namespace fragbn {

namespace {

bool needs_quotes(const std::string& s) {
  if (s.empty()) return true;
  return std::any_of(s.begin(), s.end(), [](unsigned char c) {
    return c == ',' || c == '(' || c == ')' || c == '"' || c == '=' || std::isspace(c);
  });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string VariableInstance::name() const {
  if (args.empty()) return schema;  // zero-arity variables print bare
  std::string out = schema + "(";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out += ",";
    if (needs_quotes(args[i])) {
      out += '"';
      for (char c : args[i]) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
      }
      out += '"';
    } else {
      out += args[i];
    }
  }
  return out + ")";
}

std::optional<VariableInstance> parse_variable_instance(std::string_view text) {
  text = trim(text);
  auto open = text.find('(');
  if (open == std::string_view::npos) {
    if (text.empty() || text.find_first_of(",)\"=") != std::string_view::npos) return std::nullopt;
    if (std::any_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) return std::nullopt;
    return VariableInstance{std::string(text), {}};
  }
  if (open == 0 || text.back() != ')') return std::nullopt;
  VariableInstance v;
  v.schema = std::string(trim(text.substr(0, open)));
  if (v.schema.empty()) return std::nullopt;
  std::string_view body = text.substr(open + 1, text.size() - open - 2);
  if (trim(body).empty()) return v;

  std::string current;
  bool quoted = false, in_quotes = false;
  auto flush = [&]() -> bool {
    std::string value = quoted ? current : std::string(trim(current));
    if (value.empty() && !quoted) return false;
    v.args.push_back(std::move(value));
    current.clear();
    quoted = false;
    return true;
  };
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (in_quotes) {
      if (c == '\\' && i + 1 < body.size()) {
        current += body[++i];
      } else if (c == '"') {
        in_quotes = false;
      } else {
        current += c;
      }
    } else if (c == '"') {
      if (!trim(current).empty()) return std::nullopt;
      current.clear();
      in_quotes = quoted = true;
    } else if (c == ',') {
      if (!flush()) return std::nullopt;
    } else if (quoted) {
      if (!std::isspace(static_cast<unsigned char>(c))) return std::nullopt;
    } else {
      current += c;
    }
  }
  if (in_quotes || !flush()) return std::nullopt;
  return v;
}

VariableInstance bind_ref(const VariableRef& ref, const Binding& binding) {
  VariableInstance v{ref.schema, {}};
  for (const auto& arg : ref.args) {
    if (arg.literal) {
      v.args.push_back(arg.text);
      continue;
    }
    auto it = binding.find(arg.text);
    if (it == binding.end()) {
      throw Error(ErrorCode::IncompleteBinding, "attribute '" + arg.text + "' is not bound");
    }
    v.args.push_back(it->second);
  }
  return v;
}

FragmentInstance::FragmentInstance(const KnowledgeBase& kb,
                                   std::shared_ptr<const FragmentSchema> schema,
                                   const Binding& binding, bool synthesized)
    : schema_(std::move(schema)), synthesized_(synthesized) {
  for (const auto& attr : schema_->attributes) {
    auto it = binding.find(attr);
    if (it == binding.end()) {
      throw Error(ErrorCode::IncompleteBinding,
                  "fragment " + schema_->name + ": attribute '" + attr + "' is not bound");
    }
    binding_.emplace(attr, it->second);
  }
  const std::string where = "fragment " + label();

  for (const auto& r : schema_->residents) {
    InstantiatedResident inst{bind_ref(r.var, binding_), {}, &r};
    for (const auto& p : r.parents) inst.parents.push_back(bind_ref(p, binding_));
    residents_.push_back(std::move(inst));
  }
  for (const auto& i : schema_->inputs) inputs_.push_back(bind_ref(i, binding_));
  for (const auto& h : schema_->hypothesis_vars) hypothesis_vars_.push_back(bind_ref(h, binding_));

  // Distinct references may collapse onto one ground variable.
  std::set<VariableInstance> resident_set, input_set;
  for (const auto& r : residents_) {
    if (!resident_set.insert(r.var).second) {
      throw Error(ErrorCode::InvalidInstance, where + ": two residents bind to " + r.var.name());
    }
  }
  for (const auto& i : inputs_) {
    if (!input_set.insert(i).second) {
      throw Error(ErrorCode::InvalidInstance, where + ": two inputs bind to " + i.name());
    }
    if (resident_set.count(i)) {
      throw Error(ErrorCode::InvalidInstance, where + ": " + i.name() + " is resident and input");
    }
  }
  for (const auto& r : residents_) {
    std::set<VariableInstance> seen;
    for (const auto& p : r.parents) {
      if (p == r.var || !seen.insert(p).second) {
        throw Error(ErrorCode::InvalidInstance,
                    where + ": binding collapses the parents of " + r.var.name());
      }
    }
  }
  // Acyclicity after substitution (Kahn over residents).
  std::map<VariableInstance, std::size_t> pending;
  for (const auto& r : residents_) {
    std::size_t n = 0;
    for (const auto& p : r.parents) n += resident_set.count(p);
    pending[r.var] = n;
  }
  std::vector<VariableInstance> ready;
  for (const auto& [v, n] : pending) {
    if (n == 0) ready.push_back(v);
  }
  std::size_t done = 0;
  while (!ready.empty()) {
    VariableInstance v = ready.back();
    ready.pop_back();
    ++done;
    for (const auto& r : residents_) {
      if (std::find(r.parents.begin(), r.parents.end(), v) != r.parents.end() &&
          --pending[r.var] == 0) {
        ready.push_back(r.var);
      }
    }
  }
  if (done != residents_.size()) {
    throw Error(ErrorCode::InvalidInstance, where + ": binding creates a directed cycle");
  }

  for (const auto& tuple : schema_->hypothesized_subset) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < tuple.size(); ++k) {
      const auto& states = kb.variable(hypothesis_vars_[k].schema).states;
      auto i = states.index_of(tuple[k]);
      if (!i) throw Error(ErrorCode::BadHypothesisSubset, where + ": bad hypothesized state");
      idx.push_back(*i);
    }
    hypothesized_.insert(std::move(idx));
  }
  std::set<VariableInstance> hyp(hypothesis_vars_.begin(), hypothesis_vars_.end());
  if (hyp.size() != hypothesis_vars_.size()) {
    throw Error(ErrorCode::InvalidInstance, where + ": hypothesis variables collapse");
  }
}

std::string FragmentInstance::label() const {
  std::string out = schema_->name;
  if (binding_.empty()) return out;
  out += "[";
  bool first = true;
  for (const auto& [k, v] : binding_) {
    if (!first) out += ",";
    first = false;
    out += k + "=" + v;
  }
  return out + "]";
}

const InstantiatedResident* FragmentInstance::find_resident(const VariableInstance& v) const {
  for (const auto& r : residents_) {
    if (r.var == v) return &r;
  }
  return nullptr;
}

bool FragmentInstance::is_input(const VariableInstance& v) const {
  return std::find(inputs_.begin(), inputs_.end(), v) != inputs_.end();
}

std::vector<std::pair<VariableInstance, VariableInstance>> FragmentInstance::arcs() const {
  std::vector<std::pair<VariableInstance, VariableInstance>> out;
  for (const auto& r : residents_) {
    for (const auto& p : r.parents) out.emplace_back(p, r.var);
  }
  return out;
}

Workspace::Workspace(std::shared_ptr<const KnowledgeBase> kb) : kb_(std::move(kb)) {}

FragmentPtr Workspace::instantiate_fragment(std::string_view schema_name, const Binding& binding) {
  auto schema = kb_->fragment(schema_name);
  auto instance = std::make_shared<const FragmentInstance>(*kb_, schema, binding);
  auto [it, inserted] = fragments_.emplace(instance->identity(), instance);
  if (!inserted) return it->second;
  for (const auto& r : instance->residents()) variables_.insert(r.var);
  for (const auto& i : instance->inputs()) variables_.insert(i);
  return instance;
}

void Workspace::set_evidence(const VariableInstance& var, std::string_view state) {
  if (!variables_.count(var)) {
    throw Error(ErrorCode::UnknownVariable, "no variable " + var.name() + " in the workspace");
  }
  auto idx = kb_->variable(var.schema).states.index_of(state);
  if (!idx) {
    throw Error(ErrorCode::InvalidState,
                "'" + std::string(state) + "' is not a state of " + var.name());
  }
  evidence_[var] = *idx;
}

void Workspace::clear_evidence(const VariableInstance& var) { evidence_.erase(var); }

std::vector<FragmentPtr> Workspace::fragments() const {
  std::vector<FragmentPtr> out;
  out.reserve(fragments_.size());
  for (const auto& [key, f] : fragments_) out.push_back(f);
  return out;
}

}  // namespace fragbn
