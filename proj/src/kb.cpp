#include "fragbn/kb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "fragbn/error.hpp"

namespace fragbn {

namespace {

bool is_distribution(const std::vector<double>& p) {
  double sum = 0.0;
  for (double x : p) {
    if (!std::isfinite(x) || x < 0.0 || x > 1.0) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= kNormTolerance;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  return out;
}

template <class T>
bool has_duplicates(std::vector<T> items) {
  std::sort(items.begin(), items.end());
  return std::adjacent_find(items.begin(), items.end()) != items.end();
}

// Checks every column of a row-major conditional table.
void check_conditional_table(const std::vector<double>& table, std::size_t child_card,
                             std::size_t rows, bool must_normalize, const std::string& what) {
  if (table.size() != child_card * rows) {
    throw Error(ErrorCode::InvalidPayload,
                what + ": expected " + std::to_string(child_card * rows) + " entries, got " +
                    std::to_string(table.size()));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (std::size_t s = 0; s < child_card; ++s) {
      double x = table[r * child_card + s];
      if (!std::isfinite(x) || x < 0.0) {
        throw Error(ErrorCode::InvalidDistribution, what + ": negative or non-finite entry");
      }
      sum += x;
    }
    if (must_normalize && std::abs(sum - 1.0) > kNormTolerance) {
      throw Error(ErrorCode::InvalidDistribution,
                  what + ": row " + std::to_string(r) + " does not sum to 1");
    }
  }
}

class FragmentValidator {
 public:
  FragmentValidator(const KnowledgeBase& kb, FragmentSchema& f) : kb_(kb), f_(f) {}

  void run() {
    if (f_.name.empty()) throw Error(ErrorCode::InvalidPayload, "fragment schema without a name");
    if (has_duplicates(f_.attributes)) {
      throw Error(ErrorCode::DuplicateName,
                  "fragment " + f_.name + ": duplicate identifying attribute");
    }
    if (f_.residents.empty()) {
      throw Error(ErrorCode::EmptyResidents, "fragment " + f_.name + " has no resident variables");
    }
    check_refs();
    check_nodes();
    check_acyclic();
    check_hypothesis();
    for (const auto& r : f_.residents) check_payload(r);
  }

 private:
  const VariableSchema& resolve(const VariableRef& ref) {
    const VariableSchema* schema = kb_.find_variable(ref.schema);
    if (!schema) {
      throw Error(ErrorCode::UnresolvedVariable,
                  "fragment " + f_.name + ": unknown variable schema '" + ref.schema + "'");
    }
    if (schema->attributes.size() != ref.args.size()) {
      throw Error(ErrorCode::ArityMismatch,
                  "fragment " + f_.name + ": " + to_string(ref) + " expects " +
                      std::to_string(schema->attributes.size()) + " attribute(s)");
    }
    for (const auto& arg : ref.args) {
      if (arg.literal) {
        if (arg.text.empty()) {
          throw Error(ErrorCode::UnknownAttribute,
                      "fragment " + f_.name + ": empty literal in " + to_string(ref));
        }
        continue;
      }
      if (std::find(f_.attributes.begin(), f_.attributes.end(), arg.text) == f_.attributes.end()) {
        throw Error(ErrorCode::UnknownAttribute, "fragment " + f_.name + ": '" + arg.text +
                                                     "' is not an attribute of the fragment");
      }
    }
    return *schema;
  }

  void check_refs() {
    for (const auto& r : f_.residents) {
      resolve(r.var);
      for (const auto& p : r.parents) resolve(p);
    }
    for (const auto& i : f_.inputs) resolve(i);
    for (const auto& h : f_.hypothesis_vars) resolve(h);
  }

  void check_nodes() {
    std::vector<VariableRef> residents;
    for (const auto& r : f_.residents) residents.push_back(r.var);
    if (has_duplicates(residents)) {
      throw Error(ErrorCode::DuplicateName, "fragment " + f_.name + ": duplicate resident");
    }
    if (has_duplicates(f_.inputs)) {
      throw Error(ErrorCode::DuplicateName, "fragment " + f_.name + ": duplicate input");
    }
    for (const auto& r : f_.residents) {
      if (std::find(f_.inputs.begin(), f_.inputs.end(), r.var) != f_.inputs.end()) {
        if (!r.parents.empty()) {
          throw Error(ErrorCode::InputNotRoot, "fragment " + f_.name + ": input " +
                                                   to_string(r.var) + " has incoming arcs");
        }
        throw Error(ErrorCode::ResidentInputOverlap,
                    "fragment " + f_.name + ": " + to_string(r.var) +
                        " is declared both resident and input");
      }
      if (has_duplicates(r.parents)) {
        throw Error(ErrorCode::DuplicateName,
                    "fragment " + f_.name + ": duplicate parent of " + to_string(r.var));
      }
      for (const auto& p : r.parents) {
        bool declared = f_.find_resident(p) ||
                        std::find(f_.inputs.begin(), f_.inputs.end(), p) != f_.inputs.end();
        if (!declared) {
          throw Error(ErrorCode::UndeclaredNode,
                      "fragment " + f_.name + ": parent " + to_string(p) + " of " +
                          to_string(r.var) + " is neither resident nor input");
        }
      }
    }
  }

  void check_acyclic() {
    // Inputs are roots, so a cycle can only run through residents.
    enum class Mark { None, Active, Done };
    std::map<VariableRef, Mark> mark;
    std::vector<VariableRef> path;
    auto visit = [&](auto&& self, const ResidentSpec& r) -> void {
      Mark& m = mark[r.var];
      if (m == Mark::Done) return;
      if (m == Mark::Active) {
        std::string cycle;
        auto it = std::find(path.begin(), path.end(), r.var);
        for (; it != path.end(); ++it) cycle += to_string(*it) + " -> ";
        throw Error(ErrorCode::CyclicFragmentGraph,
                    "fragment " + f_.name + ": cycle " + cycle + to_string(r.var));
      }
      m = Mark::Active;
      path.push_back(r.var);
      for (const auto& p : r.parents) {
        if (const ResidentSpec* pr = f_.find_resident(p)) self(self, *pr);
      }
      path.pop_back();
      mark[r.var] = Mark::Done;
    };
    for (const auto& r : f_.residents) visit(visit, r);
  }

  void check_hypothesis() {
    if (has_duplicates(f_.hypothesis_vars)) {
      throw Error(ErrorCode::BadHypothesisSubset,
                  "fragment " + f_.name + ": duplicate hypothesis variable");
    }
    std::vector<const VariableSchema*> schemas;
    for (const auto& h : f_.hypothesis_vars) {
      if (std::find(f_.inputs.begin(), f_.inputs.end(), h) == f_.inputs.end()) {
        throw Error(ErrorCode::BadHypothesisSubset, "fragment " + f_.name + ": hypothesis variable " +
                                                        to_string(h) + " is not an input");
      }
      schemas.push_back(kb_.find_variable(h.schema));
    }
    auto& subset = f_.hypothesized_subset;
    if (f_.hypothesis_vars.empty()) {
      bool trivial = subset.empty() || std::all_of(subset.begin(), subset.end(),
                                                   [](const auto& t) { return t.empty(); });
      if (!trivial) {
        throw Error(ErrorCode::BadHypothesisSubset,
                    "fragment " + f_.name + ": hypothesized tuples without hypothesis variables");
      }
      subset.assign(1, {});
      return;
    }
    if (subset.empty()) {
      throw Error(ErrorCode::BadHypothesisSubset,
                  "fragment " + f_.name + ": empty hypothesized subset");
    }
    std::set<std::vector<std::size_t>> indexed;
    for (const auto& tuple : subset) {
      if (tuple.size() != schemas.size()) {
        throw Error(ErrorCode::BadHypothesisSubset,
                    "fragment " + f_.name + ": hypothesized tuple (" + join(tuple) +
                        ") has the wrong arity");
      }
      std::vector<std::size_t> idx;
      for (std::size_t k = 0; k < tuple.size(); ++k) {
        auto i = schemas[k]->states.index_of(tuple[k]);
        if (!i) {
          throw Error(ErrorCode::BadHypothesisSubset,
                      "fragment " + f_.name + ": '" + tuple[k] + "' is not a state of " +
                          schemas[k]->name);
        }
        idx.push_back(*i);
      }
      indexed.insert(std::move(idx));
    }
    subset.clear();
    for (const auto& idx : indexed) {
      std::vector<std::string> tuple;
      for (std::size_t k = 0; k < idx.size(); ++k) tuple.push_back(schemas[k]->states.label(idx[k]));
      subset.push_back(std::move(tuple));
    }
  }

  void check_payload(const ResidentSpec& r) {
    const VariableSchema& x = *kb_.find_variable(r.var.schema);
    const std::string what = "fragment " + f_.name + ", resident " + to_string(r.var);
    std::vector<std::size_t> cards;
    std::size_t rows = 1;
    for (const auto& p : r.parents) {
      cards.push_back(kb_.find_variable(p.schema)->states.size());
      rows *= cards.back();
    }
    const std::size_t nx = x.states.size();
    auto wrong_method = [&](std::string_view payload) {
      throw Error(ErrorCode::InvalidPayload, what + ": " + std::string(payload) +
                                                 " payload does not match method " +
                                                 std::string(to_string(x.method)));
    };
    auto check_unit = [&](double p, const char* name) {
      if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
        throw Error(ErrorCode::InvalidPayload, what + ": " + name + " outside [0,1]");
      }
    };

    std::visit(
        [&](const auto& payload) {
          using T = std::decay_t<decltype(payload)>;
          if constexpr (std::is_same_v<T, TablePayload>) {
            if (x.method != CombinationMethod::Simple) wrong_method("table");
            check_conditional_table(payload.values, nx, rows, false, what);
          } else if constexpr (std::is_same_v<T, DefaultTablePayload>) {
            if (x.method != CombinationMethod::Default) wrong_method("default/specific");
            check_conditional_table(payload.values, nx, rows, false, what);
          } else if constexpr (std::is_same_v<T, NoisyOrPayload>) {
            if (x.method != CombinationMethod::NoisyOr) wrong_method("noisy_or");
            if (payload.links.size() != r.parents.size()) {
              throw Error(ErrorCode::InvalidPayload, what + ": one noisy-OR link per parent required");
            }
            check_unit(payload.leak, "leak");
            for (double p : payload.links) check_unit(p, "link");
          } else if constexpr (std::is_same_v<T, NoisyMinPayload>) {
            if (x.method != CombinationMethod::NoisyMin) wrong_method("noisy_min");
            if (payload.conditioning >= r.parents.size()) {
              throw Error(ErrorCode::InvalidPayload,
                          what + ": conditioning variable must be one of the parents");
            }
            if (payload.blocks.size() != cards[payload.conditioning]) {
              throw Error(ErrorCode::InvalidPayload,
                          what + ": one noisy-MIN block per conditioning state required");
            }
            for (const auto& block : payload.blocks) {
              if (block.leak.size() != nx || !is_distribution(block.leak)) {
                throw Error(ErrorCode::InvalidDistribution, what + ": leak is not a distribution");
              }
              if (block.links.size() != r.parents.size()) {
                throw Error(ErrorCode::InvalidPayload, what + ": one link set per parent required");
              }
              for (std::size_t i = 0; i < block.links.size(); ++i) {
                if (i == payload.conditioning) {
                  if (!block.links[i].empty()) {
                    throw Error(ErrorCode::InvalidPayload,
                                what + ": the conditioning parent carries no links");
                  }
                  continue;
                }
                if (block.links[i].size() != cards[i]) {
                  throw Error(ErrorCode::InvalidPayload,
                              what + ": link for " + to_string(r.parents[i]) +
                                  " needs one distribution per parent state");
                }
                for (const auto& dist : block.links[i]) {
                  if (dist.size() != nx || !is_distribution(dist)) {
                    throw Error(ErrorCode::InvalidDistribution,
                                what + ": link for " + to_string(r.parents[i]) +
                                    " is not a distribution");
                  }
                }
              }
            }
          } else if constexpr (std::is_same_v<T, SigmoidPayload>) {
            if (x.method != CombinationMethod::Sigmoid) wrong_method("sigmoid");
            if (payload.weights.size() != r.parents.size()) {
              throw Error(ErrorCode::InvalidPayload, what + ": one sigmoid weight per parent required");
            }
            if (!std::isfinite(payload.bias) ||
                !std::all_of(payload.weights.begin(), payload.weights.end(),
                             [](double w) { return std::isfinite(w); })) {
              throw Error(ErrorCode::InvalidPayload, what + ": non-finite sigmoid parameter");
            }
          } else {
            if (!x.states.has_na()) {
              throw Error(ErrorCode::InvalidPayload, what + ": na payload on a variable without NA");
            }
          }
        },
        r.influence);

    if (r.table) check_conditional_table(*r.table, nx, rows, true, what + " local table");
  }

  const KnowledgeBase& kb_;
  FragmentSchema& f_;
};

}  // namespace

StateSpace::StateSpace(std::vector<std::string> labels, bool ordered)
    : labels_(std::move(labels)), ordered_(ordered) {
  if (labels_.size() < 2) {
    throw Error(ErrorCode::InvalidStateSpace, "a variable needs at least two states");
  }
  if (has_duplicates(labels_)) throw Error(ErrorCode::InvalidStateSpace, "duplicate state label");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i].empty()) throw Error(ErrorCode::InvalidStateSpace, "empty state label");
    if (labels_[i] == kNaState && i + 1 != labels_.size()) {
      throw Error(ErrorCode::InvalidStateSpace, "NA must be the last state");
    }
  }
}

bool StateSpace::has_na() const noexcept { return na_index().has_value(); }

std::optional<std::size_t> StateSpace::na_index() const noexcept {
  if (!labels_.empty() && labels_.back() == kNaState) return labels_.size() - 1;
  return std::nullopt;
}

std::optional<std::size_t> StateSpace::index_of(std::string_view label) const noexcept {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels_.begin());
}

std::string_view to_string(CombinationMethod m) noexcept {
  switch (m) {
    case CombinationMethod::Simple: return "simple";
    case CombinationMethod::Default: return "default";
    case CombinationMethod::NoisyOr: return "noisy_or";
    case CombinationMethod::NoisyMin: return "noisy_min";
    case CombinationMethod::Sigmoid: return "sigmoid";
  }
  return "simple";
}

std::optional<CombinationMethod> parse_method(std::string_view id) noexcept {
  for (auto m : {CombinationMethod::Simple, CombinationMethod::Default, CombinationMethod::NoisyOr,
                 CombinationMethod::NoisyMin, CombinationMethod::Sigmoid}) {
    if (to_string(m) == id) return m;
  }
  return std::nullopt;
}

std::vector<double> default_distribution(const VariableSchema& schema) {
  if (schema.default_distribution) return *schema.default_distribution;
  const std::size_t n = schema.states.size();
  const auto na = schema.states.na_index();
  const std::size_t defined = na ? n - 1 : n;
  std::vector<double> p(n, 1.0 / static_cast<double>(defined));
  if (na) p[*na] = 0.0;
  return p;
}

std::string to_string(const VariableRef& ref) {
  if (ref.args.empty()) return ref.schema;
  std::string out = ref.schema + "(";
  for (std::size_t i = 0; i < ref.args.size(); ++i) {
    if (i) out += ",";
    out += ref.args[i].literal ? "\"" + ref.args[i].text + "\"" : ref.args[i].text;
  }
  return out + ")";
}

std::vector<FragmentArc> FragmentSchema::arcs() const {
  std::vector<FragmentArc> out;
  for (const auto& r : residents) {
    for (const auto& p : r.parents) out.push_back({p, r.var});
  }
  return out;
}

const ResidentSpec* FragmentSchema::find_resident(const VariableRef& ref) const {
  for (const auto& r : residents) {
    if (r.var == ref) return &r;
  }
  return nullptr;
}

void KnowledgeBase::register_variable_schema(VariableSchema schema) {
  if (schema.name.empty()) throw Error(ErrorCode::InvalidStateSpace, "variable schema without a name");
  if (schema.states.size() < 2) {
    throw Error(ErrorCode::InvalidStateSpace, schema.name + ": a variable needs at least two states");
  }
  if (has_duplicates(schema.attributes)) {
    throw Error(ErrorCode::DuplicateName, schema.name + ": duplicate identifying attribute");
  }
  if (schema.default_distribution) {
    const auto& p = *schema.default_distribution;
    if (p.size() != schema.states.size() || !is_distribution(p)) {
      throw Error(ErrorCode::InvalidDistribution,
                  schema.name + ": default distribution must have one entry per state and sum to 1");
    }
  }
  if (auto it = variables_.find(schema.name); it != variables_.end()) {
    if (it->second == schema) return;
    throw Error(ErrorCode::DuplicateName, "variable schema '" + schema.name + "' already registered");
  }
  std::string name = schema.name;
  variables_.emplace(std::move(name), std::move(schema));
}

void KnowledgeBase::register_fragment_schema(FragmentSchema schema) {
  FragmentValidator(*this, schema).run();
  if (auto it = fragments_.find(schema.name); it != fragments_.end()) {
    if (*it->second == schema) return;
    throw Error(ErrorCode::DuplicateName, "fragment schema '" + schema.name + "' already registered");
  }
  std::string name = schema.name;
  fragments_.emplace(std::move(name), std::make_shared<const FragmentSchema>(std::move(schema)));
}

const VariableSchema* KnowledgeBase::find_variable(std::string_view name) const {
  auto it = variables_.find(name);
  return it == variables_.end() ? nullptr : &it->second;
}

const VariableSchema& KnowledgeBase::variable(std::string_view name) const {
  if (const auto* v = find_variable(name)) return *v;
  throw Error(ErrorCode::UnresolvedVariable, "unknown variable schema '" + std::string(name) + "'");
}

std::shared_ptr<const FragmentSchema> KnowledgeBase::find_fragment(std::string_view name) const {
  auto it = fragments_.find(name);
  return it == fragments_.end() ? nullptr : it->second;
}

std::shared_ptr<const FragmentSchema> KnowledgeBase::fragment(std::string_view name) const {
  if (auto f = find_fragment(name)) return f;
  throw Error(ErrorCode::UnknownSchema, "unknown fragment schema '" + std::string(name) + "'");
}

bool operator==(const KnowledgeBase& a, const KnowledgeBase& b) {
  if (a.variables_ != b.variables_) return false;
  if (a.fragments_.size() != b.fragments_.size()) return false;
  return std::equal(a.fragments_.begin(), a.fragments_.end(), b.fragments_.begin(),
                    [](const auto& x, const auto& y) {
                      return x.first == y.first && *x.second == *y.second;
                    });
}

}  // namespace fragbn
