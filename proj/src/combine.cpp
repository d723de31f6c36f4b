#include "fragbn/combine.hpp"

#include <algorithm>
#include <functional>
#include <optional>

namespace fragbn {

namespace {

std::string cycle_text(const std::vector<VariableInstance>& cycle) {
  std::string out;
  for (std::size_t i = 0; i < cycle.size(); ++i) {
    if (i) out += " -> ";
    out += cycle[i].name();
  }
  return out;
}

std::optional<std::vector<VariableInstance>> find_cycle(const Dag& graph) {
  enum class Mark { None, Active, Done };
  std::map<VariableInstance, Mark> mark;
  std::vector<VariableInstance> path;
  std::optional<std::vector<VariableInstance>> found;
  // Walks parent links; a cycle found this way is reported child-to-parent,
  // so it is reversed before returning.
  std::function<void(const VariableInstance&)> visit = [&](const VariableInstance& v) {
    if (found) return;
    Mark& m = mark[v];
    if (m == Mark::Done) return;
    if (m == Mark::Active) {
      auto it = std::find(path.begin(), path.end(), v);
      std::vector<VariableInstance> cycle(it, path.end());
      cycle.push_back(v);
      std::reverse(cycle.begin(), cycle.end());
      found = std::move(cycle);
      return;
    }
    m = Mark::Active;
    path.push_back(v);
    if (auto it = graph.find(v); it != graph.end()) {
      for (const auto& p : it->second) visit(p);
    }
    path.pop_back();
    mark[v] = Mark::Done;
  };
  for (const auto& [v, parents] : graph) visit(v);
  return found;
}

// Fragments whose hypothesis variables lie inside H, with their relation to v.
struct Classified {
  FragmentPtr fragment;
  Relation relation;
};

std::vector<Classified> classify_all(std::span<const FragmentPtr> fragments,
                                     const HypothesisPartition& s, std::size_t element) {
  std::vector<Classified> out;
  for (const auto& f : fragments) {
    bool inside = std::all_of(f->hypothesis_vars().begin(), f->hypothesis_vars().end(),
                              [&](const VariableInstance& h) { return s.var_index(h).has_value(); });
    if (!inside) continue;
    out.push_back({f, classify(*f, s, element)});
  }
  return out;
}

void check_element(const HypothesisPartition& s, std::size_t element) {
  if (element >= s.size()) {
    throw Error(ErrorCode::InvalidPartition, "hypothesis element " + std::to_string(element) +
                                                 " out of range (" + std::to_string(s.size()) +
                                                 " elements)");
  }
}

std::vector<FragmentPtr> concat(std::vector<FragmentPtr> a, const std::vector<FragmentPtr>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

ErrorCode report_code(const ConsistencyReport& report) {
  if (report.has(ConsistencyCheck::Acyclicity)) return ErrorCode::CyclicUnion;
  bool coverage_only = std::all_of(report.issues.begin(), report.issues.end(), [](const auto& i) {
    return i.check == ConsistencyCheck::Coverage;
  });
  return coverage_only ? ErrorCode::CoverageGap : ErrorCode::InconsistentSet;
}

VariableRef literal_ref(const VariableInstance& v) {
  VariableRef ref{v.schema, {}};
  for (const auto& a : v.args) ref.args.push_back({a, true});
  return ref;
}

std::vector<double> checked_prior(const KnowledgeBase& kb, const VariableInstance& v,
                                  const std::vector<double>& p) {
  const auto& schema = kb.variable(v.schema);
  double sum = 0.0;
  bool nonneg = true;
  for (double x : p) {
    nonneg = nonneg && x >= 0.0;
    sum += x;
  }
  if (p.size() != schema.states.size() || !nonneg || std::abs(sum - 1.0) > kNormTolerance) {
    throw Error(ErrorCode::InvalidDistribution,
                "prior for " + v.name() + " must have " + std::to_string(schema.states.size()) +
                    " non-negative entries summing to 1");
  }
  return p;
}

struct NodePlan {
  std::vector<VariableInstance> parents;  // table order
  std::function<std::vector<double>()> table;
  bool root = false;
  bool hypothesis = false;
};

BayesNet build_bn(const KnowledgeBase& kb, std::map<VariableInstance, NodePlan> plan,
                  const PriorMap& priors, MaterializeOptions options) {
  for (const auto& [v, p] : priors) {
    auto it = plan.find(v);
    if (it == plan.end() || !it->second.root) {
      throw Error(ErrorCode::UnknownNode, "prior supplied for " + v.name() +
                                              ", which is not an input or hypothesis variable");
    }
  }
  // Kahn's algorithm, ties broken by variable order for determinism.
  std::map<VariableInstance, std::size_t> pending;
  std::map<VariableInstance, std::vector<VariableInstance>> children;
  for (const auto& [v, p] : plan) {
    pending[v] = p.parents.size();
    for (const auto& parent : p.parents) children[parent].push_back(v);
  }
  std::set<VariableInstance> ready;
  for (const auto& [v, n] : pending) {
    if (n == 0) ready.insert(v);
  }
  BayesNet bn;
  while (!ready.empty()) {
    VariableInstance v = *ready.begin();
    ready.erase(ready.begin());
    const NodePlan& p = plan.at(v);
    const auto& schema = kb.variable(v.schema);
    BnNode node;
    node.name = v.name();
    node.states = schema.states.labels();
    for (const auto& parent : p.parents) node.parents.push_back(bn.find(parent.name()));
    if (p.root) {
      if (auto it = priors.find(v); it != priors.end()) {
        node.cpt = checked_prior(kb, v, it->second);
      } else if (p.hypothesis) {
        node.cpt = default_distribution(schema);
      } else if (options.require_closed) {
        throw Error(ErrorCode::MissingPrior, "no prior for input " + v.name());
      } else {
        node.open_input = true;
        node.default_prior = default_distribution(schema);
      }
    } else {
      node.cpt = p.table();
    }
    bn.add_node(std::move(node));
    for (const auto& c : children[v]) {
      if (--pending[c] == 0) ready.insert(c);
    }
  }
  if (bn.size() != plan.size()) {
    throw Error(ErrorCode::CyclicUnion, "materialized graph has a directed cycle");
  }
  return bn;
}

}  // namespace

CyclicUnionError::CyclicUnionError(std::vector<VariableInstance> cycle)
    : Error(ErrorCode::CyclicUnion, "graph union has a directed cycle: " + cycle_text(cycle)),
      cycle_(std::move(cycle)) {}

void require_acyclic(const Dag& graph) {
  if (auto cycle = find_cycle(graph)) throw CyclicUnionError(std::move(*cycle));
}

Dag graph_union(std::span<const FragmentPtr> fragments, const HypothesisPartition& partition,
                std::size_t element) {
  check_element(partition, element);
  Dag graph;
  for (const auto& c : classify_all(fragments, partition, element)) {
    if (c.relation != Relation::Subsumes) continue;
    for (const auto& i : c.fragment->inputs()) graph[i];
    for (const auto& r : c.fragment->residents()) {
      auto& parents = graph[r.var];
      parents.insert(r.parents.begin(), r.parents.end());
    }
  }
  require_acyclic(graph);
  return graph;
}

const char* to_string(ConsistencyCheck c) noexcept {
  switch (c) {
    case ConsistencyCheck::Acyclicity: return "acyclicity";
    case ConsistencyCheck::HypothesisVariables: return "hypothesis-variable consistency";
    case ConsistencyCheck::Coverage: return "home fragment (clause 1: coverage)";
    case ConsistencyCheck::Residency: return "home fragment (clause 2: residency)";
    case ConsistencyCheck::Enabling: return "home fragment (clause 3: enabling conditions)";
  }
  return "unknown";
}

bool ConsistencyReport::has(ConsistencyCheck c) const noexcept {
  return std::any_of(issues.begin(), issues.end(), [c](const auto& i) { return i.check == c; });
}

std::string ConsistencyReport::format() const {
  if (issues.empty()) return "consistent\n";
  std::string out;
  for (const auto& i : issues) {
    out += std::string(to_string(i.check)) + ": element " + i.element;
    if (!i.fragment.empty()) out += ", fragment " + i.fragment;
    if (!i.variable.empty()) out += ", variable " + i.variable;
    out += ": " + i.message + "\n";
  }
  return out;
}

ConsistencyError::ConsistencyError(ErrorCode code, ConsistencyReport report)
    : Error(code, "fragment set is not globally consistent:\n" + report.format()),
      report_(std::move(report)) {}

ConsistencyReport check_global_consistency(const KnowledgeBase& kb,
                                           std::span<const FragmentPtr> fragments,
                                           const HypothesisPartition& partition,
                                           std::size_t element) {
  check_element(partition, element);
  ConsistencyReport report;
  const std::string el = partition.describe(kb, element);
  auto issue = [&](ConsistencyCheck c, std::string fragment, std::string variable, std::string msg) {
    report.issues.push_back({c, el, std::move(fragment), std::move(variable), std::move(msg)});
  };

  for (const auto& f : fragments) {
    if (!hypothesis_variable_consistent(*f, partition)) {
      issue(ConsistencyCheck::HypothesisVariables, f->label(), "",
            "fragment hypothesis variables are not aligned with the partition's");
    }
  }
  auto classified = classify_all(fragments, partition, element);
  std::vector<FragmentPtr> usable;
  for (const auto& c : classified) {
    if (hypothesis_variable_consistent(*c.fragment, partition)) usable.push_back(c.fragment);
  }

  try {
    graph_union(usable, partition, element);
  } catch (const CyclicUnionError& e) {
    issue(ConsistencyCheck::Acyclicity, "", "", std::string("cycle ") + cycle_text(e.cycle()));
  }

  std::set<VariableInstance> residents;
  for (const auto& c : classified) {
    for (const auto& r : c.fragment->residents()) residents.insert(r.var);
  }
  for (const auto& x : residents) {
    std::size_t subsuming = 0;
    bool residency_ok = true;
    for (const auto& c : classified) {
      if (!c.fragment->is_resident(x)) continue;
      if (c.relation == Relation::Subsumes) ++subsuming;
      if (c.relation == Relation::Straddles) {
        residency_ok = false;
        issue(ConsistencyCheck::Residency, c.fragment->label(), x.name(),
              "fragment neither subsumes nor is disjoint from the element");
      }
    }
    if (subsuming == 0) {
      issue(ConsistencyCheck::Coverage, "", x.name(),
            "variable is resident in no fragment subsuming the element");
      continue;
    }
    if (!residency_ok) continue;
    auto contributions = contributions_for(usable, partition, element, x);
    try {
      combine_influences(kb, x, contributions);
    } catch (const CombinationError& e) {
      issue(ConsistencyCheck::Enabling, e.violation().fragment, x.name(),
            e.violation().clause + ": " + e.violation().message);
    } catch (const Error& e) {
      issue(ConsistencyCheck::Enabling, "", x.name(), std::string(to_string(e.code())) + ": " + e.what());
    }
  }
  return report;
}

std::vector<FragmentPtr> synthesize_na(const KnowledgeBase& kb, std::span<const FragmentPtr> fragments,
                                       const HypothesisPartition& partition, std::size_t element) {
  check_element(partition, element);
  auto classified = classify_all(fragments, partition, element);
  std::map<VariableInstance, bool> touched;  // resident -> some fragment touches v
  for (const auto& c : classified) {
    for (const auto& r : c.fragment->residents()) {
      touched[r.var] = touched[r.var] || c.relation != Relation::Disjoint;
    }
  }
  std::vector<FragmentPtr> out;
  for (const auto& [x, covered] : touched) {
    if (covered || !kb.variable(x.schema).states.has_na()) continue;
    auto schema = std::make_shared<FragmentSchema>();
    schema->name = "NA:" + x.name() + "@";
    for (auto flat : partition.elements()[element]) schema->name += "." + std::to_string(flat);
    schema->residents.push_back({literal_ref(x), {}, NaPayload{}, std::nullopt});
    for (const auto& h : partition.vars()) {
      schema->inputs.push_back(literal_ref(h));
      schema->hypothesis_vars.push_back(literal_ref(h));
    }
    for (auto flat : partition.elements()[element]) {
      auto tuple = partition.decode(flat);
      std::vector<std::string> labels;
      for (std::size_t k = 0; k < tuple.size(); ++k) {
        labels.push_back(kb.variable(partition.vars()[k].schema).states.label(tuple[k]));
      }
      schema->hypothesized_subset.push_back(std::move(labels));
    }
    out.push_back(std::make_shared<const FragmentInstance>(kb, std::move(schema), Binding{}, true));
  }
  return out;
}

std::vector<Contribution> contributions_for(std::span<const FragmentPtr> fragments,
                                            const HypothesisPartition& partition,
                                            std::size_t element, const VariableInstance& x) {
  std::vector<Contribution> out;
  for (const auto& f : fragments) {
    const auto* r = f->find_resident(x);
    if (!r) continue;
    bool inside = std::all_of(f->hypothesis_vars().begin(), f->hypothesis_vars().end(),
                              [&](const VariableInstance& h) { return partition.var_index(h).has_value(); });
    if (!inside || classify(*f, partition, element) != Relation::Subsumes) continue;
    out.push_back({f.get(), r});
  }
  return out;
}

std::vector<FragmentPtr> flatten(std::span<const Component> components) {
  std::map<std::pair<std::string, Binding>, FragmentPtr> unique;
  auto add = [&](const FragmentPtr& f) {
    if (!f->synthesized()) unique.emplace(f->identity(), f);
  };
  for (const auto& c : components) {
    std::visit(
        [&](const auto& ptr) {
          using T = std::decay_t<decltype(ptr)>;
          if constexpr (std::is_same_v<T, FragmentPtr>) {
            add(ptr);
          } else {
            for (const auto& f : ptr->components()) add(f);
          }
        },
        c);
  }
  std::vector<FragmentPtr> out;
  for (auto& [key, f] : unique) out.push_back(f);
  return out;
}

CompoundFragment::CompoundFragment(std::shared_ptr<const KnowledgeBase> kb,
                                   std::vector<FragmentPtr> components,
                                   std::vector<FragmentPtr> synthesized, HypothesisPartition partition,
                                   std::size_t element)
    : kb_(std::move(kb)),
      components_(std::move(components)),
      synthesized_(std::move(synthesized)),
      partition_(std::move(partition)),
      element_(element) {
  check_element(partition_, element_);
  auto all = all_fragments();
  for (const auto& f : all) {
    for (const auto& r : f->residents()) residents_.insert(r.var);
  }
  for (const auto& f : all) {
    for (const auto& i : f->inputs()) {
      if (!residents_.count(i)) inputs_.insert(i);
    }
  }
  for (const auto& i : inputs_) graph_[i];
  for (const auto& x : residents_) {
    auto& parents = graph_[x];
    for (const auto& c : contributions_for(all, partition_, element_, x)) {
      parents.insert(c.resident->parents.begin(), c.resident->parents.end());
    }
  }
}

std::vector<FragmentPtr> CompoundFragment::all_fragments() const {
  return concat(components_, synthesized_);
}

const CombinationResult& CompoundFragment::local_distribution(const VariableInstance& x) const {
  if (auto it = cache_.find(x); it != cache_.end()) return it->second;
  if (!residents_.count(x)) {
    throw Error(ErrorCode::UnknownVariable, x.name() + " is not resident in the compound fragment");
  }
  auto all = all_fragments();
  auto contributions = contributions_for(all, partition_, element_, x);
  return cache_.emplace(x, combine_influences(*kb_, x, contributions)).first->second;
}

CompoundFragment combine_compound(std::shared_ptr<const KnowledgeBase> kb,
                                  std::span<const Component> components,
                                  const HypothesisPartition& partition, std::size_t element,
                                  CombineOptions options) {
  check_element(partition, element);
  auto fragments = flatten(components);
  std::vector<FragmentPtr> synthesized;
  if (options.synthesize_na) synthesized = synthesize_na(*kb, fragments, partition, element);
  auto all = concat(fragments, synthesized);
  auto report = check_global_consistency(*kb, all, partition, element);
  if (!report.ok()) {
    const auto code = report_code(report);
    throw ConsistencyError(code, std::move(report));
  }
  return CompoundFragment(std::move(kb), std::move(fragments), std::move(synthesized), partition,
                          element);
}

MultiFragment combine_multi(std::shared_ptr<const KnowledgeBase> kb,
                            std::span<const Component> components,
                            const HypothesisPartition& partition, CombineOptions options) {
  auto fragments = flatten(components);
  std::vector<FragmentPtr> synthesized;
  if (options.synthesize_na) {
    for (std::size_t v = 0; v < partition.size(); ++v) {
      auto extra = synthesize_na(*kb, fragments, partition, v);
      synthesized.insert(synthesized.end(), extra.begin(), extra.end());
    }
  }
  auto all = concat(fragments, synthesized);
  ConsistencyReport report;
  for (std::size_t v = 0; v < partition.size(); ++v) {
    auto r = check_global_consistency(*kb, all, partition, v);
    report.issues.insert(report.issues.end(), r.issues.begin(), r.issues.end());
  }
  if (!report.ok()) {
    const auto code = report_code(report);
    throw ConsistencyError(code, std::move(report));
  }

  MultiFragment multi;
  multi.kb_ = kb;
  multi.partition_ = partition;
  multi.components_ = fragments;
  multi.synthesized_ = synthesized;
  for (std::size_t v = 0; v < partition.size(); ++v) {
    multi.elements_.emplace_back(kb, fragments, synthesized, partition, v);
    const auto& compound = multi.elements_.back();
    multi.residents_.insert(compound.residents().begin(), compound.residents().end());
    for (const auto& [node, parents] : compound.graph()) {
      multi.graph_[node].insert(parents.begin(), parents.end());
    }
  }
  for (const auto& e : multi.elements_) {
    for (const auto& i : e.inputs()) {
      if (!multi.residents_.count(i)) multi.inputs_.insert(i);
    }
  }
  require_acyclic(multi.graph_);
  return multi;
}

BayesNet materialize_bn(const CompoundFragment& compound, const PriorMap& priors,
                        MaterializeOptions options) {
  std::map<VariableInstance, NodePlan> plan;
  for (const auto& h : compound.partition().vars()) {
    plan[h].root = true;
    plan[h].hypothesis = true;
  }
  for (const auto& i : compound.inputs()) plan[i].root = true;
  for (const auto& x : compound.residents()) {
    const auto& parents = compound.graph().at(x);
    NodePlan& p = plan[x];
    p.parents.assign(parents.begin(), parents.end());
    p.table = [&compound, x] { return compound.local_distribution(x).cpt; };
  }
  return build_bn(compound.kb(), std::move(plan), priors, options);
}

BayesNet materialize_bn(const MultiFragment& multi, const PriorMap& priors, MaterializeOptions options) {
  const auto& s = multi.partition();
  const KnowledgeBase& kb = multi.kb();
  std::map<VariableInstance, NodePlan> plan;
  for (const auto& h : s.vars()) {
    plan[h].root = true;
    plan[h].hypothesis = true;
  }
  for (const auto& i : multi.inputs()) plan[i].root = true;
  auto all = concat(multi.components(), multi.synthesized());
  for (const auto& x : multi.residents()) {
    std::set<VariableInstance> parents = multi.graph().at(x);
    for (const auto& f : all) {
      if (f->is_resident(x)) parents.insert(f->hypothesis_vars().begin(), f->hypothesis_vars().end());
    }
    NodePlan& p = plan[x];
    p.parents.assign(parents.begin(), parents.end());
    p.table = [&multi, &kb, &s, x, bn_parents = p.parents]() {
      std::vector<std::size_t> cards;
      std::size_t rows = 1;
      std::vector<std::optional<std::size_t>> h_coord;
      for (const auto& q : bn_parents) {
        cards.push_back(kb.variable(q.schema).states.size());
        rows *= cards.back();
        h_coord.push_back(s.var_index(q));
      }
      const std::size_t n = kb.variable(x.schema).states.size();
      std::vector<double> table(rows * n);
      std::vector<std::size_t> cfg(cards.size());
      for (std::size_t row = 0; row < rows; ++row) {
        std::size_t rest = row;
        for (std::size_t k = cards.size(); k-- > 0;) {
          cfg[k] = rest % cards[k];
          rest /= cards[k];
        }
        // Coordinates of H that X does not depend on are fixed at state 0;
        // every completion selects the same resident fragments for X.
        std::vector<std::size_t> h(s.vars().size(), 0);
        for (std::size_t k = 0; k < cfg.size(); ++k) {
          if (h_coord[k]) h[*h_coord[k]] = cfg[k];
        }
        const auto& dist = multi.element(s.element_of(s.encode(h))).local_distribution(x);
        std::vector<std::size_t> sub;
        for (const auto& q : dist.parents) {
          auto it = std::lower_bound(bn_parents.begin(), bn_parents.end(), q);
          sub.push_back(cfg[static_cast<std::size_t>(it - bn_parents.begin())]);
        }
        auto r = dist.row(sub);
        std::copy(r.begin(), r.end(), table.begin() + static_cast<std::ptrdiff_t>(row * n));
      }
      return table;
    };
  }
  return build_bn(kb, std::move(plan), priors, options);
}

}  // namespace fragbn
