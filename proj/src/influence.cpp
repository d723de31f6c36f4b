#include "fragbn/influence.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>

namespace fragbn {

namespace {

struct Frame {
  std::vector<VariableInstance> parents;
  std::vector<std::size_t> cards;
  std::size_t child_card = 0;
  std::size_t rows = 1;

  std::vector<std::size_t> decode(std::size_t row) const {
    std::vector<std::size_t> cfg(cards.size());
    for (std::size_t k = cards.size(); k-- > 0;) {
      cfg[k] = row % cards[k];
      row /= cards[k];
    }
    return cfg;
  }
};

std::size_t card_of(const KnowledgeBase& kb, const VariableInstance& v) {
  return kb.variable(v.schema).states.size();
}

Frame make_frame(const KnowledgeBase& kb, const VariableInstance& x,
                 std::span<const Contribution> contributions) {
  std::set<VariableInstance> all;
  for (const auto& c : contributions) all.insert(c.resident->parents.begin(), c.resident->parents.end());
  Frame f;
  f.parents.assign(all.begin(), all.end());
  for (const auto& p : f.parents) {
    f.cards.push_back(card_of(kb, p));
    f.rows *= f.cards.back();
  }
  f.child_card = card_of(kb, x);
  return f;
}

// Position of each of the contribution's declared parents in the frame.
std::vector<std::size_t> positions(const Frame& frame, const Contribution& c) {
  std::vector<std::size_t> pos;
  for (const auto& p : c.resident->parents) {
    auto it = std::lower_bound(frame.parents.begin(), frame.parents.end(), p);
    pos.push_back(static_cast<std::size_t>(it - frame.parents.begin()));
  }
  return pos;
}

// Row of a fragment-local table (declared parent order) for a frame config.
std::size_t local_row(const Frame& frame, const std::vector<std::size_t>& pos,
                      const std::vector<std::size_t>& cfg) {
  std::size_t row = 0;
  for (auto k : pos) row = row * frame.cards[k] + cfg[k];
  return row;
}

CombinationResult empty_result(const VariableInstance& x, const Frame& frame) {
  CombinationResult r;
  r.child = x;
  r.child_card = frame.child_card;
  r.parents = frame.parents;
  r.parent_cards = frame.cards;
  r.cpt.assign(frame.rows * frame.child_card, 0.0);
  return r;
}

// Product of factors in sorted order so the result does not depend on the
// order in which contributions were supplied.
double ordered_product(std::vector<double>& factors) {
  std::sort(factors.begin(), factors.end());
  double p = 1.0;
  for (double f : factors) p *= f;
  return p;
}

[[noreturn]] void fail(CombinationMethod m, std::string fragment, std::string clause,
                       std::string message) {
  throw CombinationError(EnablingViolation{m, std::move(fragment), std::move(clause), std::move(message)});
}

std::optional<EnablingViolation> violation(CombinationMethod m, std::string fragment,
                                           std::string clause, std::string message) {
  return EnablingViolation{m, std::move(fragment), std::move(clause), std::move(message)};
}

template <class Payload>
const Payload* payload_of(const Contribution& c) {
  return std::get_if<Payload>(&c.resident->spec->influence);
}

template <class Payload>
std::optional<EnablingViolation> require_payload(CombinationMethod m, const VariableInstance& x,
                                                 std::span<const Contribution> cs,
                                                 const char* expected) {
  for (const auto& c : cs) {
    if (!payload_of<Payload>(c)) {
      return violation(m, c.fragment->label(), "payload",
                       std::string(to_string(m)) + " combination for " + x.name() + " needs a " +
                           expected + " influence function");
    }
  }
  return std::nullopt;
}

std::optional<EnablingViolation> require_single_home(CombinationMethod m, const VariableInstance& x,
                                                     std::span<const Contribution> cs) {
  if (cs.size() != 1) {
    std::string where = cs.empty() ? "" : cs[1 % cs.size()].fragment->label();
    return violation(m, where, "single home fragment",
                     std::string(to_string(m)) + " combination requires " + x.name() +
                         " to be resident in exactly one fragment, found " +
                         std::to_string(cs.size()));
  }
  return std::nullopt;
}

std::optional<EnablingViolation> require_binary(const KnowledgeBase& kb, CombinationMethod m,
                                                const VariableInstance& x,
                                                std::span<const Contribution> cs) {
  const char* rule = m == CombinationMethod::NoisyOr
                         ? "noisy-OR requires a binary child and binary parents"
                         : "sigmoid combination requires a binary child and binary parents";
  if (card_of(kb, x) != 2) {
    return violation(m, cs.empty() ? "" : cs[0].fragment->label(), "binary",
                     std::string(rule) + ": " + x.name() + " has " +
                         std::to_string(card_of(kb, x)) + " states");
  }
  if (kb.variable(x.schema).states.has_na()) {
    return violation(m, cs.empty() ? "" : cs[0].fragment->label(), "binary",
                     std::string(rule) + ": " + x.name() + " has an NA state");
  }
  for (const auto& c : cs) {
    for (const auto& p : c.resident->parents) {
      if (card_of(kb, p) != 2) {
        return violation(m, c.fragment->label(), "binary",
                         std::string(rule) + ": parent " + p.name() + " of " + x.name() +
                             " has " + std::to_string(card_of(kb, p)) + " states");
      }
    }
  }
  return std::nullopt;
}

std::optional<EnablingViolation> enabling_simple(const KnowledgeBase&, const VariableInstance& x,
                                                 std::span<const Contribution> cs) {
  constexpr auto m = CombinationMethod::Simple;
  if (auto v = require_single_home(m, x, cs)) return v;
  return require_payload<TablePayload>(m, x, cs, "table");
}

std::optional<EnablingViolation> enabling_default(const KnowledgeBase&, const VariableInstance& x,
                                                  std::span<const Contribution> cs) {
  constexpr auto m = CombinationMethod::Default;
  if (auto v = require_payload<DefaultTablePayload>(m, x, cs, "default/specific table")) return v;
  const Contribution* def = nullptr;
  const Contribution* spec = nullptr;
  for (const auto& c : cs) {
    auto& slot = payload_of<DefaultTablePayload>(c)->specificity == Specificity::Default ? def : spec;
    if (slot) {
      return violation(m, c.fragment->label(), "one default and one specific",
                       "default combination for " + x.name() + " found two " +
                           (&slot == &def ? "default" : "specific") + " fragments");
    }
    slot = &c;
  }
  if (!def && !spec) {
    return violation(m, "", "home fragment", "no fragment defines " + x.name());
  }
  if (def && spec) {
    const auto& dp = def->resident->parents;
    const auto& sp = spec->resident->parents;
    for (const auto& p : dp) {
      if (std::find(sp.begin(), sp.end(), p) == sp.end()) {
        return violation(m, spec->fragment->label(), "specific parents superset",
                         "specific fragment for " + x.name() + " lacks default parent " + p.name());
      }
    }
  }
  return std::nullopt;
}

std::optional<EnablingViolation> enabling_noisy_or(const KnowledgeBase& kb, const VariableInstance& x,
                                                   std::span<const Contribution> cs) {
  constexpr auto m = CombinationMethod::NoisyOr;
  if (cs.empty()) return violation(m, "", "home fragment", "no fragment defines " + x.name());
  if (auto v = require_payload<NoisyOrPayload>(m, x, cs, "noisy_or")) return v;
  if (auto v = require_binary(kb, m, x, cs)) return v;
  std::map<VariableInstance, double> links;
  for (const auto& c : cs) {
    const auto* p = payload_of<NoisyOrPayload>(c);
    for (std::size_t i = 0; i < c.resident->parents.size(); ++i) {
      auto [it, inserted] = links.emplace(c.resident->parents[i], p->links[i]);
      if (!inserted && it->second != p->links[i]) {
        return violation(m, c.fragment->label(), "disjoint parent subsets",
                         "conflicting noisy-OR links for parent " + it->first.name() + " of " +
                             x.name());
      }
    }
  }
  return std::nullopt;
}

std::optional<EnablingViolation> enabling_noisy_min(const KnowledgeBase& kb, const VariableInstance& x,
                                                    std::span<const Contribution> cs) {
  constexpr auto m = CombinationMethod::NoisyMin;
  if (cs.empty()) return violation(m, "", "home fragment", "no fragment defines " + x.name());
  if (auto v = require_payload<NoisyMinPayload>(m, x, cs, "noisy_min")) return v;
  const auto& states = kb.variable(x.schema).states;
  if (!states.ordered() || states.has_na()) {
    return violation(m, cs[0].fragment->label(), "ordered states",
                     "noisy-MIN requires " + x.name() + " to have an ordered state space without NA");
  }
  std::optional<VariableInstance> conditioning;
  std::set<VariableInstance> linked;
  for (const auto& c : cs) {
    const auto* p = payload_of<NoisyMinPayload>(c);
    const auto& cond = c.resident->parents.at(p->conditioning);
    if (conditioning && *conditioning != cond) {
      return violation(m, c.fragment->label(), "shared conditioning variable",
                       "noisy-MIN contributions for " + x.name() + " condition on both " +
                           conditioning->name() + " and " + cond.name());
    }
    conditioning = cond;
  }
  for (const auto& c : cs) {
    const auto* p = payload_of<NoisyMinPayload>(c);
    for (std::size_t i = 0; i < c.resident->parents.size(); ++i) {
      if (i == p->conditioning) continue;
      const auto& parent = c.resident->parents[i];
      if (parent == *conditioning || !linked.insert(parent).second) {
        return violation(m, c.fragment->label(), "disjoint parent subsets",
                         "parent " + parent.name() + " of " + x.name() +
                             " is contributed more than once");
      }
    }
  }
  return std::nullopt;
}

std::optional<EnablingViolation> enabling_sigmoid(const KnowledgeBase& kb, const VariableInstance& x,
                                                  std::span<const Contribution> cs) {
  constexpr auto m = CombinationMethod::Sigmoid;
  if (auto v = require_single_home(m, x, cs)) return v;
  if (auto v = require_payload<SigmoidPayload>(m, x, cs, "sigmoid")) return v;
  return require_binary(kb, m, x, cs);
}

void raise_if(std::optional<EnablingViolation> v) {
  if (v) throw CombinationError(std::move(*v));
}

CombinationResult normalized_table(const KnowledgeBase& kb, const VariableInstance& x,
                                   const Contribution& home, const std::vector<double>& values) {
  std::span<const Contribution> one(&home, 1);
  Frame frame = make_frame(kb, x, one);
  auto pos = positions(frame, home);
  CombinationResult r = empty_result(x, frame);
  for (std::size_t row = 0; row < frame.rows; ++row) {
    auto cfg = frame.decode(row);
    std::size_t src = local_row(frame, pos, cfg) * frame.child_card;
    double sum = 0.0;
    for (std::size_t s = 0; s < frame.child_card; ++s) sum += values[src + s];
    if (!(sum > 0.0)) {
      throw Error(ErrorCode::ZeroColumn, "fragment " + home.fragment->label() + ": table for " +
                                             x.name() + " has a column that sums to zero");
    }
    // Rows that are already distributions are copied so authored values
    // survive unchanged.
    const double scale = std::abs(sum - 1.0) <= 1e-12 ? 1.0 : sum;
    for (std::size_t s = 0; s < frame.child_card; ++s) {
      r.cpt[row * frame.child_card + s] = values[src + s] / scale;
    }
  }
  return r;
}

}  // namespace

std::span<const double> CombinationResult::row(const std::vector<std::size_t>& parent_states) const {
  std::size_t r = 0;
  for (std::size_t k = 0; k < parent_cards.size(); ++k) r = r * parent_cards[k] + parent_states.at(k);
  return std::span<const double>(cpt).subspan(r * child_card, child_card);
}

std::optional<EnablingViolation> check_enabling(const KnowledgeBase& kb, CombinationMethod method,
                                                const VariableInstance& x,
                                                std::span<const Contribution> contributions) {
  switch (method) {
    case CombinationMethod::Simple: return enabling_simple(kb, x, contributions);
    case CombinationMethod::Default: return enabling_default(kb, x, contributions);
    case CombinationMethod::NoisyOr: return enabling_noisy_or(kb, x, contributions);
    case CombinationMethod::NoisyMin: return enabling_noisy_min(kb, x, contributions);
    case CombinationMethod::Sigmoid: return enabling_sigmoid(kb, x, contributions);
  }
  return std::nullopt;
}

CombinationResult simple_combination(const KnowledgeBase& kb, const VariableInstance& x,
                                     std::span<const Contribution> cs) {
  raise_if(enabling_simple(kb, x, cs));
  return normalized_table(kb, x, cs[0], payload_of<TablePayload>(cs[0])->values);
}

CombinationResult default_combination(const KnowledgeBase& kb, const VariableInstance& x,
                                      std::span<const Contribution> cs) {
  raise_if(enabling_default(kb, x, cs));
  const Contribution* winner = &cs[0];
  for (const auto& c : cs) {
    if (payload_of<DefaultTablePayload>(c)->specificity == Specificity::Specific) winner = &c;
  }
  return normalized_table(kb, x, *winner, payload_of<DefaultTablePayload>(*winner)->values);
}

CombinationResult noisy_or_combination(const KnowledgeBase& kb, const VariableInstance& x,
                                       std::span<const Contribution> cs) {
  raise_if(enabling_noisy_or(kb, x, cs));
  Frame frame = make_frame(kb, x, cs);
  std::vector<double> link(frame.parents.size(), 0.0);
  std::vector<double> leak_survival;
  for (const auto& c : cs) {
    const auto* p = payload_of<NoisyOrPayload>(c);
    auto pos = positions(frame, c);
    for (std::size_t i = 0; i < pos.size(); ++i) link[pos[i]] = p->links[i];
    leak_survival.push_back(1.0 - p->leak);
  }
  const double no_leak = ordered_product(leak_survival);
  CombinationResult r = empty_result(x, frame);
  for (std::size_t row = 0; row < frame.rows; ++row) {
    auto cfg = frame.decode(row);
    std::vector<double> factors{no_leak};
    for (std::size_t k = 0; k < cfg.size(); ++k) {
      if (cfg[k] == 1) factors.push_back(1.0 - link[k]);
    }
    double off = ordered_product(factors);
    r.cpt[row * 2] = off;
    r.cpt[row * 2 + 1] = 1.0 - off;
  }
  return r;
}

CombinationResult noisy_min_conditional(const KnowledgeBase& kb, const VariableInstance& x,
                                        std::span<const Contribution> cs) {
  raise_if(enabling_noisy_min(kb, x, cs));
  Frame frame = make_frame(kb, x, cs);
  const std::size_t n = frame.child_card;
  const auto& cond = cs[0].resident->parents[payload_of<NoisyMinPayload>(cs[0])->conditioning];
  const std::size_t cond_pos = static_cast<std::size_t>(
      std::lower_bound(frame.parents.begin(), frame.parents.end(), cond) - frame.parents.begin());

  auto survival = [n](const std::vector<double>& dist, std::size_t s) {
    double tail = 0.0;
    for (std::size_t k = s; k < n; ++k) tail += dist[k];
    return tail;
  };

  CombinationResult r = empty_result(x, frame);
  std::vector<std::vector<std::size_t>> pos;
  for (const auto& c : cs) pos.push_back(positions(frame, c));
  for (std::size_t row = 0; row < frame.rows; ++row) {
    auto cfg = frame.decode(row);
    const std::size_t c_state = cfg[cond_pos];
    // surv[s] = P(X >= s); surv[0] = 1 and surv[n] = 0 by definition.
    std::vector<double> surv(n + 1, 0.0);
    surv[0] = 1.0;
    for (std::size_t s = 1; s < n; ++s) {
      std::vector<double> factors;
      for (std::size_t j = 0; j < cs.size(); ++j) {
        const auto* p = payload_of<NoisyMinPayload>(cs[j]);
        const auto& block = p->blocks[c_state];
        factors.push_back(survival(block.leak, s));
        for (std::size_t i = 0; i < block.links.size(); ++i) {
          if (i == p->conditioning) continue;
          factors.push_back(survival(block.links[i][cfg[pos[j][i]]], s));
        }
      }
      surv[s] = ordered_product(factors);
    }
    for (std::size_t s = 0; s < n; ++s) {
      r.cpt[row * n + s] = std::max(0.0, surv[s] - surv[s + 1]);
    }
  }
  return r;
}

CombinationResult sigmoid_parameterized(const KnowledgeBase& kb, const VariableInstance& x,
                                        std::span<const Contribution> cs) {
  raise_if(enabling_sigmoid(kb, x, cs));
  Frame frame = make_frame(kb, x, cs);
  const auto* p = payload_of<SigmoidPayload>(cs[0]);
  auto pos = positions(frame, cs[0]);
  CombinationResult r = empty_result(x, frame);
  for (std::size_t row = 0; row < frame.rows; ++row) {
    auto cfg = frame.decode(row);
    double z = p->bias;
    for (std::size_t i = 0; i < pos.size(); ++i) {
      if (cfg[pos[i]] == 1) z += p->weights[i];
    }
    // Evaluate on the side that avoids overflow in exp.
    double on = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    double off = z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
    r.cpt[row * 2] = off;
    r.cpt[row * 2 + 1] = on;
  }
  return r;
}

CombinationResult combine_influences(const KnowledgeBase& kb, const VariableInstance& x,
                                     std::span<const Contribution> cs) {
  const VariableSchema& schema = kb.variable(x.schema);
  std::size_t na_count = 0;
  for (const auto& c : cs) na_count += payload_of<NaPayload>(c) != nullptr;
  if (na_count > 0) {
    if (na_count != cs.size()) {
      fail(schema.method, "", "NA consistency",
           x.name() + " is marked NA by one fragment and defined by another for the same element");
    }
    const auto na = schema.states.na_index();
    if (!na) fail(schema.method, cs[0].fragment->label(), "NA state", x.name() + " has no NA state");
    Frame frame = make_frame(kb, x, cs);
    for (const auto& c : cs) {
      if (!c.resident->spec->table) continue;
      const auto& t = *c.resident->spec->table;
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (i % frame.child_card != *na && t[i] > 0.0) {
          throw Error(ErrorCode::NAViolation, "fragment " + c.fragment->label() + " marks " +
                                                  x.name() +
                                                  " as NA but its table gives mass to a defined state");
        }
      }
    }
    CombinationResult r = empty_result(x, frame);
    for (std::size_t row = 0; row < frame.rows; ++row) r.cpt[row * frame.child_card + *na] = 1.0;
    return r;
  }
  switch (schema.method) {
    case CombinationMethod::Simple: return simple_combination(kb, x, cs);
    case CombinationMethod::Default: return default_combination(kb, x, cs);
    case CombinationMethod::NoisyOr: return noisy_or_combination(kb, x, cs);
    case CombinationMethod::NoisyMin: return noisy_min_conditional(kb, x, cs);
    case CombinationMethod::Sigmoid: return sigmoid_parameterized(kb, x, cs);
  }
  fail(schema.method, "", "method", "unknown combination method");
}

}  // namespace fragbn
