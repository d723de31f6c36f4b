#include "fragbn/hypothesis.hpp"

#include <algorithm>
#include <iterator>
#include <set>

#include "fragbn/error.hpp"

namespace fragbn {

HypothesisPartition::HypothesisPartition(std::vector<VariableInstance> vars,
                                         std::vector<std::size_t> cards)
    : vars_(std::move(vars)), cards_(std::move(cards)) {
  if (vars_.size() != cards_.size()) {
    throw Error(ErrorCode::InvalidPartition, "one cardinality per hypothesis variable required");
  }
  if (std::set<VariableInstance>(vars_.begin(), vars_.end()).size() != vars_.size()) {
    throw Error(ErrorCode::InvalidPartition, "duplicate hypothesis variable");
  }
  for (auto c : cards_) {
    if (c == 0) throw Error(ErrorCode::InvalidPartition, "hypothesis variable without states");
    product_ *= c;
  }
  TupleSet all(product_);
  for (std::size_t i = 0; i < product_; ++i) all[i] = i;
  elements_.push_back(std::move(all));
}

HypothesisPartition::HypothesisPartition(std::vector<VariableInstance> vars,
                                         std::vector<std::size_t> cards,
                                         std::vector<TupleSet> elements)
    : HypothesisPartition(std::move(vars), std::move(cards)) {
  std::vector<int> owner(product_, -1);
  for (std::size_t e = 0; e < elements.size(); ++e) {
    auto& el = elements[e];
    std::sort(el.begin(), el.end());
    el.erase(std::unique(el.begin(), el.end()), el.end());
    if (el.empty()) throw Error(ErrorCode::InvalidPartition, "empty hypothesis element");
    for (auto t : el) {
      if (t >= product_) throw Error(ErrorCode::InvalidPartition, "hypothesis tuple out of range");
      if (owner[t] != -1) {
        throw Error(ErrorCode::InvalidPartition, "hypothesis elements overlap");
      }
      owner[t] = static_cast<int>(e);
    }
  }
  if (std::find(owner.begin(), owner.end(), -1) != owner.end()) {
    throw Error(ErrorCode::InvalidPartition, "hypothesis elements do not cover the state space");
  }
  elements_ = std::move(elements);
}

HypothesisPartition HypothesisPartition::over(const KnowledgeBase& kb,
                                              std::vector<VariableInstance> vars) {
  std::vector<std::size_t> cards;
  for (const auto& v : vars) cards.push_back(kb.variable(v.schema).states.size());
  return HypothesisPartition(std::move(vars), std::move(cards));
}

std::optional<std::size_t> HypothesisPartition::var_index(const VariableInstance& v) const {
  auto it = std::find(vars_.begin(), vars_.end(), v);
  if (it == vars_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - vars_.begin());
}

std::vector<std::size_t> HypothesisPartition::decode(std::size_t flat) const {
  std::vector<std::size_t> tuple(cards_.size());
  for (std::size_t k = cards_.size(); k-- > 0;) {
    tuple[k] = flat % cards_[k];
    flat /= cards_[k];
  }
  return tuple;
}

std::size_t HypothesisPartition::encode(const std::vector<std::size_t>& tuple) const {
  std::size_t flat = 0;
  for (std::size_t k = 0; k < cards_.size(); ++k) flat = flat * cards_[k] + tuple.at(k);
  return flat;
}

std::size_t HypothesisPartition::element_of(std::size_t flat) const {
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    if (std::binary_search(elements_[e].begin(), elements_[e].end(), flat)) return e;
  }
  throw Error(ErrorCode::InvalidPartition, "hypothesis tuple out of range");
}

std::string HypothesisPartition::describe(const KnowledgeBase& kb, std::size_t element) const {
  std::string out = "{";
  bool first = true;
  for (auto flat : elements_.at(element)) {
    if (!first) out += ", ";
    first = false;
    auto tuple = decode(flat);
    if (vars_.size() == 1) {
      out += kb.variable(vars_[0].schema).states.label(tuple[0]);
      continue;
    }
    out += "(";
    for (std::size_t k = 0; k < tuple.size(); ++k) {
      if (k) out += ",";
      out += kb.variable(vars_[k].schema).states.label(tuple[k]);
    }
    out += ")";
  }
  return out + "}";
}

const char* to_string(Relation r) noexcept {
  switch (r) {
    case Relation::Subsumes: return "subsumes";
    case Relation::Disjoint: return "disjoint";
    case Relation::Straddles: return "straddles";
  }
  return "straddles";
}

bool hypothesis_variable_consistent(const FragmentInstance& f, const HypothesisPartition& s) {
  for (const auto& h : f.hypothesis_vars()) {
    if (!s.var_index(h)) return false;
  }
  auto declared = [&](const VariableInstance& v) {
    const auto& hv = f.hypothesis_vars();
    return std::find(hv.begin(), hv.end(), v) != hv.end();
  };
  for (const auto& v : s.vars()) {
    bool appears = f.is_resident(v) || f.is_input(v);
    if (appears && !declared(v)) return false;
  }
  return true;
}

TupleSet lift(const FragmentInstance& f, const HypothesisPartition& s) {
  std::vector<std::size_t> coords;
  for (const auto& h : f.hypothesis_vars()) {
    auto k = s.var_index(h);
    if (!k) {
      throw Error(ErrorCode::InvalidPartition, "fragment " + f.label() + ": hypothesis variable " +
                                                   h.name() + " is not in the partition");
    }
    coords.push_back(*k);
  }
  TupleSet out;
  std::vector<std::size_t> projected(coords.size());
  for (std::size_t flat = 0; flat < s.product_size(); ++flat) {
    auto tuple = s.decode(flat);
    for (std::size_t k = 0; k < coords.size(); ++k) projected[k] = tuple[coords[k]];
    if (f.hypothesized().count(projected)) out.push_back(flat);
  }
  return out;
}

// Both arguments sorted.
Relation classify(const TupleSet& hypothesized, const TupleSet& element) {
  if (std::includes(hypothesized.begin(), hypothesized.end(), element.begin(), element.end())) {
    return Relation::Subsumes;
  }
  TupleSet common;
  std::set_intersection(hypothesized.begin(), hypothesized.end(), element.begin(), element.end(),
                        std::back_inserter(common));
  return common.empty() ? Relation::Disjoint : Relation::Straddles;
}

Relation classify(const FragmentInstance& f, const HypothesisPartition& s, std::size_t element) {
  return classify(lift(f, s), s.elements().at(element));
}

HypothesisPartition refine(const HypothesisPartition& s, std::span<const TupleSet> subsets) {
  std::vector<TupleSet> current = s.elements();
  for (TupleSet mu : subsets) {
    std::sort(mu.begin(), mu.end());
    std::vector<TupleSet> next;
    for (const auto& v : current) {
      TupleSet in, out;
      std::set_intersection(v.begin(), v.end(), mu.begin(), mu.end(), std::back_inserter(in));
      std::set_difference(v.begin(), v.end(), mu.begin(), mu.end(), std::back_inserter(out));
      if (!in.empty()) next.push_back(std::move(in));
      if (!out.empty()) next.push_back(std::move(out));
    }
    current = std::move(next);
  }
  return HypothesisPartition(s.vars(), s.cards(), std::move(current));
}

HypothesisPartition refine(const HypothesisPartition& s, std::span<const FragmentPtr> fragments) {
  std::vector<TupleSet> subsets;
  for (const auto& f : fragments) subsets.push_back(lift(*f, s));
  return refine(s, std::span<const TupleSet>(subsets));
}

}  // namespace fragbn
