#include "fragbn/infer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <deque>
#include <numeric>

#include "fragbn/error.hpp"

namespace fragbn {

namespace {

std::size_t product(const std::vector<std::size_t>& cards) {
  std::size_t n = 1;
  for (auto c : cards) n *= c;
  return n;
}

// Strides of `scope` expressed against the positions of `target`.
std::vector<std::size_t> strides_in(const std::vector<std::size_t>& scope,
                                    const std::vector<std::size_t>& cards,
                                    const std::vector<std::size_t>& target) {
  std::vector<std::size_t> own(scope.size());
  std::size_t s = 1;
  for (std::size_t k = scope.size(); k-- > 0;) {
    own[k] = s;
    s *= cards[k];
  }
  std::vector<std::size_t> out(target.size(), 0);
  for (std::size_t t = 0; t < target.size(); ++t) {
    auto it = std::find(scope.begin(), scope.end(), target[t]);
    if (it != scope.end()) out[t] = own[static_cast<std::size_t>(it - scope.begin())];
  }
  return out;
}

// Visits every assignment of `cards` (last coordinate fastest), keeping a
// running offset for each stride vector.
template <typename F>
void for_each_assignment(const std::vector<std::size_t>& cards,
                         const std::vector<std::vector<std::size_t>>& strides, F&& f) {
  const std::size_t n = product(cards);
  std::vector<std::size_t> counter(cards.size(), 0);
  std::vector<std::size_t> offset(strides.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    f(i, offset);
    for (std::size_t k = cards.size(); k-- > 0;) {
      if (++counter[k] < cards[k]) {
        for (std::size_t j = 0; j < strides.size(); ++j) offset[j] += strides[j][k];
        break;
      }
      for (std::size_t j = 0; j < strides.size(); ++j) offset[j] -= strides[j][k] * (cards[k] - 1);
      counter[k] = 0;
    }
  }
}

struct Resolved {
  std::vector<std::size_t> targets;
  std::map<std::size_t, std::size_t> evidence;
};

Resolved resolve(const BayesNet& bn, const Query& q) {
  Resolved r;
  if (q.targets.empty()) throw Error(ErrorCode::InvalidQuery, "query has no targets");
  for (const auto& t : q.targets) {
    auto idx = bn.find(t);
    if (std::find(r.targets.begin(), r.targets.end(), idx) != r.targets.end()) {
      throw Error(ErrorCode::InvalidQuery, "target " + t + " listed twice");
    }
    r.targets.push_back(idx);
  }
  for (const auto& [name, label] : q.evidence) {
    auto idx = bn.find(name);
    if (std::find(r.targets.begin(), r.targets.end(), idx) != r.targets.end()) {
      throw Error(ErrorCode::InvalidQuery, name + " is both a target and evidence");
    }
    auto s = bn.state_index(idx, label);
    if (!s) throw Error(ErrorCode::InvalidState, "node " + name + " has no state " + label);
    r.evidence.emplace(idx, *s);
  }
  return r;
}

Factor node_factor(const BayesNet& bn, std::size_t i, const std::map<std::size_t, std::size_t>& evidence) {
  const BnNode& n = bn.node(i);
  if (n.open_input) {
    auto it = evidence.find(i);
    if (it == evidence.end()) {
      throw Error(ErrorCode::MissingPrior, "input " + n.name + " has no distribution and is not observed");
    }
    std::vector<double> indicator(n.card(), 0.0);
    indicator[it->second] = 1.0;
    return Factor({i}, {n.card()}, std::move(indicator));
  }
  std::vector<std::size_t> scope = n.parents;
  scope.push_back(i);
  std::vector<std::size_t> cards;
  for (auto v : scope) cards.push_back(bn.node(v).card());
  return Factor(scope, cards, n.cpt);
}

Posterior finish(const BayesNet& bn, const std::vector<std::size_t>& targets, Factor f) {
  std::vector<std::size_t> order = targets;
  Posterior p;
  p.targets = targets;
  for (auto t : targets) p.cards.push_back(bn.node(t).card());
  f = f.reorder(order);
  double z = f.total();
  if (!(z > 0.0)) throw Error(ErrorCode::ZeroEvidence, "evidence has probability zero");
  p.probs = f.values();
  for (double& x : p.probs) x /= z;
  return p;
}

}  // namespace

Factor::Factor(std::vector<std::size_t> scope, std::vector<std::size_t> cards, std::vector<double> values)
    : scope_(std::move(scope)), cards_(std::move(cards)), values_(std::move(values)) {
  if (scope_.size() != cards_.size() || values_.size() != product(cards_)) {
    throw Error(ErrorCode::InvalidDistribution, "factor table does not match its scope");
  }
  for (double v : values_) {
    if (!(v >= 0.0)) throw Error(ErrorCode::InvalidDistribution, "factor has a negative entry");
  }
}

bool Factor::contains(std::size_t var) const {
  return std::find(scope_.begin(), scope_.end(), var) != scope_.end();
}

Factor Factor::multiply(const Factor& other) const {
  std::vector<std::size_t> scope;
  std::set_union(scope_.begin(), scope_.end(), other.scope_.begin(), other.scope_.end(),
                 std::back_inserter(scope));
  // set_union needs sorted inputs; fall back to a manual union otherwise.
  if (!std::is_sorted(scope_.begin(), scope_.end()) ||
      !std::is_sorted(other.scope_.begin(), other.scope_.end())) {
    std::set<std::size_t> u(scope_.begin(), scope_.end());
    u.insert(other.scope_.begin(), other.scope_.end());
    scope.assign(u.begin(), u.end());
  }
  std::vector<std::size_t> cards;
  for (auto v : scope) {
    auto it = std::find(scope_.begin(), scope_.end(), v);
    cards.push_back(it != scope_.end() ? cards_[static_cast<std::size_t>(it - scope_.begin())]
                                       : other.cards_[static_cast<std::size_t>(
                                             std::find(other.scope_.begin(), other.scope_.end(), v) -
                                             other.scope_.begin())]);
  }
  std::vector<double> values(product(cards));
  for_each_assignment(cards, {strides_in(scope_, cards_, scope), strides_in(other.scope_, other.cards_, scope)},
                      [&](std::size_t i, const std::vector<std::size_t>& off) {
                        values[i] = values_[off[0]] * other.values_[off[1]];
                      });
  return Factor(std::move(scope), std::move(cards), std::move(values));
}

Factor Factor::sum_out(std::size_t var) const {
  auto it = std::find(scope_.begin(), scope_.end(), var);
  if (it == scope_.end()) return *this;
  auto pos = static_cast<std::size_t>(it - scope_.begin());
  std::vector<std::size_t> scope = scope_;
  std::vector<std::size_t> cards = cards_;
  scope.erase(scope.begin() + static_cast<std::ptrdiff_t>(pos));
  cards.erase(cards.begin() + static_cast<std::ptrdiff_t>(pos));
  std::vector<double> values(product(cards), 0.0);
  for_each_assignment(cards_, {strides_in(scope, cards, scope_)},
                      [&](std::size_t i, const std::vector<std::size_t>& off) { values[off[0]] += values_[i]; });
  return Factor(std::move(scope), std::move(cards), std::move(values));
}

Factor Factor::reduce(std::size_t var, std::size_t state) const {
  auto it = std::find(scope_.begin(), scope_.end(), var);
  if (it == scope_.end()) return *this;
  auto pos = static_cast<std::size_t>(it - scope_.begin());
  std::vector<std::size_t> scope = scope_;
  std::vector<std::size_t> cards = cards_;
  scope.erase(scope.begin() + static_cast<std::ptrdiff_t>(pos));
  cards.erase(cards.begin() + static_cast<std::ptrdiff_t>(pos));
  std::vector<double> values;
  values.reserve(product(cards));
  std::vector<std::size_t> counter(cards_.size(), 0);
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (counter[pos] == state) values.push_back(values_[i]);
    for (std::size_t k = cards_.size(); k-- > 0;) {
      if (++counter[k] < cards_[k]) break;
      counter[k] = 0;
    }
  }
  return Factor(std::move(scope), std::move(cards), std::move(values));
}

Factor Factor::reorder(const std::vector<std::size_t>& order) const {
  if (order == scope_) return *this;
  if (std::set<std::size_t>(order.begin(), order.end()) != std::set<std::size_t>(scope_.begin(), scope_.end()) ||
      order.size() != scope_.size()) {
    throw Error(ErrorCode::InvalidQuery, "reorder target is not a permutation of the scope");
  }
  std::vector<std::size_t> cards;
  for (auto v : order) {
    cards.push_back(cards_[static_cast<std::size_t>(std::find(scope_.begin(), scope_.end(), v) - scope_.begin())]);
  }
  std::vector<double> values(values_.size());
  for_each_assignment(cards, {strides_in(scope_, cards_, order)},
                      [&](std::size_t i, const std::vector<std::size_t>& off) { values[i] = values_[off[0]]; });
  return Factor(order, std::move(cards), std::move(values));
}

double Factor::total() const {
  return std::accumulate(values_.begin(), values_.end(), 0.0);
}

bool d_separated(const BayesNet& bn, const std::set<std::size_t>& a, const std::set<std::size_t>& b,
                 const std::set<std::size_t>& z) {
  for (const auto* s : {&a, &b, &z}) {
    for (auto v : *s) {
      if (v >= bn.size()) throw Error(ErrorCode::UnknownNode, "node index out of range");
    }
  }
  for (auto v : a) {
    if (b.count(v) || z.count(v)) throw Error(ErrorCode::InvalidQuery, "d-separation sets overlap");
  }
  for (auto v : b) {
    if (z.count(v)) throw Error(ErrorCode::InvalidQuery, "d-separation sets overlap");
  }
  const std::size_t n = bn.size();
  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto p : bn.node(i).parents) children[p].push_back(i);
  }
  // Nodes with a descendant in Z (including Z itself) open colliders.
  std::vector<bool> anc(n, false);
  std::deque<std::size_t> work(z.begin(), z.end());
  while (!work.empty()) {
    auto v = work.front();
    work.pop_front();
    if (anc[v]) continue;
    anc[v] = true;
    for (auto p : bn.node(v).parents) work.push_back(p);
  }
  // Reachability over (node, arrived-from-child?) pairs.
  std::vector<std::array<bool, 2>> seen(n, {false, false});
  std::deque<std::pair<std::size_t, bool>> queue;
  for (auto v : a) queue.emplace_back(v, true);
  while (!queue.empty()) {
    auto [v, up] = queue.front();
    queue.pop_front();
    if (seen[v][up]) continue;
    seen[v][up] = true;
    if (!z.count(v) && b.count(v)) return false;
    if (up) {
      if (!z.count(v)) {
        for (auto p : bn.node(v).parents) queue.emplace_back(p, true);
        for (auto c : children[v]) queue.emplace_back(c, false);
      }
    } else {
      if (!z.count(v)) {
        for (auto c : children[v]) queue.emplace_back(c, false);
      }
      if (anc[v]) {
        for (auto p : bn.node(v).parents) queue.emplace_back(p, true);
      }
    }
  }
  return true;
}

bool d_separated(const BayesNet& bn, const std::vector<std::string>& a, const std::vector<std::string>& b,
                 const std::vector<std::string>& z) {
  auto ids = [&](const std::vector<std::string>& names) {
    std::set<std::size_t> out;
    for (const auto& s : names) out.insert(bn.find(s));
    return out;
  };
  return d_separated(bn, ids(a), ids(b), ids(z));
}

bool query_complete(const BayesNet& bn, const Query& q) {
  auto r = resolve(bn, q);
  std::set<std::size_t> z;
  for (const auto& [v, s] : r.evidence) z.insert(v);
  std::set<std::size_t> targets(r.targets.begin(), r.targets.end());
  std::set<std::size_t> open;
  for (auto i : bn.open_inputs()) {
    if (targets.count(i)) return false;
    if (!z.count(i)) open.insert(i);
  }
  if (open.empty()) return true;
  return d_separated(bn, targets, open, z);
}

BayesNet close_with_defaults(BayesNet bn) {
  for (auto i : bn.open_inputs()) bn.close_input(i, bn.node(i).default_prior);
  return bn;
}

std::string format_posterior(const BayesNet& bn, const Posterior& posterior) {
  std::string out;
  std::vector<std::size_t> counter(posterior.cards.size(), 0);
  for (double p : posterior.probs) {
    for (std::size_t k = 0; k < counter.size(); ++k) {
      if (k) out += ',';
      out += bn.node(posterior.targets[k]).states[counter[k]];
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "\t%.12g\n", p);
    out += buf;
    for (std::size_t k = counter.size(); k-- > 0;) {
      if (++counter[k] < posterior.cards[k]) break;
      counter[k] = 0;
    }
  }
  return out;
}

Posterior eliminate(const BayesNet& bn, const Query& q, std::optional<std::vector<std::size_t>> order) {
  auto r = resolve(bn, q);
  std::vector<Factor> factors;
  for (std::size_t i = 0; i < bn.size(); ++i) {
    Factor f = node_factor(bn, i, r.evidence);
    for (const auto& [v, s] : r.evidence) f = f.reduce(v, s);
    factors.push_back(std::move(f));
  }
  std::set<std::size_t> hidden;
  for (std::size_t i = 0; i < bn.size(); ++i) {
    if (!r.evidence.count(i) && std::find(r.targets.begin(), r.targets.end(), i) == r.targets.end()) {
      hidden.insert(i);
    }
  }
  if (order) {
    if (order->size() != hidden.size() || std::set<std::size_t>(order->begin(), order->end()) != hidden) {
      throw Error(ErrorCode::InvalidQuery, "elimination order must list exactly the hidden nodes");
    }
  }
  auto pick = [&](const std::set<std::size_t>& remaining) {
    std::size_t best = *remaining.begin();
    std::size_t best_degree = SIZE_MAX;
    for (auto v : remaining) {
      std::set<std::size_t> nbrs;
      for (const auto& f : factors) {
        if (f.contains(v)) nbrs.insert(f.scope().begin(), f.scope().end());
      }
      if (nbrs.size() < best_degree) {
        best_degree = nbrs.size();
        best = v;
      }
    }
    return best;
  };
  std::set<std::size_t> remaining = hidden;
  for (std::size_t step = 0; step < hidden.size(); ++step) {
    std::size_t v = order ? (*order)[step] : pick(remaining);
    remaining.erase(v);
    Factor joint;
    std::vector<Factor> rest;
    for (auto& f : factors) {
      if (f.contains(v)) {
        joint = joint.multiply(f);
      } else {
        rest.push_back(std::move(f));
      }
    }
    rest.push_back(joint.sum_out(v));
    factors = std::move(rest);
  }
  Factor result;
  for (const auto& f : factors) result = result.multiply(f);
  return finish(bn, r.targets, std::move(result));
}

JointTable joint_enumerate(const BayesNet& bn) {
  JointTable t;
  std::size_t n = 1;
  for (const auto& node : bn.nodes()) {
    if (node.open_input) throw Error(ErrorCode::MissingPrior, "input " + node.name + " has no distribution");
    t.cards.push_back(node.card());
    if (n > kMaxJointEntries / node.card()) {
      throw Error(ErrorCode::TooLarge, "joint table exceeds " + std::to_string(kMaxJointEntries) + " entries");
    }
    n *= node.card();
  }
  t.probs.assign(n, 0.0);
  std::vector<std::size_t> assignment(bn.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    double p = 1.0;
    for (std::size_t v = 0; v < bn.size() && p > 0.0; ++v) p *= bn.conditional(v, assignment);
    t.probs[i] = p;
    for (std::size_t k = bn.size(); k-- > 0;) {
      if (++assignment[k] < t.cards[k]) break;
      assignment[k] = 0;
    }
  }
  return t;
}

Posterior enumerate_query(const BayesNet& bn, const JointTable& joint, const Query& q) {
  auto r = resolve(bn, q);
  std::vector<std::size_t> scope(bn.size());
  std::iota(scope.begin(), scope.end(), 0);
  Factor f(scope, joint.cards, joint.probs);
  for (const auto& [v, s] : r.evidence) f = f.reduce(v, s);
  for (std::size_t v = 0; v < bn.size(); ++v) {
    if (!r.evidence.count(v) && std::find(r.targets.begin(), r.targets.end(), v) == r.targets.end()) {
      f = f.sum_out(v);
    }
  }
  return finish(bn, r.targets, std::move(f));
}

}  // namespace fragbn
