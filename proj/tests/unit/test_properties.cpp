// Randomized checks of structural invariants. Seeds come from FRAGBN_SEED
// (see random_models.hpp) so failures can be replayed.

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common.hpp"
#include "oracles.hpp"
#include "random_models.hpp"

namespace fragbn::test {
namespace {

std::vector<Component> components(const std::vector<FragmentPtr>& fs) {
  return std::vector<Component>(fs.begin(), fs.end());
}

void expect_columns_normalized(const std::vector<double>& cpt, std::size_t card, const std::string& what) {
  ASSERT_EQ(cpt.size() % card, 0u) << what;
  for (std::size_t r = 0; r < cpt.size() / card; ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < card; ++k) {
      EXPECT_GE(cpt[r * card + k], 0.0) << what;
      s += cpt[r * card + k];
    }
    EXPECT_NEAR(s, 1.0, 1e-9) << what << " row " << r;
  }
}

void expect_bn_invariants(const BayesNet& bn) {
  for (std::size_t i = 0; i < bn.size(); ++i) {
    const auto& n = bn.node(i);
    for (auto p : n.parents) EXPECT_LT(p, i) << n.name;
    if (n.open_input) {
      EXPECT_TRUE(n.parents.empty());
      continue;
    }
    std::size_t rows = 1;
    for (auto p : n.parents) rows *= bn.node(p).card();
    EXPECT_EQ(n.cpt.size(), rows * n.card()) << n.name;
    expect_columns_normalized(n.cpt, n.card(), n.name);
  }
}

TEST(Property, CompoundScenariosAreConsistent) {
  auto rng = make_rng("prop-compound");
  for (int trial = 0; trial < 40; ++trial) {
    auto sc = random_compound_scenario(rng);
    auto report = check_global_consistency(*sc.kb, sc.fragments, sc.partition, 0);
    ASSERT_TRUE(report.ok()) << report.format();
    auto c = combine_compound(sc.kb, components(sc.fragments), sc.partition, 0);
    for (const auto& x : c.residents()) {
      const auto& r = c.local_distribution(x);
      expect_columns_normalized(r.cpt, r.child_card, x.name());
      std::set<VariableInstance> parents(r.parents.begin(), r.parents.end());
      EXPECT_EQ(parents, c.graph().at(x)) << x.name();
    }
    for (const auto& i : c.inputs()) {
      EXPECT_TRUE(c.graph().at(i).empty());
      EXPECT_FALSE(c.residents().count(i));
    }
    expect_bn_invariants(materialize_bn(c));
  }
}

TEST(Property, MultiScenariosNeverStraddle) {
  auto rng = make_rng("prop-multi");
  for (int trial = 0; trial < 25; ++trial) {
    auto sc = random_multi_scenario(rng);
    auto multi = combine_multi(sc.kb, components(sc.fragments), sc.partition);
    for (std::size_t v = 0; v < sc.partition.size(); ++v) {
      for (const auto& f : sc.fragments) EXPECT_NE(classify(*f, sc.partition, v), Relation::Straddles);
      for (const auto& x : multi.residents()) {
        bool held = false;
        for (const auto& f : multi.element(v).all_fragments()) held = held || f->is_resident(x);
        EXPECT_TRUE(held) << x.name();
      }
    }
    auto bn = materialize_bn(multi);
    expect_bn_invariants(bn);
    EXPECT_TRUE(bn.open_inputs().empty());
  }
}

TEST(Property, RefineIsIdempotentAndFiner) {
  auto rng = make_rng("prop-refine");
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> cards{uniform_int(rng, 2, 4), uniform_int(rng, 2, 3)};
    HypothesisPartition base({var("A"), var("B")}, cards);
    const std::size_t n = base.product_size();
    std::vector<TupleSet> subsets(uniform_int(rng, 1, 3));
    for (auto& t : subsets) {
      for (std::size_t i = 0; i < n; ++i) {
        if (coin(rng)) t.push_back(i);
      }
    }
    auto once = refine(base, subsets);
    EXPECT_EQ(refine(once, subsets), once);
    // Every new element lies inside exactly one old element.
    auto twice = refine(once, std::vector<TupleSet>{once.elements().front()});
    EXPECT_EQ(twice, once);
  }
}

TEST(Property, NoisyOrIsMonotoneInParents) {
  auto rng = make_rng("prop-noisy-or-monotone");
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = uniform_int(rng, 1, 5);
    auto kb = std::make_shared<KnowledgeBase>();
    FragmentSchema f;
    f.name = "F";
    ResidentSpec r;
    r.var = ref("X");
    NoisyOrPayload p{uniform_real(rng, 0, 0.5), {}};
    for (std::size_t i = 0; i < k; ++i) {
      std::string name = "P" + std::to_string(i);
      kb->register_variable_schema(schema(name, {"f", "t"}));
      r.parents.push_back(ref(name));
      p.links.push_back(uniform_real(rng, 0, 1));
    }
    kb->register_variable_schema(schema("X", {"f", "t"}, CombinationMethod::NoisyOr));
    r.influence = p;
    f.inputs = r.parents;
    f.residents.push_back(r);
    kb->register_fragment_schema(f);
    Workspace ws(kb);
    auto inst = ws.instantiate_fragment("F", {});
    Contribution c{inst.get(), &inst->residents()[0]};
    auto res = combine_influences(*kb, var("X"), std::span<const Contribution>(&c, 1));
    for (std::size_t row = 0; row < res.rows(); ++row) {
      for (std::size_t bit = 0; bit < k; ++bit) {
        std::size_t mask = std::size_t{1} << (k - 1 - bit);
        if (row & mask) continue;
        EXPECT_LE(res.cpt[row * 2 + 1], res.cpt[(row | mask) * 2 + 1] + 1e-15);
      }
    }
  }
}

TEST(Property, EliminationMatchesEnumerationWithEvidence) {
  auto rng = make_rng("prop-ve");
  for (int trial = 0; trial < 60; ++trial) {
    auto bn = random_bn(rng, uniform_int(rng, 2, 8), 3, 3);
    auto joint = brute_joint(bn);
    std::vector<std::size_t> order(bn.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t nt = uniform_int(rng, 1, std::min<std::size_t>(2, bn.size()));
    const std::size_t ne = uniform_int(rng, 0, bn.size() - nt);
    Query q;
    std::vector<std::size_t> targets(order.begin(), order.begin() + nt);
    std::map<std::size_t, std::size_t> evidence;
    for (auto t : targets) q.targets.push_back(bn.node(t).name);
    for (std::size_t i = nt; i < nt + ne; ++i) {
      std::size_t s = uniform_int(rng, 0, bn.node(order[i]).card() - 1);
      evidence[order[i]] = s;
      q.evidence[bn.node(order[i]).name] = bn.node(order[i]).states[s];
    }
    auto expected = brute_marginal(joint, targets, evidence);
    auto got = eliminate(bn, q);
    EXPECT_LE(max_abs_diff(got.probs, expected), 1e-9);
  }
}

TEST(Property, DSeparationIsSymmetric) {
  auto rng = make_rng("prop-dsep-symmetric");
  for (int trial = 0; trial < 50; ++trial) {
    auto bn = random_bn(rng, uniform_int(rng, 3, 9), 2, 3);
    std::size_t a = uniform_int(rng, 0, bn.size() - 1), b = uniform_int(rng, 0, bn.size() - 1);
    if (a == b) continue;
    std::set<std::size_t> z;
    for (std::size_t i = 0; i < bn.size(); ++i) {
      if (i != a && i != b && coin(rng, 0.3)) z.insert(i);
    }
    EXPECT_EQ(d_separated(bn, {a}, {b}, z), d_separated(bn, {b}, {a}, z));
  }
}

TEST(Property, ShuffledRegistrationGivesEqualKb) {
  auto rng = make_rng("prop-kb-shuffle");
  for (int trial = 0; trial < 30; ++trial) {
    auto kb = random_kb(rng);
    EXPECT_TRUE(*shuffled_copy(*kb, rng) == *kb);
  }
}

TEST(Property, ParseFailuresCarryPositions) {
  auto rng = make_rng("prop-diagnostics");
  const std::string demo = read_file(data_path("sa6_demo.fkb"));
  for (int trial = 0; trial < 200; ++trial) {
    std::string s = demo;
    // Delete or corrupt a short span.
    std::size_t at = uniform_int(rng, 0, s.size() - 1);
    if (coin(rng)) {
      s.erase(at, uniform_int(rng, 1, 5));
    } else {
      s[at] = "{};,()[]x9\"#"[uniform_int(rng, 0, 11)];
    }
    auto r = parse_kb(s);
    if (r.ok()) continue;
    ASSERT_FALSE(r.diagnostics.empty());
    for (const auto& d : r.diagnostics) {
      EXPECT_GE(d.line, 1u);
      EXPECT_GE(d.column, 1u);
      EXPECT_FALSE(d.code.empty());
    }
  }
}

}  // namespace
}  // namespace fragbn::test
