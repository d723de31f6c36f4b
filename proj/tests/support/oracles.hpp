#pragma once

// Reference computations written independently of the library, used to
// check its closed forms and inference routines.

#include <cstddef>
#include <map>
#include <set>
#include <vector>

#include "fragbn/bayes_net.hpp"

namespace fragbn::test {

/// P(X = true) for a leaky noisy-OR by enumerating every activation outcome
/// of the leaks and of the links whose parent is true.
double noisy_or_by_inhibitors(const std::vector<double>& leaks, const std::vector<double>& links,
                              const std::vector<bool>& parent_true);

/// Distribution of min(Z_1, ..., Z_n) over state indices, by enumerating
/// every joint latent tuple.
std::vector<double> min_by_latent_tuples(const std::vector<std::vector<double>>& latents);

struct BruteJoint {
  std::vector<std::size_t> cards;
  std::vector<double> probs;  // first node slowest

  std::vector<std::size_t> decode(std::size_t flat) const;
};

/// Product of CPT entries over every full assignment; reads the tables
/// directly. Open inputs are not allowed.
BruteJoint brute_joint(const BayesNet& bn);

/// P(targets | evidence), first target slowest, normalized. Evidence maps a
/// node index to a state index. Returns an empty vector on zero evidence.
std::vector<double> brute_marginal(const BruteJoint& joint, const std::vector<std::size_t>& targets,
                                   const std::map<std::size_t, std::size_t>& evidence = {});

/// max over (a, b, z) of |P(a,b,z) P(z) - P(a,z) P(b,z)|.
double ci_residual(const BruteJoint& joint, std::size_t a, std::size_t b, const std::set<std::size_t>& z);

}  // namespace fragbn::test
