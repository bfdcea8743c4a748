// entropy.hpp - relative entropy (natural log) and its chain-rule breakdown
// along the coordinates of a joint law.

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "concentra/joint_law.hpp"
#include "concentra/measure.hpp"

namespace concentra {

// Ent(nu | mu) = sum nu_i log(nu_i / mu_i); +inf if nu charges a mu-null
// point. Supports are matched point by point and need not coincide.
double relative_entropy_discrete(const DiscreteMeasure& nu, const DiscreteMeasure& mu);

// Closed form between Gaussians; mu's covariance must be nonsingular.
double relative_entropy_gaussian(const GaussianMeasure& nu, const GaussianMeasure& mu);

// Ent between two probability vectors on the same index set.
double relative_entropy_vectors(std::span<const double> q, std::span<const double> p);

struct EntropyBreakdown {
  double total = 0.0;
  double initial_term = 0.0;
  std::vector<double> conditional_terms;  // steps k = 2..n
  std::optional<std::size_t> offending_step;  // 1-based step where Ent became infinite
};

// Ent(q | p) directly on the joint table.
double relative_entropy_joint(const JointLaw& q, const JointLaw& p);

// Initial-law term plus the Q-averaged conditional entropies of each step.
// Histories with zero Q-mass contribute nothing.
EntropyBreakdown chain_rule_decompose(const JointLaw& q, const JointLaw& p);

// |total - (initial + sum conditional)|, 0 when total is infinite.
double breakdown_defect(const EntropyBreakdown& b);

}  // namespace concentra
