// coupling.hpp - step-by-step (Knothe-style) couplings of two processes and
// the W_s upper bound they certify, plus an audit of T_s(alpha_n) on chains.
//
// At step k every coupled history atom (x^(k-1), y^(k-1)) is split by an
// optimal plan between q_k(. | x^(k-1)) and p_k(. | y^(k-1)); the expected
// step cost d_k sums to an upper bound on W_s(Q^(n), P^(n))^s.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "concentra/constants.hpp"
#include "concentra/joint_law.hpp"
#include "concentra/processes.hpp"

namespace concentra {

struct CouplingOptions {
  std::size_t quantiles = 128;      // midpoint quantiles per continuous kernel
  std::size_t atom_budget = 500000;
  double merge_tol = 1e-12;
  double drop_below = 1e-15;
};

struct CouplingBound {
  double upper_bound = 0.0;
  std::vector<double> step_costs;  // d_1, ..., d_n
  double s = 1.0;
  std::string method;
  double error_budget = 0.0;  // mass of dropped atoms
  std::size_t peak_atoms = 0;
};

CouplingBound recursive_coupling_bound(const MarkovModel& p, const MarkovModel& q, std::size_t n, double s,
                                       const CouplingOptions& opt = {});
// History-dependent version on dense joint laws over a common finite space.
CouplingBound recursive_coupling_bound(const JointLaw& p, const JointLaw& q, double s,
                                       const CouplingOptions& opt = {});

// |upper_bound^s - sum d_k|.
double coupling_defect(const CouplingBound& b);

struct AuditEntry {
  std::string label;
  double w = 0.0;            // value used in the slack
  std::string w_method;      // "exact" or "coupling bound"
  double w_bound = 0.0;      // recursive coupling bound
  double entropy = 0.0;
  double slack = 0.0;        // w - sqrt(2 entropy / alpha_n)
};

struct AuditReport {
  RegimeConstant alpha_n;
  std::vector<AuditEntry> entries;
  double worst_slack = 0.0;
  double tolerance = 1e-9;
  bool pass = false;
};

struct AuditOptions {
  double tolerance = 1e-9;
  CouplingOptions coupling;
  std::size_t random_perturbations = 8;  // used when no perturbations are given
  std::uint64_t seed = 0;
};

// alpha_n = ts_weak_alpha(alpha_hyp, L_hyp, s, n); each perturbation Q is
// scored by W_s(Q^(n), P^(n)) - sqrt(2 Ent(Q^(n) | P^(n)) / alpha_n).
// Empty perturbations: seeded initial-law shifts (Gaussian chains) or
// exponential tilts of the joint law (tabular chains).
AuditReport transport_inequality_audit(const MarkovModel& p, double alpha_hyp, double s, double L_hyp,
                                       std::size_t n, const std::vector<MarkovModel>& perturbations,
                                       const AuditOptions& opt = {});
// Tabular P against arbitrary joint-law perturbations.
AuditReport transport_inequality_audit(const MarkovModel& p, double alpha_hyp, double s, double L_hyp,
                                       std::size_t n, const std::vector<JointLaw>& perturbations,
                                       const AuditOptions& opt = {});

// Q proportional to e^{t F} P on words, F = sum_j c_j value(x_j).
JointLaw tilt_joint_law(const JointLaw& p, std::span<const double> coefficients, double t);

}  // namespace concentra
