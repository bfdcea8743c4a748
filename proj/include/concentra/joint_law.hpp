// joint_law.hpp - dense probability tables on X^n for a finite state space X.
//
// Words are indexed lexicographically with the first coordinate most
// significant, matching ProductSpace::materialize.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "concentra/measure.hpp"

namespace concentra {

struct JointLaw {
  SpacePtr base;               // state space X
  std::vector<double> values;  // real value of each state (for functionals)
  std::size_t n = 1;
  std::vector<double> probs;   // |X|^n entries

  std::size_t states() const { return base->size(); }
};

// Validates sizes and weights (normalize_weights rules). Empty values default
// to 0, 1, ..., |X| - 1. The table is capped at kMaxSupport entries.
JointLaw make_joint_law(SpacePtr base, std::size_t n, std::vector<double> probs,
                        std::vector<double> values = {});

// Real states x_i on the line; base = FiniteMetricSpace::from_line(x).
JointLaw make_joint_law_on_line(std::vector<double> states, std::size_t n, std::vector<double> probs);

// Law of the first m coordinates (|X|^m entries).
std::vector<double> marginal(const JointLaw& law, std::size_t m);

// law as a measure on (X^n, d^(s)).
DiscreteMeasure joint_measure(const JointLaw& law, double s);

// Digits of a word index, first coordinate first.
std::vector<std::size_t> word_of(std::size_t index, std::size_t states, std::size_t n);

bool same_base(const JointLaw& a, const JointLaw& b);

}  // namespace concentra
