// json_io.hpp - JSON readers and writers for measures, spaces, models, joint
// laws, grids and results. Readers throw InputError on schema violations.

#pragma once

#include <json.hpp>

#include <string>
#include <variant>

#include "concentra/certify.hpp"
#include "concentra/coupling.hpp"
#include "concentra/entropy.hpp"
#include "concentra/joint_law.hpp"
#include "concentra/measure.hpp"
#include "concentra/processes.hpp"
#include "concentra/transport.hpp"

namespace concentra::io {

using json = nlohmann::ordered_json;

json read_json_file(const std::string& path);

Matrix to_matrix(const json& j, const char* what);
Vector to_vector(const json& j, const char* what);
json from_matrix(const Matrix& m);
json from_vector(const Vector& v);

SpacePtr read_space(const json& j);
json write_space(const FiniteMetricSpace& space);

// "discrete", "gaussian", or "finite" (uniform measure on the space).
using AnyMeasure = std::variant<DiscreteMeasure, GaussianMeasure>;
AnyMeasure read_measure(const json& j);
json write_measure(const DiscreteMeasure& mu);
json write_measure(const GaussianMeasure& mu);

// {"type":"joint","space":{...} | "states":[...],"n":..,"probs":[...]}
JointLaw read_joint_law(const json& j);
json write_joint_law(const JointLaw& law);
bool is_joint_law(const json& j);
bool is_model(const json& j);

MarkovModel read_model(const json& j);
json write_model(const MarkovModel& m);

// {"type":"grid","x0":..,"h":..,"values":[...]}
GridDensity read_grid(const json& j);
json write_grid(const GridDensity& g);

// {"w":..,"s":..,"plan":{...} | null}; plans above 10^6 entries are null.
json write_transport(double w, double s, const TransportPlan* plan);
json write_breakdown(const EntropyBreakdown& b);
json write_certificate(const Certificate& c);
Certificate read_certificate(const json& j);
json write_coupling(const CouplingBound& b);
json write_audit(const AuditReport& r);

// Non-finite doubles become the strings "inf", "-inf", "nan".
json number(double v);
double get_number(const json& j, const char* what);

}  // namespace concentra::io
