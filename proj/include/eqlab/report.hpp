#pragma once

#include <json.hpp>

#include <string>

#include "eqlab/drift.hpp"
#include "eqlab/multconv.hpp"
#include "eqlab/spectrum.hpp"
#include "eqlab/walk.hpp"

namespace eqlab {

using Json = nlohmann::json;

// Finite doubles as numbers, non-finite ones as "inf", "-inf", "nan".
Json num(double x);
Json nums(const std::vector<double>& x);

Json to_json(const AlgebraDecomposition& dec);
Json to_json(const LyapunovProfile& p);
Json to_json(const ModuleDecomposition& md);
Json to_json(const ReturnTimeStats& s);
Json to_json(const DeviationTable& t);
Json to_json(const DecayFit& f);
Json to_json(const FourierReport& r);
Json to_json(const GranulationReport& r);
Json to_json(const WalkGranulation& g);
Json to_json(const AddStructResult& r);
Json to_json(const NCAuditReport& r);
Json to_json(const GrowthReport& r);
Json to_json(const GenerationProbe& p);
Json to_json(const FlattenTrajectory& t);
Json to_json(const PowerInequality& p);
Json to_json(const FourierDecayTable& t);
Json to_json(const MargulisTable& t);
Json to_json(const BootstrapResult& b);
Json to_json(const DiophantineSnap& s);
Json to_json(const E2ERecord& r);
Json to_json(const GeneratorSystem& sys);

// a1..ad, re, im, abs, stderr
std::string fourier_csv(const FourierReport& r);
// y1..yd, phi_y, estimate, ci, holdout, holdout_ci, q50, q90, q99, max,
// capped_fraction, rhs, holds
std::string margulis_csv(const MargulisTable& t);
// one row of scalar fields
std::string e2e_csv(const E2ERecord& r);

}  // namespace eqlab
