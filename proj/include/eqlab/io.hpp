#pragma once

#include <iosfwd>
#include <string>

#include "eqlab/measure.hpp"
#include "eqlab/walk.hpp"

namespace eqlab {

// Decimal with 17 significant digits; round-trips every finite double.
std::string format_decimal(double x);

// One atom per row: x1..xd, label, weight. Header row, comma-delimited.
std::string ensemble_to_csv(const WalkEnsemble& ens);
// Coordinates become the exact rationals of the parsed doubles; the result
// is in Monte Carlo mode and carries no products.
WalkEnsemble ensemble_from_csv(const std::string& text);

// Same atom format with label 0; the space is supplied by the caller.
std::string measure_to_csv(const ScaledMeasure& m);
ScaledMeasure measure_from_csv(const std::string& text, const AlgebraSpace& space, double delta);

// Binary cache: "EQLE", u32 version, then the ensemble with arbitrary
// precision integers as sign byte, u32 byte count and little-endian bytes.
// Lossless, products included.
inline constexpr std::uint32_t kEnsembleCacheVersion = 1;
void write_ensemble(std::ostream& os, const WalkEnsemble& ens);
WalkEnsemble read_ensemble(std::istream& is);
void save_ensemble(const std::string& path, const WalkEnsemble& ens);
WalkEnsemble load_ensemble(const std::string& path);

// FNV-1a 64.
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t x);

}  // namespace eqlab
