#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "opde/grid.hpp"

namespace opde {

// State field u plus its precomputed time derivative on a shared grid.
struct Dataset {
    GridField u;
    GridField ut;
    std::string system;  // provenance: system name or "metadata:<source>"
    std::map<std::string, double> params;
    double noise_level = 0.0;
    double sample_fraction = 1.0;
    std::uint64_t seed = 0;

    const std::vector<Axis>& axes() const { return u.axes(); }
};

// Regression rows keep clear of one-sided stencils: per-axis margins of
// 3 cells on non-periodic space axes (third derivatives reach that far),
// 1 cell on the time axis, none on periodic axes.
std::vector<int> interior_margins(const Dataset& d);

// All interior indices, in grid order.
SampleSet full_interior(const Dataset& d);

// Directory layout: meta.json + u.f64 + ut.f64 (row-major space-major
// time-last IEEE-754 binary64, little-endian, sha256-checksummed).
void save_dataset(const Dataset& d, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace opde
