#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "opde/dataset.hpp"
#include "opde/grid.hpp"

namespace opde {

enum class BoundaryType { Periodic, Dirichlet };

struct SystemSpec {
    std::string name;  // kdv | burgers | chafee_infante | pde_compound |
                       // pde_divide | allen_cahn | cahn_hilliard
    std::map<std::string, double> params;
    std::vector<Axis> axes;  // space axes then time
    BoundaryType boundary = BoundaryType::Periodic;
    std::uint64_t ic_seed = 0;    // cahn_hilliard random initial condition
    double dt_override = 0.0;     // 0 = stability heuristic
};

// Grids and parameters for the seven study systems.
SystemSpec default_spec(const std::string& name);
std::vector<std::string> known_systems();

// Method-of-lines RK4 on the spec grid (spatial stencils identical to
// grid::diff), internal time step from a stability heuristic; u_t computed
// by time differencing on the stored grid. Throws SolverError when the
// state goes non-finite.
Dataset simulate(const SystemSpec& spec);

// u <- u + level * std(u) * g, i.i.d. standard Gaussian per point. u_t is
// left untouched: it is recomputed downstream after smoothing.
Dataset add_noise(const Dataset& d, double level, std::uint64_t seed);

// Uniform sample without replacement from the interior; fraction 1 keeps
// every interior point. Deterministic per seed; indices sorted.
SampleSet subsample(const Dataset& d, double fraction, std::uint64_t seed);

// Right-hand side of the governing equation evaluated with grid::diff on
// the dataset's own grid; the residual ut - rhs is the ground-truth oracle.
GridField rhs_on_dataset(const Dataset& d, const SystemSpec& spec);

}  // namespace opde
