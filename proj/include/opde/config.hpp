#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "opde/evaluator.hpp"
#include "opde/policy.hpp"
#include "opde/search.hpp"
#include "opde/surrogate.hpp"
#include "opde/symbols.hpp"

namespace opde {

// Aggregated run configuration. JSON form uses the canonical hyperparameter
// names (N_subtree, zeta1, ...) verbatim; unknown keys are rejected.
struct RunConfig {
    std::string system;        // one of the known systems, or empty
    std::string dataset_path;  // load instead of simulating, or empty
    std::string out_dir = "run";
    std::uint64_t seed = 0;
    double noise = 0.0;
    double sample_fraction = 1.0;

    LibraryConfig library;
    Hyperparams hp;

    int max_length = 64;
    int max_plus_minus = 9;
    bool no_plus_minus_under_diff = true;
    bool symmetry_xy = false;

    int hidden_size = 32;
    bool attention = true;
    std::string optimizer = "adam";

    bool surrogate_enabled = false;
    SmoothConfig smooth;

    ConstraintSet constraints() const;
    PolicyOptions policy_options() const;

    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::string& path);
    nlohmann::json to_json() const;  // fully resolved echo
};

}  // namespace opde
