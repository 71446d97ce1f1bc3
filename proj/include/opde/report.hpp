#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "opde/dataset.hpp"
#include "opde/evaluator.hpp"
#include "opde/search.hpp"
#include "opde/symbols.hpp"

namespace opde {

nlohmann::json pde_to_json(const EvaluatedPde& pde, const Library& lib);
nlohmann::json library_to_json(const Library& lib);

// run.json + iterations.csv + hall_of_fame.json under out_dir.
void write_run_artifacts(const std::string& out_dir, const nlohmann::json& config_echo,
                         const Library& lib, const SearchResult& res, double elapsed_seconds);

// reward_curve.csv + terms_evolution.csv derived from a finished run dir.
void write_reports(const std::string& run_dir, const std::string& out_dir);

// Sensitivity table over stored runs, grouped by one hyperparameter key
// (e.g. "N" or "epsilon"): sweep.csv rows value,run,converged,iterations,best_reward.
void write_sweep(const std::vector<std::string>& run_dirs, const std::string& key,
                 const std::string& out_path);

// Reference terms of a known system with their true coefficients.
struct TruthTerm {
    std::string name;
    Traversal traversal;
    double coefficient;
};

std::vector<TruthTerm> true_terms(const std::string& system, const Library& lib);

// Maps a discovered equation onto the reference terms by least squares on
// the data itself, so algebraically equivalent forms ((u*u)_x vs 2 u u_x,
// lap(u) vs u_xx + u_yy) resolve to the same coefficients.
struct CoefficientCheck {
    bool structure_ok = false;
    double rel_l1_error = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> recovered;  // per truth term
    std::string detail;
};

CoefficientCheck coefficient_error(const EvaluatedPde& pde, const Dataset& data,
                                   const SampleSet& pts, const std::string& system,
                                   const Library& lib);

}  // namespace opde
