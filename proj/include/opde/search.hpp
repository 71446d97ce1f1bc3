#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "opde/dataset.hpp"
#include "opde/evaluator.hpp"
#include "opde/optim.hpp"
#include "opde/policy.hpp"
#include "opde/rng.hpp"

namespace opde {

// Fixed-capacity priority queue of the best expressions, deduplicated by
// traversal, sorted by reward descending.
class HallOfFame {
public:
    explicit HallOfFame(int capacity) : capacity_(capacity) {}

    void update(const std::vector<EvaluatedPde>& batch);
    const std::vector<EvaluatedPde>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    const EvaluatedPde& best() const;
    int capacity() const { return capacity_; }

private:
    int capacity_;
    std::vector<EvaluatedPde> entries_;
};

struct IterationLog {
    int iteration = 0;           // 1-based
    double best_reward = 0.0;    // best so far
    double q_eps = 0.0;          // (1-eps) reward quantile of the batch
    double mean_top_eps = 0.0;   // mean reward of the selected subset
    std::string best_expr;       // best-so-far rendering
    int n_terms = 0;             // of the best-so-far expression
    double rmse = 0.0;           // of the best-so-far expression
    int n_invalid = 0;
    int n_selected = 0;
    std::map<std::string, int> violation_counts;
    std::vector<std::string> iter_best_terms;  // best expression of this iteration
    double elapsed_seconds = 0.0;
};

// Reward of the ceil(eps * n)-th largest entry; selection {R >= q} then has
// exactly that many members absent ties.
double reward_quantile(std::vector<double> rewards, double eps);

struct PolicyOptions {
    int hidden = 32;
    bool use_attention = true;
    Optimizer::Kind optimizer = Optimizer::Kind::Adam;
};

struct SearchResult {
    EvaluatedPde best;
    std::vector<EvaluatedPde> hall_of_fame;
    std::vector<IterationLog> logs;
    bool converged = false;
};

class Search {
public:
    Search(const Library& lib, const Dataset& data, const SampleSet& pts, const Hyperparams& hp,
           const ConstraintSet& cs, const PolicyOptions& opts, std::uint64_t seed);

    // One full step of the loop: sample N, evaluate, select top-eps, ascend.
    IterationLog train_iteration();

    // Loops until max(Q) > R_star or the iteration cap.
    SearchResult run(const std::function<void(const IterationLog&)>& on_iteration = {});

    const PolicyParams& params() const { return params_; }
    const HallOfFame& hall_of_fame() const { return hof_; }

private:
    const Library& lib_;
    const Dataset& data_;
    const SampleSet& pts_;
    Hyperparams hp_;
    ConstraintSet cs_;
    PolicyParams params_;
    Optimizer optimizer_;
    HallOfFame hof_;
    Rng rng_;
    TermCache cache_;
    int iteration_ = 0;
};

}  // namespace opde
