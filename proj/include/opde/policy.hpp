#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "opde/expr.hpp"
#include "opde/rng.hpp"
#include "opde/symbols.hpp"

namespace opde {

struct ConstraintSet {
    int max_length = 64;      // final traversal length cap
    int max_plus_minus = 9;   // global +/- count cap ("less than 10")
    int max_terms = 6;        // N_subtree: top-level +/- count <= max_terms-1
    int max_term_depth = 8;   // D_subtree
    bool no_plus_minus_under_diff = true;
    bool symmetry_xy = false;  // 2D: keep equal x/y counts reachable
};

// Recurrent agent: LSTM cell fed the (parent, sibling) one-hot pair, wrapped
// by an attention layer over the window of past output vectors.
struct PolicyParams {
    int hidden = 32;
    int window = 20;           // attention time span T
    bool use_attention = true;
    int lib_size = 0;

    Eigen::MatrixXd Wx;  // 4H x 2(L+1), gate order i,f,o,g
    Eigen::MatrixXd Wh;  // 4H x H
    Eigen::VectorXd b;   // 4H
    Eigen::MatrixXd Wq;  // H x 2H  (query projection of [h, c])
    Eigen::MatrixXd Wk;  // H x H   (key projection of O_i)
    Eigen::VectorXd wv;  // H       (score vector)
    Eigen::MatrixXd Wo;  // H x 2H  (output mixer of [h, h~])
    Eigen::MatrixXd Wy;  // L x H   (logits head)
    Eigen::VectorXd by;  // L

    int input_dim() const { return 2 * (lib_size + 1); }
    std::size_t parameter_count() const;
    Eigen::VectorXd flatten() const;
    void unflatten(const Eigen::VectorXd& theta);

    static PolicyParams init(const Library& lib, int hidden, int window, bool use_attention,
                             std::uint64_t seed);
};

PolicyParams zeros_like(const PolicyParams& p);
void accumulate(PolicyParams& acc, const PolicyParams& g, double scale = 1.0);
bool all_finite(const PolicyParams& p);

struct AgentState {
    Eigen::VectorXd h, c;
    std::vector<Eigen::VectorXd> tape;  // O_1..O_{t-1}; window applied at use

    static AgentState initial(const PolicyParams& p) {
        return AgentState{Eigen::VectorXd::Zero(p.hidden), Eigen::VectorXd::Zero(p.hidden), {}};
    }
};

// One agent step: consumes the (parent, sibling) observation (-1 = empty),
// returns unmasked logits over the library and advances the state (appends
// O_t to the tape).
Eigen::VectorXd policy_step(const PolicyParams& p, AgentState& state, int parent, int sibling);

// Allowed-token mask for the next slot. Never empty: structural rules always
// leave an operand, and the symmetry feasibility layer relaxes itself rather
// than empty the mask (final equality is a regulation).
std::vector<bool> constraint_mask(const GenState& gs, const ConstraintSet& cs,
                                  const Library& lib);

Eigen::VectorXd masked_softmax(const Eigen::VectorXd& logits, const std::vector<bool>& allowed);
double distribution_entropy(const Eigen::VectorXd& probs);

struct Rollout {
    Traversal traversal;
    std::vector<double> step_logprobs;
    std::vector<double> step_entropies;
    double logprob = 0.0;
    double entropy = 0.0;
};

// N complete, constraint-compliant rollouts; per-step categorical sampling
// from the masked softmax, deterministic per rng stream.
std::vector<Rollout> sample_batch(const PolicyParams& p, int n, const ConstraintSet& cs,
                                  const Library& lib, Rng& rng);

// Teacher-forced replay of a fixed traversal: (logprob, entropy).
std::pair<double, double> rollout_logprob(const PolicyParams& p, const Traversal& t,
                                          const ConstraintSet& cs, const Library& lib);

// Exact gradient of sum_i [w_i log p(tau_i|theta) + e_i H(tau_i|theta)] via
// backpropagation through time; the mask is treated as constant data.
PolicyParams policy_backward(const PolicyParams& p, std::span<const Rollout> rollouts,
                             std::span<const double> logprob_weights,
                             std::span<const double> entropy_weights, const ConstraintSet& cs,
                             const Library& lib);

}  // namespace opde
