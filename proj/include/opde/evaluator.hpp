#pragma once

#include <Eigen/Dense>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "opde/dataset.hpp"
#include "opde/expr.hpp"
#include "opde/grid.hpp"
#include "opde/symbols.hpp"

namespace opde {

struct Hyperparams {
    double zeta1 = 0.01;       // parsimony penalty per function term
    double zeta2 = 0.0001;     // parsimony penalty per tree depth level
    double lambda = 0.0;       // STRidge regularisation weight
    double tol = 1e-4;         // STRidge hard threshold (original units)
    double coef_floor = 1e-5;  // regulation 4 floor
    int N = 500;               // expressions per iteration
    double epsilon = 0.02;     // kept fraction of rewards
    double lambda_H = 0.03;
    double lambda_pg = 1.0;
    int K = 20;                // hall-of-fame capacity
    double R_star = 0.99;      // stop when max reward in the queue exceeds this
    int T = 20;                // attention window
    int N_subtree = 6;         // max function terms
    int D_subtree = 8;         // max term depth
    double alpha = 5e-4;       // learning rate
    int max_iterations = 500;
    int stridge_max_iter = 10;
    bool symmetry_xy = false;  // 2D: equal x/y counts, checked as a regulation
};

enum class Violation {
    None,
    Reg1NoStateVar,   // differentiated subtree contains no state variable
    Reg2Numeric,      // overflow / non-finite / division by ~0
    Reg3Singular,     // irrecoverable numerical failure in the sparse solve
    Reg4CoefFloor,    // every candidate term thresholded away
    RegTermCount,     // more than N_subtree function terms
    RegDepth,         // some term deeper than D_subtree
    RegSymmetry,      // unequal x/y occurrence counts
    RewardClamp,      // parsimony numerator non-positive
};

const char* violation_name(Violation v);

struct EvaluatedPde {
    Traversal traversal;
    std::vector<std::string> terms;    // surviving terms; "1" marks the constant
    std::vector<double> coefficients;  // aligned with terms
    int n_terms = 0;                   // surviving function terms incl. constant
    int tree_depth = 0;
    double rmse = 0.0;
    double reward = 0.0;
    Violation violation = Violation::None;
    bool valid() const { return violation == Violation::None; }
};

// Regulation 1, structural part: every d/d2/d3/lap node must differentiate a
// subtree that contains a state variable.
Violation check_regulations(const ExprTree& tree, const Library& lib);

// Caches evaluated term columns per (dataset, sample set) context; keyed by
// term signature. Thread-safe.
class TermCache {
public:
    struct Entry {
        std::vector<double> column;
        EvalStatus status;
    };

    explicit TermCache(std::size_t max_bytes = 256ull << 20) : max_bytes_(max_bytes) {}

    std::shared_ptr<const Entry> get_or_eval(const std::string& sig, const ExprTree& term,
                                             const Dataset& data, const SampleSet& pts,
                                             const Library& lib);
    void clear();

private:
    std::size_t max_bytes_;
    std::size_t bytes_ = 0;
    std::unordered_map<std::string, std::shared_ptr<const Entry>> map_;
    std::mutex mu_;
};

// One column per (unsigned) term plus a trailing all-ones constant column.
// Throws on invalid terms via the returned status instead: the caller maps
// that to Regulation 2.
struct DesignMatrix {
    Eigen::MatrixXd theta;                   // P x (k+1)
    std::vector<std::string> signatures;     // k term signatures
    bool ok = true;
};

DesignMatrix build_design_matrix(const TermSet& terms, const Dataset& data,
                                 const SampleSet& pts, const Library& lib,
                                 TermCache* cache = nullptr);

// Sequential-threshold ridge regression: alternate ridge solves on unit-l2
// normalised columns with hard thresholding of |coef| < tol in original
// units; final refit is unregularised least squares on the survivors.
// Returns full-length coefficients, exact zeros off-support.
struct StridgeResult {
    Eigen::VectorXd xi;
    bool singular = false;
};

StridgeResult stridge(const Eigen::MatrixXd& theta, const Eigen::VectorXd& ut, double lambda,
                      double tol, int max_iter = 10);

double reward(int n, int d, double rmse, double zeta1, double zeta2);

// Full pipeline: rebuild -> regulations -> split -> design matrix -> STRidge
// -> coefficient floor -> refit RMSE -> reward.
EvaluatedPde evaluate_pde(const Traversal& traversal, const Dataset& data, const SampleSet& pts,
                          const Hyperparams& hp, const Library& lib, TermCache* cache = nullptr);

// || xi_hat - xi_true ||_1 / || xi_true ||_1
double relative_l1_error(const Eigen::VectorXd& xi_hat, const Eigen::VectorXd& xi_true);

std::string render_equation(const EvaluatedPde& pde);  // "u_t = c1*sig1 + ..."

}  // namespace opde
