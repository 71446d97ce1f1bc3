#include "opde/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "opde/errors.hpp"

namespace opde {

const char* violation_name(Violation v) {
    switch (v) {
        case Violation::None: return "none";
        case Violation::Reg1NoStateVar: return "REG1_NO_STATE_VAR";
        case Violation::Reg2Numeric: return "REG2_NUMERIC";
        case Violation::Reg3Singular: return "REG3_SINGULAR";
        case Violation::Reg4CoefFloor: return "REG4_COEF_FLOOR";
        case Violation::RegTermCount: return "REG_TERM_COUNT";
        case Violation::RegDepth: return "REG_DEPTH";
        case Violation::RegSymmetry: return "REG_SYMMETRY";
        case Violation::RewardClamp: return "REWARD_CLAMP";
    }
    return "unknown";
}

namespace {

bool contains_state_var(const ExprTree& tree, const Library& lib) {
    if (lib.is_state_var(tree.token)) return true;
    for (const ExprTree& c : tree.children)
        if (contains_state_var(c, lib)) return true;
    return false;
}

bool diff_subtrees_ok(const ExprTree& tree, const Library& lib) {
    if (lib.is_any_diff(tree.token)) {
        if (!contains_state_var(tree.children[0], lib)) return false;
    }
    for (const ExprTree& c : tree.children)
        if (!diff_subtrees_ok(c, lib)) return false;
    return true;
}

}  // namespace

Violation check_regulations(const ExprTree& tree, const Library& lib) {
    if (!diff_subtrees_ok(tree, lib)) return Violation::Reg1NoStateVar;
    return Violation::None;
}

std::shared_ptr<const TermCache::Entry> TermCache::get_or_eval(
    const std::string& sig, const ExprTree& term, const Dataset& data, const SampleSet& pts,
    const Library& lib) {
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = map_.find(sig);
        if (it != map_.end()) return it->second;
    }
    auto entry = std::make_shared<Entry>();
    auto [vals, status] = evaluate(term, data, pts, lib);
    entry->column = std::move(vals);
    entry->status = status;
    {
        std::lock_guard<std::mutex> lock(mu_);
        const std::size_t cost = entry->column.size() * sizeof(double) + sig.size() + 64;
        if (bytes_ + cost > max_bytes_) {
            map_.clear();
            bytes_ = 0;
        }
        bytes_ += cost;
        map_.emplace(sig, entry);
        return map_.at(sig);
    }
}

void TermCache::clear() {
    std::lock_guard<std::mutex> lock(mu_);
    map_.clear();
    bytes_ = 0;
}

DesignMatrix build_design_matrix(const TermSet& terms, const Dataset& data, const SampleSet& pts,
                                 const Library& lib, TermCache* cache) {
    DesignMatrix dm;
    const Eigen::Index rows = static_cast<Eigen::Index>(pts.size());
    dm.theta.resize(rows, static_cast<Eigen::Index>(terms.size()) + 1);
    for (std::size_t k = 0; k < terms.size(); ++k) {
        const std::string sig = signature(terms[k].root, lib);
        dm.signatures.push_back(sig);
        const std::vector<double>* column = nullptr;
        std::shared_ptr<const TermCache::Entry> entry;
        std::vector<double> scratch;
        if (cache) {
            entry = cache->get_or_eval(sig, terms[k].root, data, pts, lib);
            if (!entry->status.ok()) {
                dm.ok = false;
                return dm;
            }
            column = &entry->column;
        } else {
            auto [vals, status] = evaluate(terms[k].root, data, pts, lib);
            if (!status.ok()) {
                dm.ok = false;
                return dm;
            }
            scratch = std::move(vals);
            column = &scratch;
        }
        for (Eigen::Index i = 0; i < rows; ++i)
            dm.theta(i, static_cast<Eigen::Index>(k)) = (*column)[static_cast<std::size_t>(i)];
    }
    dm.theta.col(static_cast<Eigen::Index>(terms.size())).setOnes();
    return dm;
}

StridgeResult stridge(const Eigen::MatrixXd& theta, const Eigen::VectorXd& ut, double lambda,
                      double tol, int max_iter) {
    const Eigen::Index k = theta.cols();
    if (k < 1) throw ConfigError("stridge: design matrix needs at least one column");
    if (theta.rows() < k) throw ConfigError("stridge: fewer rows than columns");

    StridgeResult res;
    res.xi = Eigen::VectorXd::Zero(k);

    Eigen::VectorXd norms(k);
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < k; ++j) {
        norms(j) = theta.col(j).norm();
        if (norms(j) > 0.0) active.push_back(j);  // zero columns stay at exactly 0
    }
    if (active.empty()) return res;

    // Exact duplicate columns make the lambda=0 normal system singular; a
    // fixed jitter keeps the solve defined, regulation 3 covers the rest.
    const double jitter = 1e-10;

    auto ridge_solve = [&](const std::vector<Eigen::Index>& idx) -> Eigen::VectorXd {
        const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
        Eigen::MatrixXd A(theta.rows(), m);
        for (Eigen::Index j = 0; j < m; ++j)
            A.col(j) = theta.col(idx[static_cast<std::size_t>(j)]) /
                       norms(idx[static_cast<std::size_t>(j)]);
        Eigen::MatrixXd G = A.transpose() * A;
        G.diagonal().array() += lambda + jitter;
        Eigen::VectorXd rhs = A.transpose() * ut;
        Eigen::VectorXd sol = G.ldlt().solve(rhs);
        // De-normalise to original units.
        for (Eigen::Index j = 0; j < m; ++j) sol(j) /= norms(idx[static_cast<std::size_t>(j)]);
        return sol;
    };

    for (int iter = 0; iter < max_iter; ++iter) {
        Eigen::VectorXd sol = ridge_solve(active);
        if (!sol.allFinite()) {
            res.singular = true;
            return res;
        }
        std::vector<Eigen::Index> next;
        for (std::size_t j = 0; j < active.size(); ++j)
            if (std::abs(sol(static_cast<Eigen::Index>(j))) >= tol) next.push_back(active[j]);
        if (next.size() == active.size()) break;
        active = std::move(next);
        if (active.empty()) return res;
    }

    // Unregularised least-squares refit on the surviving support.
    Eigen::MatrixXd A(theta.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t j = 0; j < active.size(); ++j) A.col(static_cast<Eigen::Index>(j)) = theta.col(active[j]);
    Eigen::VectorXd sol = A.colPivHouseholderQr().solve(ut);
    if (!sol.allFinite()) {
        res.singular = true;
        return res;
    }
    for (std::size_t j = 0; j < active.size(); ++j) res.xi(active[j]) = sol(static_cast<Eigen::Index>(j));
    return res;
}

double reward(int n, int d, double rmse, double zeta1, double zeta2) {
    return (1.0 - zeta1 * n - zeta2 * d) / (1.0 + rmse);
}

EvaluatedPde evaluate_pde(const Traversal& traversal, const Dataset& data, const SampleSet& pts,
                          const Hyperparams& hp, const Library& lib, TermCache* cache) {
    EvaluatedPde out;
    out.traversal = traversal;

    const ExprTree tree = rebuild_tree(traversal, lib);  // defensive boundary check
    out.tree_depth = depth(tree);

    if (check_regulations(tree, lib) != Violation::None) {
        out.violation = Violation::Reg1NoStateVar;
        return out;
    }
    if (hp.symmetry_xy && lib.contains("y")) {
        int cx = 0, cy = 0;
        const TokenId x = lib.find("x"), y = lib.find("y");
        for (TokenId id : traversal) {
            if (id == x) ++cx;
            if (id == y) ++cy;
        }
        if (cx != cy) {
            out.violation = Violation::RegSymmetry;
            return out;
        }
    }

    const TermSet terms = split_tree(tree, lib);
    if (static_cast<int>(terms.size()) > hp.N_subtree) {
        out.violation = Violation::RegTermCount;
        return out;
    }
    for (const SignedTerm& t : terms) {
        if (depth(t.root) > hp.D_subtree) {
            out.violation = Violation::RegDepth;
            return out;
        }
    }

    DesignMatrix dm = build_design_matrix(terms, data, pts, lib, cache);
    if (!dm.ok) {
        out.violation = Violation::Reg2Numeric;
        return out;
    }

    Eigen::VectorXd ut(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i)
        ut(static_cast<Eigen::Index>(i)) = data.ut.data()[pts.indices[i]];

    StridgeResult sr = stridge(dm.theta, ut, hp.lambda, hp.tol, hp.stridge_max_iter);
    if (sr.singular) {
        out.violation = Violation::Reg3Singular;
        return out;
    }

    // Regulation 4: drop terms below the coefficient floor, then refit.
    std::vector<Eigen::Index> survivors;
    for (Eigen::Index j = 0; j < sr.xi.size(); ++j)
        if (std::abs(sr.xi(j)) >= hp.coef_floor) survivors.push_back(j);
    if (survivors.empty()) {
        out.violation = Violation::Reg4CoefFloor;
        return out;
    }

    Eigen::MatrixXd A(dm.theta.rows(), static_cast<Eigen::Index>(survivors.size()));
    for (std::size_t j = 0; j < survivors.size(); ++j)
        A.col(static_cast<Eigen::Index>(j)) = dm.theta.col(survivors[j]);
    Eigen::VectorXd coef = A.colPivHouseholderQr().solve(ut);
    if (!coef.allFinite()) {
        out.violation = Violation::Reg3Singular;
        return out;
    }

    const Eigen::VectorXd residual = A * coef - ut;
    out.rmse = std::sqrt(residual.squaredNorm() / static_cast<double>(residual.size()));

    const Eigen::Index const_col = dm.theta.cols() - 1;
    for (std::size_t j = 0; j < survivors.size(); ++j) {
        const Eigen::Index col = survivors[j];
        out.terms.push_back(col == const_col ? "1" : dm.signatures[static_cast<std::size_t>(col)]);
        out.coefficients.push_back(coef(static_cast<Eigen::Index>(j)));
    }
    out.n_terms = static_cast<int>(out.terms.size());

    const double r = reward(out.n_terms, out.tree_depth, out.rmse, hp.zeta1, hp.zeta2);
    if (r <= 0.0) {
        out.reward = 0.0;
        out.violation = Violation::RewardClamp;
        return out;
    }
    out.reward = r;
    return out;
}

double relative_l1_error(const Eigen::VectorXd& xi_hat, const Eigen::VectorXd& xi_true) {
    return (xi_hat - xi_true).lpNorm<1>() / xi_true.lpNorm<1>();
}

std::string render_equation(const EvaluatedPde& pde) {
    if (!pde.valid()) return std::string("invalid: ") + violation_name(pde.violation);
    std::string s = "u_t =";
    for (std::size_t i = 0; i < pde.terms.size(); ++i) {
        const double c = pde.coefficients[i];
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.4f", std::abs(c));
        s += (c < 0.0 ? (i == 0 ? " -" : " - ") : (i == 0 ? " " : " + "));
        s += buf;
        if (pde.terms[i] != "1") {
            s += "*";
            s += pde.terms[i];
        }
    }
    return s;
}

}  // namespace opde
