#include "opde/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "opde/errors.hpp"

namespace opde {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

json pde_to_json(const EvaluatedPde& pde, const Library& lib) {
    json j;
    j["traversal"] = traversal_symbols(pde.traversal, lib);
    j["terms"] = pde.terms;
    j["coefficients"] = pde.coefficients;
    j["n_terms"] = pde.n_terms;
    j["depth"] = pde.tree_depth;
    j["rmse"] = pde.rmse;
    j["reward"] = pde.reward;
    j["violation"] = violation_name(pde.violation);
    j["equation"] = render_equation(pde);
    return j;
}

json library_to_json(const Library& lib) {
    json arr = json::array();
    for (const Token& t : lib.tokens())
        arr.push_back({{"id", t.id}, {"symbol", t.symbol}, {"arity", t.arity}});
    return arr;
}

void write_run_artifacts(const std::string& out_dir, const json& config_echo, const Library& lib,
                         const SearchResult& res, double elapsed_seconds) {
    fs::create_directories(out_dir);

    {
        std::ofstream csv(fs::path(out_dir) / "iterations.csv");
        if (!csv) throw IoError("cannot write iterations.csv in " + out_dir);
        csv << "iter,best_reward,q_eps,mean_top_eps,best_expr,n_terms,rmse,n_invalid\n";
        for (const IterationLog& l : res.logs) {
            csv << l.iteration << ',' << fmt(l.best_reward) << ',' << fmt(l.q_eps) << ','
                << fmt(l.mean_top_eps) << ',' << csv_quote(l.best_expr) << ',' << l.n_terms << ','
                << fmt(l.rmse) << ',' << l.n_invalid << '\n';
        }
    }

    {
        json run;
        run["config"] = config_echo;
        run["library"] = library_to_json(lib);
        run["converged"] = res.converged;
        run["iterations_run"] = res.logs.size();
        run["elapsed_seconds"] = elapsed_seconds;
        run["best"] = pde_to_json(res.best, lib);
        json iters = json::array();
        for (const IterationLog& l : res.logs) {
            iters.push_back({{"iter", l.iteration},
                             {"best_reward", l.best_reward},
                             {"q_eps", l.q_eps},
                             {"mean_top_eps", l.mean_top_eps},
                             {"best_expr", l.best_expr},
                             {"n_terms", l.n_terms},
                             {"rmse", l.rmse},
                             {"n_invalid", l.n_invalid},
                             {"n_selected", l.n_selected},
                             {"violations", l.violation_counts},
                             {"iter_best_terms", l.iter_best_terms},
                             {"elapsed_seconds", l.elapsed_seconds}});
        }
        run["iterations"] = std::move(iters);
        std::ofstream f(fs::path(out_dir) / "run.json");
        if (!f) throw IoError("cannot write run.json in " + out_dir);
        f << run.dump(2) << "\n";
    }

    {
        json hof = json::array();
        for (const EvaluatedPde& e : res.hall_of_fame) hof.push_back(pde_to_json(e, lib));
        std::ofstream f(fs::path(out_dir) / "hall_of_fame.json");
        if (!f) throw IoError("cannot write hall_of_fame.json in " + out_dir);
        f << hof.dump(2) << "\n";
    }
}

void write_reports(const std::string& run_dir, const std::string& out_dir) {
    std::ifstream f(fs::path(run_dir) / "run.json");
    if (!f) throw IoError("cannot open " + run_dir + "/run.json");
    json run;
    try {
        f >> run;
    } catch (const json::exception& e) {
        throw IoError("invalid run.json in " + run_dir + ": " + e.what());
    }
    fs::create_directories(out_dir);

    {
        std::ofstream csv(fs::path(out_dir) / "reward_curve.csv");
        csv << "iter,best_reward,q_eps,mean_top_eps\n";
        for (const json& it : run.at("iterations"))
            csv << it.at("iter").get<int>() << ',' << fmt(it.at("best_reward").get<double>())
                << ',' << fmt(it.at("q_eps").get<double>()) << ','
                << fmt(it.at("mean_top_eps").get<double>()) << '\n';
    }

    {
        std::set<std::string> final_terms;
        for (const json& t : run.at("best").at("terms")) final_terms.insert(t.get<std::string>());
        std::ofstream csv(fs::path(out_dir) / "terms_evolution.csv");
        csv << "iter,signature,in_final_best\n";
        for (const json& it : run.at("iterations")) {
            for (const json& t : it.at("iter_best_terms")) {
                const std::string sig = t.get<std::string>();
                csv << it.at("iter").get<int>() << ',' << csv_quote(sig) << ','
                    << (final_terms.count(sig) ? 1 : 0) << '\n';
            }
        }
    }
}

void write_sweep(const std::vector<std::string>& run_dirs, const std::string& key,
                 const std::string& out_path) {
    std::ofstream csv(out_path);
    if (!csv) throw IoError("cannot write " + out_path);
    csv << key << ",run,converged,iterations,best_reward\n";
    for (const std::string& dir : run_dirs) {
        std::ifstream f(fs::path(dir) / "run.json");
        if (!f) throw IoError("cannot open " + dir + "/run.json");
        json run;
        f >> run;
        const json& hp = run.at("config").at("hyperparams");
        if (!hp.contains(key))
            throw ConfigError("hyperparams key '" + key + "' not found in " + dir);
        double best = 0.0;
        for (const json& it : run.at("iterations"))
            best = std::max(best, it.at("best_reward").get<double>());
        csv << hp.at(key).dump() << ',' << csv_quote(dir) << ','
            << (run.at("converged").get<bool>() ? 1 : 0) << ','
            << run.at("iterations_run").get<std::size_t>() << ',' << fmt(best) << '\n';
    }
}

std::vector<TruthTerm> true_terms(const std::string& system, const Library& lib) {
    auto term = [&](std::vector<std::string> symbols, double coef) {
        Traversal t = parse_symbols(symbols, lib);
        return TruthTerm{signature(rebuild_tree(t, lib), lib), std::move(t), coef};
    };
    if (system == "burgers")
        return {term({"*", "u", "d", "u", "x"}, -1.0), term({"d2", "u", "x"}, 0.1)};
    if (system == "kdv")
        return {term({"*", "u", "d", "u", "x"}, -1.0), term({"d3", "u", "x"}, -0.0025)};
    if (system == "chafee_infante")
        return {term({"d2", "u", "x"}, 1.0), term({"u"}, -1.0), term({"^3", "u"}, 1.0)};
    if (system == "pde_compound") return {term({"d2", "^2", "u", "x"}, 0.5)};
    if (system == "pde_divide")
        return {term({"/", "d", "u", "x", "x"}, -1.0), term({"d2", "u", "x"}, 0.25)};
    if (system == "allen_cahn")
        return {term({"lap", "u"}, 0.001), term({"u"}, 1.0), term({"^3", "u"}, -1.0)};
    if (system == "cahn_hilliard")
        return {term({"lap", "^3", "u"}, 1.0), term({"lap", "u"}, -1.0),
                term({"lap", "lap", "u"}, -0.5)};
    throw ConfigError("no reference equation for system '" + system + "'");
}

CoefficientCheck coefficient_error(const EvaluatedPde& pde, const Dataset& data,
                                   const SampleSet& pts, const std::string& system,
                                   const Library& lib) {
    CoefficientCheck out;
    if (!pde.valid()) {
        out.detail = "expression invalid";
        return out;
    }
    const std::vector<TruthTerm> truth = true_terms(system, lib);
    const Eigen::Index rows = static_cast<Eigen::Index>(pts.size());
    Eigen::MatrixXd T(rows, static_cast<Eigen::Index>(truth.size()));
    for (std::size_t k = 0; k < truth.size(); ++k) {
        auto [vals, status] = evaluate(rebuild_tree(truth[k].traversal, lib), data, pts, lib);
        if (!status.ok()) throw NumericError("reference term evaluation failed");
        for (Eigen::Index i = 0; i < rows; ++i)
            T(i, static_cast<Eigen::Index>(k)) = vals[static_cast<std::size_t>(i)];
    }

    const ExprTree tree = rebuild_tree(pde.traversal, lib);
    const TermSet terms = split_tree(tree, lib);

    Eigen::VectorXd recovered = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(truth.size()));
    bool all_mapped = true;
    std::string detail;

    for (std::size_t j = 0; j < pde.terms.size(); ++j) {
        const std::string& sig = pde.terms[j];
        if (sig == "1") {
            all_mapped = false;
            detail += "constant term survived; ";
            continue;
        }
        const SignedTerm* match = nullptr;
        for (const SignedTerm& t : terms)
            if (signature(t.root, lib) == sig) {
                match = &t;
                break;
            }
        if (!match) {
            all_mapped = false;
            detail += "term '" + sig + "' not found in tree; ";
            continue;
        }
        auto [vals, status] = evaluate(match->root, data, pts, lib);
        if (!status.ok()) {
            all_mapped = false;
            detail += "term '" + sig + "' failed to evaluate; ";
            continue;
        }
        Eigen::Map<const Eigen::VectorXd> col(vals.data(), rows);
        const Eigen::VectorXd beta = T.colPivHouseholderQr().solve(col);
        const double rel_residual = (T * beta - col).norm() / std::max(col.norm(), 1e-30);
        if (rel_residual > 0.02) {
            all_mapped = false;
            detail += "term '" + sig + "' outside the reference span (residual " +
                      std::to_string(rel_residual) + "); ";
            continue;
        }
        recovered += pde.coefficients[j] * beta;
    }

    bool all_present = true;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        if (std::abs(recovered(static_cast<Eigen::Index>(k))) <
            0.2 * std::abs(truth[k].coefficient)) {
            all_present = false;
            detail += "reference term '" + truth[k].name + "' missing; ";
        }
    }

    out.structure_ok = all_mapped && all_present;
    out.recovered.assign(recovered.data(), recovered.data() + recovered.size());
    Eigen::VectorXd xi_true(static_cast<Eigen::Index>(truth.size()));
    for (std::size_t k = 0; k < truth.size(); ++k)
        xi_true(static_cast<Eigen::Index>(k)) = truth[k].coefficient;
    out.rel_l1_error = relative_l1_error(recovered, xi_true);
    out.detail = detail;
    return out;
}

}  // namespace opde
