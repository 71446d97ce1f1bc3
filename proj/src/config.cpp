#include "opde/config.hpp"

#include <fstream>
#include <set>

#include "opde/errors.hpp"

namespace opde {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& item : j.items())
        if (!allowed.count(item.key()))
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ConstraintSet RunConfig::constraints() const {
    ConstraintSet cs;
    cs.max_length = max_length;
    cs.max_plus_minus = max_plus_minus;
    cs.max_terms = hp.N_subtree;
    cs.max_term_depth = hp.D_subtree;
    cs.no_plus_minus_under_diff = no_plus_minus_under_diff;
    cs.symmetry_xy = symmetry_xy;
    return cs;
}

PolicyOptions RunConfig::policy_options() const {
    PolicyOptions po;
    po.hidden = hidden_size;
    po.use_attention = attention;
    po.optimizer = Optimizer::parse(optimizer);
    return po;
}

RunConfig RunConfig::from_json(const json& j) {
    check_keys(j, {"system", "dataset", "out", "seed", "noise", "sample_fraction", "library",
                   "constraints", "hyperparams", "policy", "surrogate"},
               "config");
    RunConfig c;
    get_if(j, "system", c.system);
    get_if(j, "dataset", c.dataset_path);
    get_if(j, "out", c.out_dir);
    get_if(j, "seed", c.seed);
    get_if(j, "noise", c.noise);
    get_if(j, "sample_fraction", c.sample_fraction);

    if (j.contains("library")) {
        const json& l = j.at("library");
        check_keys(l, {"dims", "include_laplacian", "include_trig_log", "include_t"},
                   "config.library");
        get_if(l, "dims", c.library.dims);
        get_if(l, "include_laplacian", c.library.include_laplacian);
        get_if(l, "include_trig_log", c.library.include_trig_log);
        get_if(l, "include_t", c.library.include_t);
    }
    if (j.contains("constraints")) {
        const json& s = j.at("constraints");
        check_keys(s, {"max_length", "max_plus_minus", "no_plus_minus_under_diff", "symmetry_xy"},
                   "config.constraints");
        get_if(s, "max_length", c.max_length);
        get_if(s, "max_plus_minus", c.max_plus_minus);
        get_if(s, "no_plus_minus_under_diff", c.no_plus_minus_under_diff);
        get_if(s, "symmetry_xy", c.symmetry_xy);
    }
    if (j.contains("hyperparams")) {
        const json& h = j.at("hyperparams");
        check_keys(h,
                   {"N_subtree", "D_subtree", "zeta1", "zeta2", "N", "epsilon", "lambda", "tol",
                    "coef_floor", "lambda_H", "lambda_pg", "T", "K", "R_star", "alpha",
                    "max_iterations", "stridge_max_iter"},
                   "config.hyperparams");
        get_if(h, "N_subtree", c.hp.N_subtree);
        get_if(h, "D_subtree", c.hp.D_subtree);
        get_if(h, "zeta1", c.hp.zeta1);
        get_if(h, "zeta2", c.hp.zeta2);
        get_if(h, "N", c.hp.N);
        get_if(h, "epsilon", c.hp.epsilon);
        get_if(h, "lambda", c.hp.lambda);
        get_if(h, "tol", c.hp.tol);
        get_if(h, "coef_floor", c.hp.coef_floor);
        get_if(h, "lambda_H", c.hp.lambda_H);
        get_if(h, "lambda_pg", c.hp.lambda_pg);
        get_if(h, "T", c.hp.T);
        get_if(h, "K", c.hp.K);
        get_if(h, "R_star", c.hp.R_star);
        get_if(h, "alpha", c.hp.alpha);
        get_if(h, "max_iterations", c.hp.max_iterations);
        get_if(h, "stridge_max_iter", c.hp.stridge_max_iter);
    }
    if (j.contains("policy")) {
        const json& p = j.at("policy");
        check_keys(p, {"hidden_size", "attention", "optimizer"}, "config.policy");
        get_if(p, "hidden_size", c.hidden_size);
        get_if(p, "attention", c.attention);
        get_if(p, "optimizer", c.optimizer);
    }
    if (j.contains("surrogate")) {
        const json& s = j.at("surrogate");
        check_keys(s,
                   {"enabled", "max_epochs", "patience", "learning_rate", "batch_size",
                    "val_fraction", "densify", "seed", "first_layer_scale"},
                   "config.surrogate");
        get_if(s, "enabled", c.surrogate_enabled);
        get_if(s, "max_epochs", c.smooth.max_epochs);
        get_if(s, "patience", c.smooth.patience);
        get_if(s, "learning_rate", c.smooth.learning_rate);
        get_if(s, "batch_size", c.smooth.batch_size);
        get_if(s, "val_fraction", c.smooth.val_fraction);
        get_if(s, "densify", c.smooth.densify);
        get_if(s, "seed", c.smooth.seed);
        get_if(s, "first_layer_scale", c.smooth.first_layer_scale);
    }

    if (c.hp.epsilon <= 0.0 || c.hp.epsilon > 1.0)
        throw ConfigError("epsilon must be in (0, 1]");
    if (c.hp.tol <= 0.0) throw ConfigError("tol must be positive");
    if (c.sample_fraction <= 0.0 || c.sample_fraction > 1.0)
        throw ConfigError("sample_fraction must be in (0, 1]");
    c.hp.symmetry_xy = c.symmetry_xy;
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError("invalid JSON in " + path + ": " + e.what());
    }
    return from_json(j);
}

json RunConfig::to_json() const {
    json j;
    j["system"] = system;
    j["dataset"] = dataset_path;
    j["out"] = out_dir;
    j["seed"] = seed;
    j["noise"] = noise;
    j["sample_fraction"] = sample_fraction;
    j["library"] = {{"dims", library.dims},
                    {"include_laplacian", library.include_laplacian},
                    {"include_trig_log", library.include_trig_log},
                    {"include_t", library.include_t}};
    j["constraints"] = {{"max_length", max_length},
                        {"max_plus_minus", max_plus_minus},
                        {"no_plus_minus_under_diff", no_plus_minus_under_diff},
                        {"symmetry_xy", symmetry_xy}};
    j["hyperparams"] = {{"N_subtree", hp.N_subtree},
                        {"D_subtree", hp.D_subtree},
                        {"zeta1", hp.zeta1},
                        {"zeta2", hp.zeta2},
                        {"N", hp.N},
                        {"epsilon", hp.epsilon},
                        {"lambda", hp.lambda},
                        {"tol", hp.tol},
                        {"coef_floor", hp.coef_floor},
                        {"lambda_H", hp.lambda_H},
                        {"lambda_pg", hp.lambda_pg},
                        {"T", hp.T},
                        {"K", hp.K},
                        {"R_star", hp.R_star},
                        {"alpha", hp.alpha},
                        {"max_iterations", hp.max_iterations},
                        {"stridge_max_iter", hp.stridge_max_iter}};
    j["policy"] = {{"hidden_size", hidden_size}, {"attention", attention}, {"optimizer", optimizer}};
    j["surrogate"] = {{"enabled", surrogate_enabled},
                      {"max_epochs", smooth.max_epochs},
                      {"patience", smooth.patience},
                      {"learning_rate", smooth.learning_rate},
                      {"batch_size", smooth.batch_size},
                      {"val_fraction", smooth.val_fraction},
                      {"densify", smooth.densify},
                      {"seed", smooth.seed},
                      {"first_layer_scale", smooth.first_layer_scale}};
    return j;
}

}  // namespace opde
