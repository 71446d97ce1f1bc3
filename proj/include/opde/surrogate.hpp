#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "opde/dataset.hpp"

namespace opde {

struct SmoothConfig {
    int max_epochs = 20000;      // paper-scale budget of 100000 available via config
    double val_fraction = 0.2;   // train/val split 0.8/0.2
    int patience = 500;          // epochs without validation improvement
    double learning_rate = 1e-3;
    int batch_size = 512;
    std::uint64_t seed = 0;
    int densify = 2;             // metadata resolution multiplier per axis
    double first_layer_scale = 6.0;  // frequency scale of the first sine layer
    std::vector<int> hidden = {64, 64, 64};
};

// Fully connected surrogate u(x[,y],t): sine hidden layers, identity output.
// Inputs are standardised per axis, the output destandardised on prediction.
struct MlpModel {
    std::vector<Eigen::MatrixXd> W;  // layer weights, rows = out
    std::vector<Eigen::VectorXd> b;
    Eigen::VectorXd in_mean, in_scale;
    double out_mean = 0.0, out_scale = 1.0;
    double first_layer_scale = 6.0;
    double best_val_loss = 0.0;  // standardised units, at the returned weights
    int epochs_trained = 0;

    int input_dim() const { return W.empty() ? 0 : static_cast<int>(W.front().cols()); }

    // Columns of X_raw are raw input vectors (x[, y], t).
    Eigen::VectorXd predict(const Eigen::MatrixXd& X_raw) const;  // X: in x B

    Eigen::VectorXd flatten() const;
    void unflatten(const Eigen::VectorXd& theta);

    void save(const std::string& dir) const;
    static MlpModel load(const std::string& dir);
};

// Minimises MSE on the train split; returns the weights at the best
// validation loss (early stopping). Deterministic per (cfg.seed, data).
MlpModel train_surrogate(const Dataset& d, const SampleSet& pts, const SmoothConfig& cfg);

// Evaluates the model on a dense uniform grid (cfg.densify times the
// observation resolution per axis) and recomputes u_t there.
Dataset surrogate_metadata(const MlpModel& m, const std::vector<Axis>& axes, int densify);

// MSE loss and its exact weight gradient on a fixed standardised batch.
double mse_loss_grad(const MlpModel& m, const Eigen::MatrixXd& X_std, const Eigen::VectorXd& y_std,
                     Eigen::VectorXd* grad_out);

// Analytic gradient vs central finite differences on up to `max_checks`
// randomly chosen weights; returns the max relative error.
double surrogate_grad_check(const MlpModel& m, std::uint64_t seed, int max_checks = 200);

}  // namespace opde
