#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "opde/errors.hpp"

namespace opde {

// Gradient-ascent optimisers over a flat parameter vector.
class Optimizer {
public:
    enum class Kind { Adam, Sgd };

    Optimizer(Kind kind, double lr) : kind_(kind), lr_(lr) {}

    static Kind parse(const std::string& name) {
        if (name == "adam") return Kind::Adam;
        if (name == "sgd") return Kind::Sgd;
        throw ConfigError("unknown optimizer '" + name + "'");
    }

    // theta <- theta + step(grad); maximisation.
    void ascend(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
        if (kind_ == Kind::Sgd) {
            theta += lr_ * grad;
            return;
        }
        if (m_.size() != grad.size()) {
            m_ = Eigen::VectorXd::Zero(grad.size());
            v_ = Eigen::VectorXd::Zero(grad.size());
            t_ = 0;
        }
        ++t_;
        m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
        v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        theta += (lr_ / bc1) * m_.cwiseQuotient(((v_ / bc2).cwiseSqrt().array() + eps_).matrix());
    }

    void descend(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
        Eigen::VectorXd neg = -grad;
        ascend(theta, neg);
    }

private:
    Kind kind_;
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    Eigen::VectorXd m_, v_;
    long t_ = 0;
};

}  // namespace opde
