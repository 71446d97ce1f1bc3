#include "opde/surrogate.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "opde/errors.hpp"
#include "opde/optim.hpp"
#include "opde/rng.hpp"

namespace opde {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Forward pass on standardised inputs; optionally records pre-activations.
Eigen::VectorXd forward_std(const MlpModel& m, const Eigen::MatrixXd& X,
                            std::vector<Eigen::MatrixXd>* pre, std::vector<Eigen::MatrixXd>* act) {
    const std::size_t layers = m.W.size();
    Eigen::MatrixXd a = X;
    for (std::size_t l = 0; l + 1 < layers; ++l) {
        const double scale = (l == 0) ? m.first_layer_scale : 1.0;
        Eigen::MatrixXd z = scale * (m.W[l] * a);
        z.colwise() += scale * m.b[l];
        if (pre) (*pre)[l] = z;
        a = z.array().sin().matrix();
        if (act) (*act)[l] = a;
    }
    Eigen::MatrixXd out = m.W.back() * a;
    out.colwise() += m.b.back();
    return out.row(0).transpose();
}

Eigen::MatrixXd standardise(const MlpModel& m, const Eigen::MatrixXd& X_raw) {
    Eigen::MatrixXd X = X_raw;
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        X.row(i) = (X.row(i).array() - m.in_mean(i)) / m.in_scale(i);
    return X;
}

}  // namespace

Eigen::VectorXd MlpModel::predict(const Eigen::MatrixXd& X_raw) const {
    const Eigen::VectorXd y_std = forward_std(*this, standardise(*this, X_raw), nullptr, nullptr);
    return (y_std.array() * out_scale + out_mean).matrix();
}

Eigen::VectorXd MlpModel::flatten() const {
    Eigen::Index total = 0;
    for (std::size_t l = 0; l < W.size(); ++l) total += W[l].size() + b[l].size();
    Eigen::VectorXd theta(total);
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < W.size(); ++l) {
        std::copy(W[l].data(), W[l].data() + W[l].size(), theta.data() + at);
        at += W[l].size();
        std::copy(b[l].data(), b[l].data() + b[l].size(), theta.data() + at);
        at += b[l].size();
    }
    return theta;
}

void MlpModel::unflatten(const Eigen::VectorXd& theta) {
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < W.size(); ++l) {
        std::copy(theta.data() + at, theta.data() + at + W[l].size(), W[l].data());
        at += W[l].size();
        std::copy(theta.data() + at, theta.data() + at + b[l].size(), b[l].data());
        at += b[l].size();
    }
    if (at != theta.size()) throw ConfigError("MlpModel::unflatten: size mismatch");
}

double mse_loss_grad(const MlpModel& m, const Eigen::MatrixXd& X_std, const Eigen::VectorXd& y_std,
                     Eigen::VectorXd* grad_out) {
    const std::size_t layers = m.W.size();
    const double B = static_cast<double>(X_std.cols());
    std::vector<Eigen::MatrixXd> pre(layers - 1), act(layers - 1);
    const Eigen::VectorXd out = forward_std(m, X_std, &pre, &act);
    const Eigen::VectorXd err = out - y_std;
    const double loss = err.squaredNorm() / B;
    if (!grad_out) return loss;

    std::vector<Eigen::MatrixXd> dW(layers);
    std::vector<Eigen::VectorXd> db(layers);

    Eigen::MatrixXd delta = (2.0 / B) * err.transpose();  // 1 x B
    const Eigen::MatrixXd& last_act = layers > 1 ? act[layers - 2] : X_std;
    dW[layers - 1] = delta * last_act.transpose();
    db[layers - 1] = delta.rowwise().sum();

    Eigen::MatrixXd da = m.W.back().transpose() * delta;  // H x B
    for (std::size_t l = layers - 1; l-- > 0;) {
        const double scale = (l == 0) ? m.first_layer_scale : 1.0;
        const Eigen::MatrixXd dz = scale * da.cwiseProduct(pre[l].array().cos().matrix());
        const Eigen::MatrixXd& below = (l == 0) ? X_std : act[l - 1];
        dW[l] = dz * below.transpose();
        db[l] = dz.rowwise().sum();
        if (l > 0) da = m.W[l].transpose() * dz;
    }

    Eigen::Index total = 0;
    for (std::size_t l = 0; l < layers; ++l) total += m.W[l].size() + m.b[l].size();
    grad_out->resize(total);
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        std::copy(dW[l].data(), dW[l].data() + dW[l].size(), grad_out->data() + at);
        at += dW[l].size();
        std::copy(db[l].data(), db[l].data() + db[l].size(), grad_out->data() + at);
        at += db[l].size();
    }
    return loss;
}

namespace {

MlpModel make_model(int in_dim, const std::vector<int>& hidden, double first_layer_scale,
                    Rng& rng) {
    MlpModel m;
    m.first_layer_scale = first_layer_scale;
    std::vector<int> sizes;
    sizes.push_back(in_dim);
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(1);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        Eigen::MatrixXd W(sizes[l + 1], sizes[l]);
        const double s = std::sqrt(6.0 / static_cast<double>(sizes[l] + sizes[l + 1]));
        for (Eigen::Index j = 0; j < W.cols(); ++j)
            for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = rng.uniform(-s, s);
        m.W.push_back(std::move(W));
        m.b.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
    }
    return m;
}

// Coordinates of a flat grid index, one column per sample.
void fill_inputs(const std::vector<Axis>& axes, const std::vector<std::size_t>& flat,
                 Eigen::MatrixXd& X) {
    const std::size_t dims = axes.size();
    X.resize(static_cast<Eigen::Index>(dims), static_cast<Eigen::Index>(flat.size()));
    for (std::size_t s = 0; s < flat.size(); ++s) {
        std::size_t rem = flat[s];
        for (std::size_t k = dims; k-- > 0;) {
            const int i = static_cast<int>(rem % static_cast<std::size_t>(axes[k].n));
            rem /= static_cast<std::size_t>(axes[k].n);
            X(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(s)) = axes[k].coord(i);
        }
    }
}

}  // namespace

MlpModel train_surrogate(const Dataset& d, const SampleSet& pts, const SmoothConfig& cfg) {
    if (pts.size() < 100) throw TrainingError("surrogate training needs at least 100 points");

    const std::vector<Axis>& axes = d.axes();
    Eigen::MatrixXd X;
    fill_inputs(axes, pts.indices, X);
    Eigen::VectorXd y(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i)
        y(static_cast<Eigen::Index>(i)) = d.u.data()[pts.indices[i]];

    Rng rng(cfg.seed + 0x5eedULL);
    MlpModel m = make_model(static_cast<int>(axes.size()), cfg.hidden, cfg.first_layer_scale, rng);

    // Standardisation from the full observation set.
    m.in_mean = X.rowwise().mean();
    m.in_scale.resize(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const double var =
            (X.row(i).array() - m.in_mean(i)).square().sum() / static_cast<double>(X.cols());
        m.in_scale(i) = std::max(std::sqrt(var), 1e-12);
    }
    m.out_mean = y.mean();
    m.out_scale = std::max(std::sqrt((y.array() - m.out_mean).square().sum() /
                                     static_cast<double>(y.size())),
                           1e-12);

    Eigen::MatrixXd X_std = standardise(m, X);
    Eigen::VectorXd y_std = ((y.array() - m.out_mean) / m.out_scale).matrix();

    // 0.8/0.2 split on a seeded shuffle.
    const std::size_t n = pts.size();
    std::vector<std::size_t> perm = rng.sample_without_replacement(n, n);
    const std::size_t n_val = static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(n));
    const std::size_t n_train = n - n_val;
    Eigen::MatrixXd Xtr(X_std.rows(), static_cast<Eigen::Index>(n_train)),
        Xval(X_std.rows(), static_cast<Eigen::Index>(n_val));
    Eigen::VectorXd ytr(static_cast<Eigen::Index>(n_train)), yval(static_cast<Eigen::Index>(n_val));
    for (std::size_t i = 0; i < n_train; ++i) {
        Xtr.col(static_cast<Eigen::Index>(i)) = X_std.col(static_cast<Eigen::Index>(perm[i]));
        ytr(static_cast<Eigen::Index>(i)) = y_std(static_cast<Eigen::Index>(perm[i]));
    }
    for (std::size_t i = 0; i < n_val; ++i) {
        Xval.col(static_cast<Eigen::Index>(i)) =
            X_std.col(static_cast<Eigen::Index>(perm[n_train + i]));
        yval(static_cast<Eigen::Index>(i)) = y_std(static_cast<Eigen::Index>(perm[n_train + i]));
    }

    Optimizer opt(Optimizer::Kind::Adam, cfg.learning_rate);
    Eigen::VectorXd theta = m.flatten();
    Eigen::VectorXd best_theta = theta;
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;

    const std::size_t bs = static_cast<std::size_t>(std::max(1, cfg.batch_size));
    std::vector<std::size_t> order(n_train);
    for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        // Seeded in-epoch shuffle keeps runs reproducible.
        for (std::size_t i = n_train; i > 1; --i)
            std::swap(order[i - 1], order[rng.index(i)]);
        for (std::size_t start = 0; start < n_train; start += bs) {
            const std::size_t count = std::min(bs, n_train - start);
            Eigen::MatrixXd Xb(X_std.rows(), static_cast<Eigen::Index>(count));
            Eigen::VectorXd yb(static_cast<Eigen::Index>(count));
            for (std::size_t i = 0; i < count; ++i) {
                Xb.col(static_cast<Eigen::Index>(i)) =
                    Xtr.col(static_cast<Eigen::Index>(order[start + i]));
                yb(static_cast<Eigen::Index>(i)) = ytr(static_cast<Eigen::Index>(order[start + i]));
            }
            Eigen::VectorXd grad;
            const double loss = mse_loss_grad(m, Xb, yb, &grad);
            if (!std::isfinite(loss)) throw TrainingError("surrogate training diverged");
            opt.descend(theta, grad);
            m.unflatten(theta);
        }
        const double val = n_val > 0 ? mse_loss_grad(m, Xval, yval, nullptr)
                                     : mse_loss_grad(m, Xtr, ytr, nullptr);
        if (val < best_val) {
            best_val = val;
            best_theta = theta;
            best_epoch = epoch;
        }
        m.epochs_trained = epoch;
        if (epoch - best_epoch >= cfg.patience) break;
    }

    m.unflatten(best_theta);
    m.best_val_loss = best_val;
    return m;
}

Dataset surrogate_metadata(const MlpModel& m, const std::vector<Axis>& axes, int densify) {
    if (densify < 1) throw ConfigError("densify must be >= 1");
    std::vector<Axis> dense = axes;
    for (Axis& ax : dense)
        ax.n = ax.periodic ? ax.n * densify : (ax.n - 1) * densify + 1;

    GridField u(dense);
    std::size_t total = u.size();
    std::vector<std::size_t> flat(total);
    for (std::size_t i = 0; i < total; ++i) flat[i] = i;
    Eigen::MatrixXd X;
    fill_inputs(dense, flat, X);
    const Eigen::VectorXd pred = m.predict(X);
    std::copy(pred.data(), pred.data() + pred.size(), u.values().begin());

    Dataset out;
    out.u = std::move(u);
    out.ut = time_derivative(out.u);
    out.system = "metadata";
    return out;
}

double surrogate_grad_check(const MlpModel& m, std::uint64_t seed, int max_checks) {
    Rng rng(seed);
    const int B = 16;
    Eigen::MatrixXd X(m.input_dim(), B);
    Eigen::VectorXd y(B);
    for (Eigen::Index j = 0; j < B; ++j) {
        for (Eigen::Index i = 0; i < X.rows(); ++i) X(i, j) = rng.uniform(-1.0, 1.0);
        y(j) = rng.uniform(-1.0, 1.0);
    }

    MlpModel probe = m;
    Eigen::VectorXd grad;
    mse_loss_grad(probe, X, y, &grad);

    Eigen::VectorXd theta = probe.flatten();
    const double h = 1e-6;
    double max_rel = 0.0;
    const int count = std::min<int>(max_checks, static_cast<int>(theta.size()));
    for (int c = 0; c < count; ++c) {
        const Eigen::Index k =
            static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(theta.size())));
        Eigen::VectorXd tp = theta, tm = theta;
        tp(k) += h;
        tm(k) -= h;
        probe.unflatten(tp);
        const double lp = mse_loss_grad(probe, X, y, nullptr);
        probe.unflatten(tm);
        const double lm = mse_loss_grad(probe, X, y, nullptr);
        const double fd = (lp - lm) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(grad(k)), 1e-8});
        max_rel = std::max(max_rel, std::abs(fd - grad(k)) / denom);
    }
    probe.unflatten(theta);
    return max_rel;
}

// ---------------------------------------------------------------------------
// Checkpoint format: meta.json + weights.f64, same conventions as datasets.

namespace {

std::string sha256_hex_bytes(const void* data, std::size_t len) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    if (EVP_Digest(data, len, digest, &digest_len, EVP_sha256(), nullptr) != 1)
        throw IoError("sha256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < digest_len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

}  // namespace

void MlpModel::save(const std::string& dir) const {
    fs::create_directories(dir);
    const Eigen::VectorXd theta = flatten();
    std::ofstream payload(fs::path(dir) / "weights.f64", std::ios::binary);
    if (!payload) throw IoError("cannot write weights in " + dir);
    payload.write(reinterpret_cast<const char*>(theta.data()),
                  static_cast<std::streamsize>(theta.size() * sizeof(double)));

    json meta;
    meta["format_version"] = "1";
    meta["endianness"] = "little";
    meta["first_layer_scale"] = first_layer_scale;
    meta["in_mean"] = std::vector<double>(in_mean.data(), in_mean.data() + in_mean.size());
    meta["in_scale"] = std::vector<double>(in_scale.data(), in_scale.data() + in_scale.size());
    meta["out_mean"] = out_mean;
    meta["out_scale"] = out_scale;
    json sizes = json::array();
    for (const auto& w : W) sizes.push_back({w.rows(), w.cols()});
    meta["layers"] = sizes;
    meta["sha256"] = sha256_hex_bytes(theta.data(), theta.size() * sizeof(double));
    std::ofstream f(fs::path(dir) / "meta.json");
    f << meta.dump(2) << "\n";
}

MlpModel MlpModel::load(const std::string& dir) {
    std::ifstream f(fs::path(dir) / "meta.json");
    if (!f) throw IoError("cannot open " + dir + "/meta.json");
    json meta;
    f >> meta;
    MlpModel m;
    m.first_layer_scale = meta.at("first_layer_scale").get<double>();
    const auto im = meta.at("in_mean").get<std::vector<double>>();
    const auto is = meta.at("in_scale").get<std::vector<double>>();
    m.in_mean = Eigen::Map<const Eigen::VectorXd>(im.data(), static_cast<Eigen::Index>(im.size()));
    m.in_scale = Eigen::Map<const Eigen::VectorXd>(is.data(), static_cast<Eigen::Index>(is.size()));
    m.out_mean = meta.at("out_mean").get<double>();
    m.out_scale = meta.at("out_scale").get<double>();
    Eigen::Index total = 0;
    for (const auto& s : meta.at("layers")) {
        const Eigen::Index r = s.at(0).get<Eigen::Index>(), c = s.at(1).get<Eigen::Index>();
        m.W.emplace_back(Eigen::MatrixXd::Zero(r, c));
        m.b.emplace_back(Eigen::VectorXd::Zero(r));
        total += r * c + r;
    }
    std::ifstream payload(fs::path(dir) / "weights.f64", std::ios::binary | std::ios::ate);
    if (!payload) throw IoError("cannot open weights in " + dir);
    if (payload.tellg() != static_cast<std::streamsize>(total * sizeof(double)))
        throw IoError("weights payload has wrong size in " + dir);
    payload.seekg(0);
    Eigen::VectorXd theta(total);
    payload.read(reinterpret_cast<char*>(theta.data()),
                 static_cast<std::streamsize>(total * sizeof(double)));
    if (meta.at("sha256").get<std::string>() !=
        sha256_hex_bytes(theta.data(), theta.size() * sizeof(double)))
        throw IoError("checksum failure for " + dir + "/weights.f64");
    m.unflatten(theta);
    return m;
}

}  // namespace opde
