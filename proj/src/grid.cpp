#include "opde/grid.hpp"

#include <algorithm>
#include <cmath>

#include "opde/dataset.hpp"
#include "opde/errors.hpp"

namespace opde {

GridField::GridField(std::vector<Axis> axes) : axes_(std::move(axes)) {
    std::size_t total = 1;
    for (const Axis& a : axes_) total *= static_cast<std::size_t>(a.n);
    values_.assign(total, 0.0);
}

GridField::GridField(std::vector<Axis> axes, std::vector<double> values)
    : axes_(std::move(axes)), values_(std::move(values)) {
    std::size_t total = 1;
    for (const Axis& a : axes_) total *= static_cast<std::size_t>(a.n);
    if (total != values_.size())
        throw ConfigError("GridField: values length does not match axes");
}

int GridField::axis_index(const std::string& name) const {
    for (std::size_t i = 0; i < axes_.size(); ++i)
        if (axes_[i].name == name) return static_cast<int>(i);
    return -1;
}

std::size_t GridField::stride(int axis) const {
    std::size_t s = 1;
    for (std::size_t i = axes_.size(); i-- > static_cast<std::size_t>(axis) + 1;)
        s *= static_cast<std::size_t>(axes_[i].n);
    return s;
}

std::vector<double> fd_weights(double z, const std::vector<double>& xs, int m) {
    const int n = static_cast<int>(xs.size());
    std::vector<std::vector<double>> c(static_cast<std::size_t>(n),
                                       std::vector<double>(static_cast<std::size_t>(m) + 1, 0.0));
    double c1 = 1.0;
    double c4 = xs[0] - z;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        double c5 = c4;
        c4 = xs[static_cast<std::size_t>(i)] - z;
        for (int j = 0; j < i; ++j) {
            const double c3 = xs[static_cast<std::size_t>(i)] - xs[static_cast<std::size_t>(j)];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k)
                c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) w[static_cast<std::size_t>(j)] = c[j][m];
    return w;
}

namespace {

std::vector<double> uniform_nodes(int count, double h, double origin = 0.0) {
    std::vector<double> xs(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) xs[static_cast<std::size_t>(i)] = origin + h * i;
    return xs;
}

}  // namespace

GridField diff(const GridField& f, const std::string& axis, int order) {
    if (order < 1 || order > 3) throw StencilError("derivative order must be 1..3");
    const int k = f.axis_index(axis);
    if (k < 0) throw StencilError("no axis named '" + axis + "'");
    const Axis& ax = f.axes()[static_cast<std::size_t>(k)];
    const int n = ax.n;
    const double h = ax.spacing();

    const int central_width = (order % 2 == 0) ? order + 1 : order + 2;
    const int onesided_width = order + 2;
    const int r = (central_width - 1) / 2;
    if (n < std::max(central_width, onesided_width))
        throw StencilError("axis '" + axis + "' too short for order-" + std::to_string(order) +
                           " stencil");

    const std::vector<double> wc =
        fd_weights(r * h, uniform_nodes(central_width, h), order);
    // Boundary rows (non-periodic): skewed stencils over the first/last
    // onesided_width nodes, evaluated at the row's own coordinate.
    std::vector<std::vector<double>> wlo, whi;
    if (!ax.periodic) {
        const std::vector<double> nodes = uniform_nodes(onesided_width, h);
        for (int i = 0; i < r; ++i) wlo.push_back(fd_weights(i * h, nodes, order));
        for (int i = 0; i < r; ++i)
            whi.push_back(fd_weights((onesided_width - 1 - (r - 1 - i)) * h, nodes, order));
    }

    GridField out(f.axes());
    const std::size_t stride = f.stride(k);
    std::size_t outer = 1;
    for (int i = 0; i < k; ++i) outer *= static_cast<std::size_t>(f.axes()[static_cast<std::size_t>(i)].n);

    const double* src = f.data();
    double* dst = out.data();
    for (std::size_t maj = 0; maj < outer; ++maj) {
        for (std::size_t minr = 0; minr < stride; ++minr) {
            const std::size_t base = maj * static_cast<std::size_t>(n) * stride + minr;
            auto at = [&](int i) { return src[base + static_cast<std::size_t>(i) * stride]; };
            auto put = [&](int i, double v) { dst[base + static_cast<std::size_t>(i) * stride] = v; };

            if (ax.periodic) {
                for (int i = 0; i < n; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < central_width; ++j) {
                        int idx = (i - r + j) % n;
                        if (idx < 0) idx += n;
                        acc += wc[static_cast<std::size_t>(j)] * at(idx);
                    }
                    put(i, acc);
                }
            } else {
                for (int i = 0; i < r; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < onesided_width; ++j)
                        acc += wlo[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * at(j);
                    put(i, acc);
                }
                for (int i = r; i < n - r; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < central_width; ++j)
                        acc += wc[static_cast<std::size_t>(j)] * at(i - r + j);
                    put(i, acc);
                }
                for (int i = 0; i < r; ++i) {
                    const int row = n - r + i;
                    double acc = 0.0;
                    for (int j = 0; j < onesided_width; ++j)
                        acc += whi[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                               at(n - onesided_width + j);
                    put(row, acc);
                }
            }
        }
    }
    return out;
}

GridField time_derivative(const GridField& u) { return diff(u, "t", 1); }

// ---------------------------------------------------------------------------
// Expression evaluation

namespace {

EvalState scan_values(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return EvalState::NonFinite;
        if (std::abs(x) > kOverflowThreshold) return EvalState::Overflow;
    }
    return EvalState::Ok;
}

GridField coordinate_field(const Dataset& data, const std::string& axis) {
    const GridField& u = data.u;
    GridField out(u.axes());
    const int k = u.axis_index(axis);
    if (k < 0) throw LookupError("dataset has no axis '" + axis + "'");
    const Axis& ax = u.axes()[static_cast<std::size_t>(k)];
    const std::size_t stride = u.stride(k);
    double* dst = out.data();
    const std::size_t total = u.size();
    for (std::size_t idx = 0; idx < total; ++idx) {
        const int i = static_cast<int>((idx / stride) % static_cast<std::size_t>(ax.n));
        dst[idx] = ax.coord(i);
    }
    return out;
}

struct NodeResult {
    GridField field;
    EvalState state = EvalState::Ok;
};

NodeResult eval_node(const ExprTree& tree, const Dataset& data, const Library& lib) {
    const OpCode c = lib.code(tree.token);
    switch (c) {
        case OpCode::OperandU: return {data.u, EvalState::Ok};
        case OpCode::OperandX: return {coordinate_field(data, "x"), EvalState::Ok};
        case OpCode::OperandY: return {coordinate_field(data, "y"), EvalState::Ok};
        case OpCode::OperandT: return {coordinate_field(data, "t"), EvalState::Ok};
        case OpCode::OperandConst: {
            GridField ones(data.u.axes());
            std::fill(ones.values().begin(), ones.values().end(), 1.0);
            return {std::move(ones), EvalState::Ok};
        }
        default: break;
    }

    NodeResult lhs = eval_node(tree.children[0], data, lib);
    if (lhs.state != EvalState::Ok) return lhs;
    std::vector<double>& a = lhs.field.values();

    switch (c) {
        case OpCode::Add:
        case OpCode::Sub:
        case OpCode::Mul:
        case OpCode::Div: {
            NodeResult rhs = eval_node(tree.children[1], data, lib);
            if (rhs.state != EvalState::Ok) return rhs;
            const std::vector<double>& b = rhs.field.values();
            if (c == OpCode::Div) {
                for (double d : b)
                    if (std::abs(d) < kDivisionGuard)
                        return {GridField(), EvalState::DivisionByZero};
            }
            for (std::size_t i = 0; i < a.size(); ++i) {
                switch (c) {
                    case OpCode::Add: a[i] += b[i]; break;
                    case OpCode::Sub: a[i] -= b[i]; break;
                    case OpCode::Mul: a[i] *= b[i]; break;
                    default: a[i] /= b[i]; break;
                }
            }
            break;
        }
        case OpCode::Square:
            for (double& v : a) v *= v;
            break;
        case OpCode::Cube:
            for (double& v : a) v = v * v * v;
            break;
        case OpCode::Sin:
            for (double& v : a) v = std::sin(v);
            break;
        case OpCode::Cos:
            for (double& v : a) v = std::cos(v);
            break;
        case OpCode::Log:
            for (double& v : a) v = std::log(v);
            break;
        case OpCode::Diff1:
        case OpCode::Diff2:
        case OpCode::Diff3: {
            const std::string& var = lib.symbol(tree.children[1].token);
            lhs.field = diff(lhs.field, var, diff_order(c));
            break;
        }
        case OpCode::Laplacian: {
            GridField dxx = diff(lhs.field, "x", 2);
            GridField dyy = diff(lhs.field, "y", 2);
            for (std::size_t i = 0; i < dxx.values().size(); ++i)
                dxx.values()[i] += dyy.values()[i];
            lhs.field = std::move(dxx);
            break;
        }
        default:
            throw LookupError("unhandled operator in evaluation");
    }
    lhs.state = scan_values(lhs.field.values());
    if (lhs.state != EvalState::Ok) lhs.field = GridField();
    return lhs;
}

}  // namespace

std::pair<GridField, EvalStatus> evaluate_field(const ExprTree& tree, const Dataset& data,
                                                const Library& lib) {
    NodeResult r = eval_node(tree, data, lib);
    return {std::move(r.field), EvalStatus{r.state}};
}

std::pair<std::vector<double>, EvalStatus> evaluate(const ExprTree& tree, const Dataset& data,
                                                    const SampleSet& pts, const Library& lib) {
    auto [field, status] = evaluate_field(tree, data, lib);
    if (!status.ok()) return {{}, status};
    std::vector<double> vals(pts.size());
    const double* src = field.data();
    for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = src[pts.indices[i]];
    return {std::move(vals), status};
}

}  // namespace opde
