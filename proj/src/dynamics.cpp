#include "opde/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "opde/errors.hpp"
#include "opde/rng.hpp"

namespace opde {

namespace {

constexpr double kPi = std::numbers::pi;

Axis space_axis(const char* name, double min, double max, int n, bool periodic) {
    return Axis{name, min, max, n, periodic};
}

Axis time_axis(double min, double max, int n) { return Axis{"t", min, max, n, false}; }

}  // namespace

std::vector<std::string> known_systems() {
    return {"kdv", "burgers", "chafee_infante", "pde_compound",
            "pde_divide", "allen_cahn", "cahn_hilliard"};
}

SystemSpec default_spec(const std::string& name) {
    SystemSpec s;
    s.name = name;
    if (name == "kdv") {
        s.params = {{"a", -1.0}, {"b", -0.0025}};
        s.axes = {space_axis("x", -1.0, 1.0, 512, true), time_axis(0.0, 1.0, 201)};
        s.boundary = BoundaryType::Periodic;
    } else if (name == "burgers") {
        s.params = {{"v", 0.1}};
        s.axes = {space_axis("x", -8.0, 8.0, 256, true), time_axis(0.0, 10.0, 201)};
        s.boundary = BoundaryType::Periodic;
    } else if (name == "chafee_infante") {
        s.params = {{"a", -1.0}};
        s.axes = {space_axis("x", 0.0, 3.0, 301, false), time_axis(0.0, 0.5, 200)};
        s.boundary = BoundaryType::Dirichlet;
    } else if (name == "pde_compound") {
        s.params = {};
        s.axes = {space_axis("x", 1.0, 2.0, 301, false), time_axis(0.0, 0.5, 251)};
        s.boundary = BoundaryType::Dirichlet;
    } else if (name == "pde_divide") {
        s.params = {{"v", 0.25}};
        s.axes = {space_axis("x", 1.0, 2.0, 100, false), time_axis(0.0, 1.0, 251)};
        s.boundary = BoundaryType::Dirichlet;
    } else if (name == "allen_cahn") {
        s.params = {{"gamma1", 0.001}, {"gamma2", 1.0}};
        // t in (0, 5]: snapshots start after one output interval.
        s.axes = {space_axis("x", 0.0, 1.0, 64, true), space_axis("y", 0.0, 1.0, 64, true),
                  time_axis(0.05, 5.0, 100)};
        s.boundary = BoundaryType::Periodic;
    } else if (name == "cahn_hilliard") {
        s.params = {{"gamma1", 0.5}, {"gamma2", -1.0}, {"kappa", 0.5}};
        s.axes = {space_axis("x", 0.0, 64.0, 64, true), space_axis("y", 0.0, 64.0, 64, true),
                  time_axis(0.02, 10.0, 500)};
        s.boundary = BoundaryType::Periodic;
    } else {
        throw ConfigError("unknown system '" + name + "'");
    }
    return s;
}

namespace {

// State fields live on the space axes only during integration.
std::vector<Axis> space_axes(const SystemSpec& spec) {
    std::vector<Axis> axes(spec.axes.begin(), spec.axes.end() - 1);
    return axes;
}

GridField initial_condition(const SystemSpec& spec) {
    GridField u(space_axes(spec));
    const auto& axes = u.axes();
    if (axes.size() == 1) {
        const Axis& ax = axes[0];
        for (int i = 0; i < ax.n; ++i) {
            const double x = ax.coord(i);
            double v = 0.0;
            if (spec.name == "kdv") {
                // Two well-separated bumps that shed solitons.
                v = 1.5 * std::exp(-std::pow((x + 0.4) / 0.2, 2)) +
                    0.8 * std::exp(-std::pow((x - 0.3) / 0.25, 2));
            } else if (spec.name == "burgers") {
                v = -std::sin(kPi * x / 8.0) * std::exp(-x * x / 8.0);
            } else if (spec.name == "chafee_infante") {
                v = std::sin(kPi * x / 3.0);
            } else if (spec.name == "pde_compound") {
                v = 1.0 + 0.5 * std::sin(2.0 * kPi * (x - 1.0));
            } else if (spec.name == "pde_divide") {
                v = std::sin(kPi * (x - 1.0));
            }
            u.values()[static_cast<std::size_t>(i)] = v;
        }
        return u;
    }

    const Axis& ax = axes[0];
    const Axis& ay = axes[1];
    if (spec.name == "allen_cahn") {
        for (int i = 0; i < ax.n; ++i)
            for (int j = 0; j < ay.n; ++j)
                u.values()[static_cast<std::size_t>(i * ay.n + j)] =
                    std::sin(4.0 * kPi * ax.coord(i)) * std::cos(4.0 * kPi * ay.coord(j));
        return u;
    }
    // cahn_hilliard: random field in [-0.5, 0.5), lightly smoothed so the
    // stored snapshots stay resolvable by the grid stencils.
    Rng rng(spec.ic_seed + 0x9e3779b97f4a7c15ULL);
    for (double& v : u.values()) v = rng.uniform() - 0.5;
    for (int pass = 0; pass < 4; ++pass) {
        GridField s = u;
        for (int i = 0; i < ax.n; ++i) {
            for (int j = 0; j < ay.n; ++j) {
                const int im = (i + ax.n - 1) % ax.n, ip = (i + 1) % ax.n;
                const int jm = (j + ay.n - 1) % ay.n, jp = (j + 1) % ay.n;
                auto at = [&](int a, int b) { return u.values()[static_cast<std::size_t>(a * ay.n + b)]; };
                s.values()[static_cast<std::size_t>(i * ay.n + j)] =
                    0.5 * at(i, j) +
                    0.125 * (at(im, j) + at(ip, j) + at(i, jm) + at(i, jp));
            }
        }
        u = std::move(s);
    }
    return u;
}

using RhsFn = std::function<GridField(const GridField&)>;

RhsFn make_rhs(const SystemSpec& spec) {
    if (spec.name == "kdv") {
        const double a = spec.params.at("a"), b = spec.params.at("b");
        return [a, b](const GridField& u) {
            GridField ux = diff(u, "x", 1);
            GridField uxxx = diff(u, "x", 3);
            GridField out(u.axes());
            for (std::size_t i = 0; i < u.size(); ++i)
                out.values()[i] = a * u.values()[i] * ux.values()[i] + b * uxxx.values()[i];
            return out;
        };
    }
    if (spec.name == "burgers") {
        const double v = spec.params.at("v");
        return [v](const GridField& u) {
            GridField ux = diff(u, "x", 1);
            GridField uxx = diff(u, "x", 2);
            GridField out(u.axes());
            for (std::size_t i = 0; i < u.size(); ++i)
                out.values()[i] = -u.values()[i] * ux.values()[i] + v * uxx.values()[i];
            return out;
        };
    }
    if (spec.name == "chafee_infante") {
        const double a = spec.params.at("a");
        return [a](const GridField& u) {
            GridField uxx = diff(u, "x", 2);
            GridField out(u.axes());
            for (std::size_t i = 0; i < u.size(); ++i) {
                const double ui = u.values()[i];
                out.values()[i] = uxx.values()[i] + a * (ui - ui * ui * ui);
            }
            return out;
        };
    }
    if (spec.name == "pde_compound") {
        return [](const GridField& u) {
            GridField ux = diff(u, "x", 1);
            GridField flux(u.axes());
            for (std::size_t i = 0; i < u.size(); ++i)
                flux.values()[i] = u.values()[i] * ux.values()[i];
            return diff(flux, "x", 1);
        };
    }
    if (spec.name == "pde_divide") {
        const double v = spec.params.at("v");
        return [v](const GridField& u) {
            GridField ux = diff(u, "x", 1);
            GridField uxx = diff(u, "x", 2);
            const int k = u.axis_index("x");
            const Axis& ax = u.axes()[static_cast<std::size_t>(k)];
            const std::size_t stride = u.stride(k);
            GridField out(u.axes());
            for (std::size_t i = 0; i < u.size(); ++i) {
                const double x = ax.coord(static_cast<int>((i / stride) %
                                                           static_cast<std::size_t>(ax.n)));
                out.values()[i] = -ux.values()[i] / x + v * uxx.values()[i];
            }
            return out;
        };
    }
    if (spec.name == "allen_cahn") {
        const double g1 = spec.params.at("gamma1"), g2 = spec.params.at("gamma2");
        return [g1, g2](const GridField& u) {
            GridField dxx = diff(u, "x", 2);
            GridField dyy = diff(u, "y", 2);
            GridField out(u.axes());
            for (std::size_t i = 0; i < u.size(); ++i) {
                const double ui = u.values()[i];
                out.values()[i] = g1 * (dxx.values()[i] + dyy.values()[i]) +
                                  g2 * (ui - ui * ui * ui);
            }
            return out;
        };
    }
    if (spec.name == "cahn_hilliard") {
        const double g1 = spec.params.at("gamma1"), g2 = spec.params.at("gamma2");
        return [g1, g2](const GridField& u) {
            // u_t = lap(-g1 lap(u) + g2 (u - u^3)) with the paper's
            // kappa = g1, i.e. mu = u^3 - u - kappa lap(u) when g2 = -1.
            GridField lap_u = diff(u, "x", 2);
            GridField dyy = diff(u, "y", 2);
            GridField mu(u.axes());
            for (std::size_t i = 0; i < u.size(); ++i) {
                const double ui = u.values()[i];
                mu.values()[i] = -g1 * (lap_u.values()[i] + dyy.values()[i]) +
                                 g2 * (ui - ui * ui * ui);
            }
            GridField out = diff(mu, "x", 2);
            GridField out_y = diff(mu, "y", 2);
            for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += out_y.values()[i];
            return out;
        };
    }
    throw ConfigError("unknown system '" + spec.name + "'");
}

double stable_dt(const SystemSpec& spec, const GridField& u0) {
    if (spec.dt_override > 0.0) return spec.dt_override;
    const double h = spec.axes[0].spacing();
    double umax = 0.0;
    for (double v : u0.values()) umax = std::max(umax, std::abs(v));
    umax = std::max(umax, 1.0);

    double dt = 1e9;
    auto cap = [&](double lim) { dt = std::min(dt, lim); };
    if (spec.name == "kdv") {
        cap(0.4 * 2.8 * h * h * h / (2.6 * std::abs(spec.params.at("b"))));
        cap(0.4 * h / (2.0 * umax));
    } else if (spec.name == "burgers") {
        cap(0.4 * h * h / (2.0 * spec.params.at("v")));
        cap(0.4 * h / umax);
    } else if (spec.name == "chafee_infante") {
        cap(0.4 * h * h / 2.0);
        cap(0.1);
    } else if (spec.name == "pde_compound") {
        cap(0.35 * h * h / umax);
    } else if (spec.name == "pde_divide") {
        cap(0.4 * h * h / (2.0 * spec.params.at("v")));
        cap(0.4 * h * spec.axes[0].min);
    } else if (spec.name == "allen_cahn") {
        cap(0.3 * h * h / (8.0 * spec.params.at("gamma1")));
        cap(0.1);
    } else if (spec.name == "cahn_hilliard") {
        const double g1 = spec.params.at("gamma1");
        cap(0.3 * h * h * h * h / (64.0 * g1));
        cap(0.3 * h * h / (8.0 * 3.0 * umax * umax));
    }
    return dt;
}

void apply_dirichlet(GridField& du, const SystemSpec& spec) {
    if (spec.boundary != BoundaryType::Dirichlet) return;
    // Pin boundary nodes to their initial values (du/dt = 0 there).
    const auto& axes = du.axes();
    if (axes.size() == 1) {
        du.values().front() = 0.0;
        du.values().back() = 0.0;
        return;
    }
    const int nx = axes[0].n, ny = axes[1].n;
    for (int j = 0; j < ny; ++j) {
        du.values()[static_cast<std::size_t>(j)] = 0.0;
        du.values()[static_cast<std::size_t>((nx - 1) * ny + j)] = 0.0;
    }
    for (int i = 0; i < nx; ++i) {
        du.values()[static_cast<std::size_t>(i * ny)] = 0.0;
        du.values()[static_cast<std::size_t>(i * ny + ny - 1)] = 0.0;
    }
}

bool finite_field(const GridField& f) {
    for (double v : f.values())
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace

Dataset simulate(const SystemSpec& spec) {
    if (spec.axes.size() < 2 || spec.axes.back().name != "t")
        throw ConfigError("system spec must list space axes then a time axis");
    const Axis& taxis = spec.axes.back();
    const RhsFn rhs = make_rhs(spec);

    GridField u = initial_condition(spec);
    const std::size_t space_size = u.size();
    const double dt_base = stable_dt(spec, u);

    GridField stored(spec.axes);  // time is the fastest axis
    const std::size_t nt = static_cast<std::size_t>(taxis.n);
    auto store_snapshot = [&](int it) {
        const double* src = u.data();
        double* dst = stored.data();
        for (std::size_t s = 0; s < space_size; ++s)
            dst[s * nt + static_cast<std::size_t>(it)] = src[s];
    };

    auto rk4_step = [&](double dt) {
        GridField k1 = rhs(u);
        apply_dirichlet(k1, spec);
        GridField tmp(u.axes());
        for (std::size_t i = 0; i < space_size; ++i)
            tmp.values()[i] = u.values()[i] + 0.5 * dt * k1.values()[i];
        GridField k2 = rhs(tmp);
        apply_dirichlet(k2, spec);
        for (std::size_t i = 0; i < space_size; ++i)
            tmp.values()[i] = u.values()[i] + 0.5 * dt * k2.values()[i];
        GridField k3 = rhs(tmp);
        apply_dirichlet(k3, spec);
        for (std::size_t i = 0; i < space_size; ++i)
            tmp.values()[i] = u.values()[i] + dt * k3.values()[i];
        GridField k4 = rhs(tmp);
        apply_dirichlet(k4, spec);
        for (std::size_t i = 0; i < space_size; ++i)
            u.values()[i] += dt / 6.0 *
                             (k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] +
                              k4.values()[i]);
    };

    double t = 0.0;
    for (int it = 0; it < taxis.n; ++it) {
        const double target = taxis.coord(it);
        const double span = target - t;
        if (span > 1e-14) {
            const int steps = std::max(1, static_cast<int>(std::ceil(span / dt_base)));
            const double dt = span / steps;
            for (int s = 0; s < steps; ++s) rk4_step(dt);
            t = target;
        }
        if (!finite_field(u))
            throw SolverError("instability while integrating '" + spec.name +
                              "' at t=" + std::to_string(t) +
                              "; retry with a smaller dt_override");
        store_snapshot(it);
    }

    Dataset d;
    d.u = std::move(stored);
    d.ut = time_derivative(d.u);
    d.system = spec.name;
    d.params = spec.params;
    d.seed = spec.ic_seed;
    return d;
}

Dataset add_noise(const Dataset& d, double level, std::uint64_t seed) {
    if (level < 0.0) throw ConfigError("noise level must be >= 0");
    Dataset out = d;
    out.noise_level = level;
    out.seed = seed;
    if (level == 0.0) return out;

    double mean = 0.0;
    for (double v : d.u.values()) mean += v;
    mean /= static_cast<double>(d.u.size());
    double var = 0.0;
    for (double v : d.u.values()) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(d.u.size()));

    Rng rng(seed);
    for (double& v : out.u.values()) v += level * sd * rng.gaussian();
    return out;
}

SampleSet subsample(const Dataset& d, double fraction, std::uint64_t seed) {
    if (fraction <= 0.0 || fraction > 1.0)
        throw ConfigError("sample fraction must be in (0, 1]");
    SampleSet interior = full_interior(d);
    if (fraction == 1.0) return interior;
    const std::size_t count =
        static_cast<std::size_t>(fraction * static_cast<double>(interior.size()));
    Rng rng(seed);
    std::vector<std::size_t> pick = rng.sample_without_replacement(interior.size(), count);
    SampleSet out;
    out.indices.reserve(count);
    for (std::size_t p : pick) out.indices.push_back(interior.indices[p]);
    std::sort(out.indices.begin(), out.indices.end());
    return out;
}

GridField rhs_on_dataset(const Dataset& d, const SystemSpec& spec) {
    const RhsFn rhs = make_rhs(spec);
    return rhs(d.u);
}

}  // namespace opde
