#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "opde/expr.hpp"
#include "opde/symbols.hpp"

namespace opde {

struct Axis {
    std::string name;  // "x", "y" or "t"
    double min = 0.0;
    double max = 1.0;
    int n = 0;
    bool periodic = false;

    // Periodic axes are half-open [min, max): the wrap cell supplies the
    // missing endpoint.
    double spacing() const {
        return periodic ? (max - min) / n : (max - min) / (n - 1);
    }
    double coord(int i) const { return min + spacing() * i; }
};

// Dense scalar field over a tensor-product grid, row-major with the listed
// axis order (space axes first, time last => time varies fastest).
class GridField {
public:
    GridField() = default;
    explicit GridField(std::vector<Axis> axes);
    GridField(std::vector<Axis> axes, std::vector<double> values);

    const std::vector<Axis>& axes() const { return axes_; }
    std::size_t size() const { return values_.size(); }
    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    int axis_index(const std::string& name) const;  // -1 when absent
    std::size_t stride(int axis) const;

private:
    std::vector<Axis> axes_;
    std::vector<double> values_;
};

struct SampleSet {
    std::vector<std::size_t> indices;  // flat indices into the grid, unique
    std::size_t size() const { return indices.size(); }
};

// Finite-difference weights for the m-th derivative at z over nodes xs
// (Fornberg's recursion); exact for polynomials of degree < |xs|.
std::vector<double> fd_weights(double z, const std::vector<double>& xs, int m);

// Central differences of 2nd-order accuracy in the interior, one-sided
// stencils of matching order at non-periodic boundaries, wrap-around
// everywhere on periodic axes. order in {1,2,3}.
GridField diff(const GridField& f, const std::string& axis, int order);

GridField time_derivative(const GridField& u);

struct Dataset;  // defined in dataset.hpp

enum class EvalState { Ok, NonFinite, Overflow, DivisionByZero };

struct EvalStatus {
    EvalState state = EvalState::Ok;
    bool ok() const { return state == EvalState::Ok; }
};

inline constexpr double kOverflowThreshold = 1e30;
inline constexpr double kDivisionGuard = 1e-12;

// Post-order evaluation of an expression tree over the dataset's full grid.
// Differential operators evaluate their expression child as a full field and
// differentiate with respect to the right-child variable (lap sums d2 over
// both space axes). Any non-finite value, |v| > 1e30, or divisor below 1e-12
// flags the expression invalid.
std::pair<GridField, EvalStatus> evaluate_field(const ExprTree& tree, const Dataset& data,
                                                const Library& lib);

// Same, restricted to the sample rows.
std::pair<std::vector<double>, EvalStatus> evaluate(const ExprTree& tree, const Dataset& data,
                                                    const SampleSet& pts, const Library& lib);

}  // namespace opde
