#pragma once

#include <variant>
#include <vector>

#include "rcmdp/model.hpp"

namespace rcmdp {

enum class Norm { L1, L2, Linf };

/**
 * (s,a)-rectangular uncertainty set: each row p(.|s,a) lies in a norm ball of
 * radius psi(s,a) around the nominal row, intersected with the simplex.
 *
 * `groups` assigns each (s,a) row to a perturbation dimension for the
 * distortion sweep; by default all rows share one dimension.
 */
struct RectSet {
    TransitionKernel nominal;
    Norm norm = Norm::Linf;
    Matrix radius;            // S x A, nonnegative
    std::vector<int> groups;  // length S*A, values in [0, n_groups)

    RectSet() = default;
    RectSet(TransitionKernel nom, Norm nrm, double uniform_radius);
    RectSet(TransitionKernel nom, Norm nrm, Matrix radii);

    int n_groups() const;
    double max_radius() const { return radius.maxCoeff(); }
    double radius_at(int s, int a) const { return radius(s, a); }
};

/**
 * Non-rectangular l2 set: the whole flattened kernel lies within `budget` of
 * the nominal in Frobenius norm, with every row still a distribution.
 */
struct NonRectSet {
    TransitionKernel nominal;
    double budget = 0.0;

    NonRectSet() = default;
    NonRectSet(TransitionKernel nom, double b) : nominal(std::move(nom)), budget(b) {}
};

using UncertaintySet = std::variant<RectSet, NonRectSet>;

struct ContainsReport {
    bool ok = false;
    // Largest constraint violation across rows; negative values are slack.
    double worst_violation = 0.0;
};

/// Euclidean projection of a point onto the probability simplex.
Vector project_simplex(const Vector& x);

/// Euclidean projection of each row onto (norm ball around nominal) ∩ simplex.
TransitionKernel project(const TransitionKernel& candidate, const RectSet& set);

/// Euclidean projection of the whole kernel onto the non-rectangular set.
TransitionKernel project(const TransitionKernel& candidate, const NonRectSet& set);

TransitionKernel project(const TransitionKernel& candidate, const UncertaintySet& set);

ContainsReport contains(const TransitionKernel& kernel, const RectSet& set, double tol = 1e-8);
ContainsReport contains(const TransitionKernel& kernel, const NonRectSet& set, double tol = 1e-8);
ContainsReport contains(const TransitionKernel& kernel, const UncertaintySet& set, double tol = 1e-8);

/**
 * Maximizes <direction, p> over the set. Exact (greedy mass transfer over the
 * row polytope) for Linf and L1 rectangular rows; projected-gradient ascent to
 * eps_lmo for L2 rows and the non-rectangular set. Returns the nominal where
 * the objective is constant; among equal-value vertices prefers the
 * lexicographically smallest index.
 */
TransitionKernel linear_maximize(const Matrix& direction, const RectSet& set,
                                 double eps_lmo = 1e-8);
TransitionKernel linear_maximize(const Matrix& direction, const NonRectSet& set,
                                 double eps_lmo = 1e-8);
TransitionKernel linear_maximize(const Matrix& direction, const UncertaintySet& set,
                                 double eps_lmo = 1e-8);

const TransitionKernel& nominal_of(const UncertaintySet& set);

/**
 * Distorted test kernel for the robustness sweep. Each row group carries one
 * +/- perturbation dimension; the designated coordinate of each row moves the
 * fraction x^2 of the way from nominal to the feasible boundary in the chosen
 * direction, with the remaining mass rescaled so rows stay distributions.
 */
TransitionKernel distort(const RectSet& set, double x, const std::vector<int>& signs);

}  // namespace rcmdp
