#include "rcmdp/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace rcmdp {

namespace {

constexpr int kMaxSweeps = 10000;
constexpr double kDykstraTol = 1e-9;

double row_distance(const Vector& a, const Vector& b, Norm norm) {
    switch (norm) {
        case Norm::L1: return (a - b).lpNorm<1>();
        case Norm::L2: return (a - b).norm();
        case Norm::Linf: return (a - b).lpNorm<Eigen::Infinity>();
    }
    return 0.0;
}

// Projection onto the l1 ball of radius r centred at the origin (soft threshold).
Vector project_l1_ball(const Vector& z, double r) {
    if (z.lpNorm<1>() <= r) return z;
    const Vector abs = z.cwiseAbs();
    double lo = 0.0, hi = abs.maxCoeff();
    for (int it = 0; it < 200; ++it) {
        const double theta = 0.5 * (lo + hi);
        const double mass = (abs.array() - theta).max(0.0).sum();
        (mass > r ? lo : hi) = theta;
    }
    const double theta = 0.5 * (lo + hi);
    return z.array().sign() * (abs.array() - theta).max(0.0);
}

Vector project_l2_ball(const Vector& z, double r) {
    const double n = z.norm();
    return n <= r ? z : Vector(z * (r / n));
}

// Exact projection onto {lo <= q <= hi, sum q = 1} by bisection on the shift.
// The final snap redistributes the sum residual over unpinned coordinates;
// without it, very large inputs lose the mass constraint to cancellation.
Vector project_box_simplex(const Vector& x, const Vector& lo, const Vector& hi) {
    const int n = static_cast<int>(x.size());
    double tlo = (x - hi).minCoeff() - 1.0;
    double thi = (x - lo).maxCoeff() + 1.0;
    for (int it = 0; it < 200; ++it) {
        const double tau = 0.5 * (tlo + thi);
        const double sum = (x.array() - tau).min(hi.array()).max(lo.array()).sum();
        (sum > 1.0 ? tlo : thi) = tau;
    }
    const double tau = 0.5 * (tlo + thi);
    Vector q = (x.array() - tau).min(hi.array()).max(lo.array());
    for (int pass = 0; pass < 4; ++pass) {
        const double residual = 1.0 - q.sum();
        if (std::abs(residual) <= 1e-14) break;
        std::vector<int> room;
        for (int i = 0; i < n; ++i)
            if (residual > 0.0 ? q(i) < hi(i) - 1e-12 : q(i) > lo(i) + 1e-12) room.push_back(i);
        if (room.empty()) break;
        for (int i : room) q(i) += residual / room.size();
        q = q.array().min(hi.array()).max(lo.array());
    }
    return q;
}

// Dykstra's alternating projections onto the intersection of two convex sets.
// Stops once both correction increments stabilize; the plain iterate distance
// can stall long before feasibility.
template <typename ProjA, typename ProjB>
Vector dykstra(Vector x, ProjA&& proj_a, ProjB&& proj_b, const char* what) {
    Vector p = Vector::Zero(x.size());
    Vector q = Vector::Zero(x.size());
    double inc = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        const Vector p_old = p;
        const Vector q_old = q;
        const Vector y = proj_a(x + p);
        p = x + p - y;
        x = proj_b(y + q);
        q = y + q - x;
        inc = (p - p_old).lpNorm<Eigen::Infinity>() + (q - q_old).lpNorm<Eigen::Infinity>();
        if (inc < kDykstraTol) return x;
    }
    throw std::runtime_error(std::string("projection did not converge (") + what +
                             "), residual " + std::to_string(inc));
}

}  // namespace

Vector project_simplex(const Vector& x) {
    const int n = static_cast<int>(x.size());
    std::vector<double> u(x.data(), x.data() + n);
    std::sort(u.begin(), u.end(), std::greater<double>());
    // The support condition u[i] > (cumsum-1)/(i+1) holds on a prefix; theta is
    // the threshold at the last index of that prefix.
    double css = 0.0, theta = 0.0;
    for (int i = 0; i < n; ++i) {
        css += u[i];
        const double t = (css - 1.0) / (i + 1);
        if (u[i] > t) theta = t;
    }
    return (x.array() - theta).max(0.0);
}

RectSet::RectSet(TransitionKernel nom, Norm nrm, double uniform_radius)
    : RectSet(std::move(nom), nrm, Matrix()) {
    radius = Matrix::Constant(nominal.n_states, nominal.n_actions, uniform_radius);
}

RectSet::RectSet(TransitionKernel nom, Norm nrm, Matrix radii)
    : nominal(std::move(nom)), norm(nrm), radius(std::move(radii)) {
    groups.assign(static_cast<size_t>(nominal.n_states) * nominal.n_actions, 0);
}

int RectSet::n_groups() const {
    return groups.empty() ? 0 : *std::max_element(groups.begin(), groups.end()) + 1;
}

TransitionKernel project(const TransitionKernel& candidate, const RectSet& set) {
    const int S = set.nominal.n_states, A = set.nominal.n_actions;
    if (candidate.n_states != S || candidate.n_actions != A)
        throw std::invalid_argument("project: candidate dimensions disagree with set");
    TransitionKernel out = candidate;
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            const int r = sa_index(s, a, A);
            const Vector nom = set.nominal.p.row(r).transpose();
            const Vector x = candidate.p.row(r).transpose();
            const double psi = set.radius(s, a);
            Vector q;
            switch (set.norm) {
                case Norm::Linf: {
                    const Vector lo = (nom.array() - psi).max(0.0);
                    const Vector hi = (nom.array() + psi).min(1.0);
                    q = project_box_simplex(x, lo, hi);
                    break;
                }
                case Norm::L1:
                    q = dykstra(
                        x, [&](const Vector& v) { return Vector(nom + project_l1_ball(v - nom, psi)); },
                        [](const Vector& v) { return project_simplex(v); }, "l1 row");
                    break;
                case Norm::L2:
                    q = dykstra(
                        x, [&](const Vector& v) { return Vector(nom + project_l2_ball(v - nom, psi)); },
                        [](const Vector& v) { return project_simplex(v); }, "l2 row");
                    break;
            }
            out.p.row(r) = q.transpose();
        }
    }
    return out;
}

TransitionKernel project(const TransitionKernel& candidate, const NonRectSet& set) {
    const int S = set.nominal.n_states, A = set.nominal.n_actions;
    if (candidate.n_states != S || candidate.n_actions != A)
        throw std::invalid_argument("project: candidate dimensions disagree with set");

    // Flatten; alternate between the global l2 ball and the product of row simplices.
    const Eigen::Map<const Vector> nom(set.nominal.p.data(), set.nominal.p.size());
    Eigen::Map<const Vector> x(candidate.p.data(), candidate.p.size());
    auto proj_rows = [&](const Vector& v) {
        Matrix k = Eigen::Map<const Matrix>(v.data(), S * A, S);
        for (int r = 0; r < S * A; ++r)
            k.row(r) = project_simplex(k.row(r).transpose()).transpose();
        return Vector(Eigen::Map<const Vector>(k.data(), k.size()));
    };
    const Vector flat = dykstra(
        Vector(x),
        [&](const Vector& v) { return Vector(nom + project_l2_ball(v - nom, set.budget)); },
        proj_rows, "non-rectangular kernel");

    TransitionKernel out(S, A);
    out.p = Eigen::Map<const Matrix>(flat.data(), S * A, S);
    return out;
}

TransitionKernel project(const TransitionKernel& candidate, const UncertaintySet& set) {
    return std::visit([&](const auto& s) { return project(candidate, s); }, set);
}

ContainsReport contains(const TransitionKernel& kernel, const RectSet& set, double tol) {
    const int S = set.nominal.n_states, A = set.nominal.n_actions;
    ContainsReport rep;
    rep.worst_violation = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const int r = sa_index(s, a, A);
            const Vector row = kernel.p.row(r).transpose();
            const Vector nom = set.nominal.p.row(r).transpose();
            rep.worst_violation = std::max(
                rep.worst_violation, row_distance(row, nom, set.norm) - set.radius(s, a));
            // simplex membership contributes only when actually breached
            const double stoch = std::abs(row.sum() - 1.0);
            const double neg = -row.minCoeff();
            if (stoch > tol) rep.worst_violation = std::max(rep.worst_violation, stoch);
            if (neg > tol) rep.worst_violation = std::max(rep.worst_violation, neg);
        }
    rep.ok = rep.worst_violation <= tol;
    return rep;
}

ContainsReport contains(const TransitionKernel& kernel, const NonRectSet& set, double tol) {
    ContainsReport rep;
    rep.worst_violation = (kernel.p - set.nominal.p).norm() - set.budget;
    for (int r = 0; r < kernel.p.rows(); ++r) {
        const double stoch = std::abs(kernel.p.row(r).sum() - 1.0);
        const double neg = -kernel.p.row(r).minCoeff();
        if (stoch > tol) rep.worst_violation = std::max(rep.worst_violation, stoch);
        if (neg > tol) rep.worst_violation = std::max(rep.worst_violation, neg);
    }
    rep.ok = rep.worst_violation <= tol;
    return rep;
}

ContainsReport contains(const TransitionKernel& kernel, const UncertaintySet& set, double tol) {
    return std::visit([&](const auto& s) { return contains(kernel, s, tol); }, set);
}

namespace {

bool direction_constant(const Vector& g) {
    return g.maxCoeff() - g.minCoeff() <= 1e-14 * std::max(1.0, g.cwiseAbs().maxCoeff());
}

// Exact LP maximum of <g, q> over {lo <= q <= hi, sum q = 1}: start every
// coordinate at its lower bound and spend the remaining mass greedily.
Vector maximize_box_row(const Vector& g, const Vector& lo, const Vector& hi) {
    const int n = static_cast<int>(g.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return g(i) > g(j); });
    Vector q = lo;
    double mass = 1.0 - lo.sum();
    for (int idx : order) {
        if (mass <= 0.0) break;
        const double take = std::min(mass, hi(idx) - lo(idx));
        q(idx) += take;
        mass -= take;
    }
    return q;
}

// Exact LP maximum over {||q - nom||_1 <= psi} ∩ simplex: shift mass from the
// cheapest donors to the single best coordinate, at l1 cost 2 per unit moved.
Vector maximize_l1_row(const Vector& g, const Vector& nom, double psi) {
    const int n = static_cast<int>(g.size());
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (g(i) > g(best)) best = i;
    std::vector<int> donors(n);
    std::iota(donors.begin(), donors.end(), 0);
    std::stable_sort(donors.begin(), donors.end(),
                     [&](int i, int j) { return g(i) < g(j); });
    Vector q = nom;
    double budget = std::min(psi / 2.0, 1.0 - nom(best));
    for (int idx : donors) {
        if (budget <= 0.0) break;
        if (idx == best || g(idx) >= g(best)) continue;
        const double take = std::min(budget, q(idx));
        q(idx) -= take;
        q(best) += take;
        budget -= take;
    }
    return q;
}

// Projected-gradient ascent on a linear objective; exact when the ball
// constraint alone is active (closed form), iterative otherwise.
template <typename Proj>
Vector ascend_linear(const Vector& g, const Vector& start, double step0, Proj&& proj,
                     double eps_lmo) {
    Vector q = proj(start);
    double best = g.dot(q);
    Vector best_q = q;
    double step = step0;
    for (int phase = 0; phase < 3; ++phase, step *= 0.1) {
        int stagnant = 0;
        for (int it = 0; it < 2000; ++it) {
            q = proj(q + step * g);
            const double obj = g.dot(q);
            if (obj > best + eps_lmo * 1e-3) {
                best = obj;
                best_q = q;
                stagnant = 0;
            } else if (++stagnant > 25) {
                break;
            }
        }
        q = best_q;
    }
    return best_q;
}

}  // namespace

TransitionKernel linear_maximize(const Matrix& direction, const RectSet& set, double eps_lmo) {
    const int S = set.nominal.n_states, A = set.nominal.n_actions;
    if (direction.rows() != S * A || direction.cols() != S)
        throw std::invalid_argument("linear_maximize: direction shape mismatch");
    if (!direction.allFinite()) throw std::invalid_argument("linear_maximize: direction must be finite");

    TransitionKernel out = set.nominal;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const int r = sa_index(s, a, A);
            const Vector g = direction.row(r).transpose();
            const Vector nom = set.nominal.p.row(r).transpose();
            const double psi = set.radius(s, a);
            if (psi <= 0.0 || direction_constant(g)) continue;
            Vector q;
            switch (set.norm) {
                case Norm::Linf: {
                    const Vector lo = (nom.array() - psi).max(0.0);
                    const Vector hi = (nom.array() + psi).min(1.0);
                    q = maximize_box_row(g, lo, hi);
                    break;
                }
                case Norm::L1:
                    q = maximize_l1_row(g, nom, psi);
                    break;
                case Norm::L2: {
                    // Candidate ignoring positivity: full ball step inside the sum-zero plane.
                    Vector centred = g.array() - g.mean();
                    if (centred.norm() <= 1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff()))
                        continue;
                    Vector cand = nom + (psi / centred.norm()) * centred;
                    if (cand.minCoeff() >= -1e-15) {
                        q = cand.cwiseMax(0.0);
                    } else {
                        auto proj = [&](const Vector& v) {
                            return dykstra(
                                v,
                                [&](const Vector& u) { return Vector(nom + project_l2_ball(u - nom, psi)); },
                                [](const Vector& u) { return project_simplex(u); }, "l2 lmo");
                        };
                        q = ascend_linear(g, nom, psi / centred.norm(), proj, eps_lmo);
                    }
                    break;
                }
            }
            out.p.row(r) = q.transpose();
        }
    return out;
}

TransitionKernel linear_maximize(const Matrix& direction, const NonRectSet& set, double eps_lmo) {
    const int S = set.nominal.n_states, A = set.nominal.n_actions;
    if (direction.rows() != S * A || direction.cols() != S)
        throw std::invalid_argument("linear_maximize: direction shape mismatch");
    if (!direction.allFinite()) throw std::invalid_argument("linear_maximize: direction must be finite");

    const Eigen::Map<const Vector> nom(set.nominal.p.data(), set.nominal.p.size());
    Matrix centred_rows = direction;
    for (int r = 0; r < centred_rows.rows(); ++r)
        centred_rows.row(r).array() -= centred_rows.row(r).mean();
    const Eigen::Map<const Vector> g(direction.data(), direction.size());
    const Eigen::Map<const Vector> centred(centred_rows.data(), centred_rows.size());

    TransitionKernel out = set.nominal;
    if (centred.norm() <= 1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff())) return out;

    Vector cand = nom + (set.budget / centred.norm()) * centred;
    Vector flat;
    if (cand.minCoeff() >= -1e-15) {
        flat = cand.cwiseMax(0.0);
    } else {
        auto proj = [&](const Vector& v) {
            Matrix k = Eigen::Map<const Matrix>(v.data(), S * A, S);
            TransitionKernel tmp(S, A);
            tmp.p = k;
            return Vector(Eigen::Map<const Vector>(project(tmp, set).p.data(), v.size()));
        };
        flat = ascend_linear(Vector(g), Vector(nom), set.budget / centred.norm(), proj, eps_lmo);
    }
    out.p = Eigen::Map<const Matrix>(flat.data(), S * A, S);
    return out;
}

TransitionKernel linear_maximize(const Matrix& direction, const UncertaintySet& set,
                                 double eps_lmo) {
    return std::visit([&](const auto& s) { return linear_maximize(direction, s, eps_lmo); }, set);
}

const TransitionKernel& nominal_of(const UncertaintySet& set) {
    return std::visit([](const auto& s) -> const TransitionKernel& { return s.nominal; }, set);
}

TransitionKernel distort(const RectSet& set, double x, const std::vector<int>& signs) {
    if (x < 0.0 || x > 1.0) throw std::invalid_argument("distort: x must lie in [0,1]");
    if (static_cast<int>(signs.size()) != set.n_groups())
        throw std::invalid_argument("distort: need one sign per perturbation dimension");
    for (int s : signs)
        if (s != 1 && s != -1) throw std::invalid_argument("distort: signs must be +1 or -1");

    const int S = set.nominal.n_states, A = set.nominal.n_actions;
    TransitionKernel out = set.nominal;
    const int coord = S - 1;  // designated perturbation coordinate per row
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const int r = sa_index(s, a, A);
            const double psi = set.radius(s, a);
            const Vector nom = set.nominal.p.row(r).transpose();
            if (psi <= 0.0 || nom(coord) >= 1.0 - 1e-12) continue;

            // Moving the coordinate to v rescales the rest: the row displacement
            // is (v - nom_c) * u for a fixed direction u, so the feasible range
            // of v is an interval computable in closed form.
            Vector u = -nom / (1.0 - nom(coord));
            u(coord) = 1.0;
            const double span = psi / row_distance(u, Vector::Zero(S), set.norm);
            const int sign = signs[set.groups[r]];
            const double boundary =
                sign > 0 ? std::min(1.0, nom(coord) + span) : std::max(0.0, nom(coord) - span);
            const double v = nom(coord) + x * x * (boundary - nom(coord));

            Vector row = nom * ((1.0 - v) / (1.0 - nom(coord)));
            row(coord) = v;
            out.p.row(r) = row.transpose();
        }
    return out;
}

}  // namespace rcmdp
