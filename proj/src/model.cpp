#include "rcmdp/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace rcmdp {

void TransitionKernel::validate(double tol) const {
    if (p.rows() != n_states * n_actions || p.cols() != n_states)
        throw std::invalid_argument("TransitionKernel: table shape does not match S, A");
    for (int r = 0; r < p.rows(); ++r) {
        if (p.row(r).minCoeff() < -tol)
            throw std::invalid_argument("TransitionKernel: negative probability in row " +
                                        std::to_string(r));
        if (std::abs(p.row(r).sum() - 1.0) > tol)
            throw std::invalid_argument("TransitionKernel: row " + std::to_string(r) +
                                        " sums to " + std::to_string(p.row(r).sum()));
    }
}

void TransitionKernel::renormalize(double renorm_tol, double hard_tol) {
    for (int r = 0; r < p.rows(); ++r) {
        const double sum = p.row(r).sum();
        if (std::abs(sum - 1.0) > hard_tol)
            throw std::invalid_argument("TransitionKernel: row " + std::to_string(r) +
                                        " deviates from stochasticity by " +
                                        std::to_string(std::abs(sum - 1.0)));
        if (p.row(r).minCoeff() < -renorm_tol)
            throw std::invalid_argument("TransitionKernel: negative probability in row " +
                                        std::to_string(r));
        p.row(r) = p.row(r).cwiseMax(0.0);
        p.row(r) /= p.row(r).sum();
    }
}

CostTable CostTable::from_sas(Matrix table, int n_states, int n_actions) {
    if (table.rows() != n_states * n_actions || table.cols() != n_states)
        throw std::invalid_argument("CostTable: (s,a,s') table shape mismatch");
    CostTable c;
    c.sas = std::move(table);
    return c;
}

Matrix CostTable::expected_sa(const TransitionKernel& kernel) const {
    if (!next_state_dependent()) return sa;
    const int S = kernel.n_states, A = kernel.n_actions;
    Matrix out(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            out(s, a) = kernel.row(s, a).dot(sas.row(sa_index(s, a, A)));
    return out;
}

CostTable CostTable::axpy(double coeff, const CostTable& other, int n_states,
                          int n_actions) const {
    CostTable out;
    if (!next_state_dependent() && !other.next_state_dependent()) {
        out.sa = sa + coeff * other.sa;
        return out;
    }
    auto lift = [&](const CostTable& c) -> Matrix {
        if (c.next_state_dependent()) return c.sas;
        Matrix lifted(n_states * n_actions, n_states);
        for (int s = 0; s < n_states; ++s)
            for (int a = 0; a < n_actions; ++a)
                lifted.row(sa_index(s, a, n_actions)).setConstant(c.sa(s, a));
        return lifted;
    };
    out.sas = lift(*this) + coeff * lift(other);
    return out;
}

void RcmdpSpec::validate() const {
    if (n_states <= 0 || n_actions <= 0) throw std::invalid_argument("RcmdpSpec: S, A must be positive");
    if (gamma <= 0.0 || gamma >= 1.0) throw std::invalid_argument("RcmdpSpec: gamma must lie in (0,1)");
    if (rho.size() != n_states) throw std::invalid_argument("RcmdpSpec: rho has wrong length");
    if (std::abs(rho.sum() - 1.0) > 1e-12) throw std::invalid_argument("RcmdpSpec: rho must sum to 1");
    if (rho.minCoeff() <= 0.0) throw std::invalid_argument("RcmdpSpec: rho must be strictly positive");
    if (static_cast<int>(costs.size()) != m) throw std::invalid_argument("RcmdpSpec: need m constraint tables");
    auto check_cost = [&](const CostTable& c, const std::string& name) {
        if (c.next_state_dependent()) {
            if (c.sas.rows() != n_states * n_actions || c.sas.cols() != n_states)
                throw std::invalid_argument("RcmdpSpec: " + name + " shape mismatch");
        } else {
            if (c.sa.rows() != n_states || c.sa.cols() != n_actions)
                throw std::invalid_argument("RcmdpSpec: " + name + " shape mismatch");
        }
        if (c.max_abs() > 1.0 + 1e-12)
            throw std::invalid_argument("RcmdpSpec: " + name + " entries must lie in [-1,1]");
    };
    check_cost(cost0, "cost0");
    for (int j = 0; j < m; ++j) check_cost(costs[j], "costs[" + std::to_string(j) + "]");
}

Matrix SoftmaxPolicy::probs() const {
    Matrix out = log_probs();
    return out.array().exp();
}

Matrix SoftmaxPolicy::log_probs() const {
    Matrix out = theta;
    for (int s = 0; s < theta.rows(); ++s) {
        const double mx = theta.row(s).maxCoeff();
        const double lse = mx + std::log((theta.row(s).array() - mx).exp().sum());
        out.row(s).array() -= lse;
    }
    return out;
}

void SoftmaxPolicy::recenter() {
    for (int s = 0; s < theta.rows(); ++s) theta.row(s).array() -= theta.row(s).maxCoeff();
}

Matrix policy_kernel(const SoftmaxPolicy& policy, const TransitionKernel& kernel) {
    const int S = kernel.n_states, A = kernel.n_actions;
    const Matrix pi = policy.probs();
    Matrix ppi = Matrix::Zero(S, S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) ppi.row(s) += pi(s, a) * kernel.row(s, a);
    return ppi;
}

OccupancyPair occupancy(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                        const RcmdpSpec& spec) {
    const int S = spec.n_states;
    if (kernel.n_states != S || kernel.n_actions != spec.n_actions)
        throw std::invalid_argument("occupancy: kernel dimensions disagree with spec");
    const Matrix ppi = policy_kernel(policy, kernel);
    const Matrix lhs = Matrix::Identity(S, S) - spec.gamma * ppi.transpose();
    Vector d = lhs.partialPivLu().solve((1.0 - spec.gamma) * spec.rho);

    OccupancyPair out;
    out.d_state = d;
    const Matrix pi = policy.probs();
    out.d_state_action = pi.array().colwise() * d.array();
    return out;
}

ValueResult value(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                  const CostTable& cost, const RcmdpSpec& spec) {
    const int S = spec.n_states;
    const Matrix pi = policy.probs();
    const Matrix c_sa = cost.expected_sa(kernel);
    if (c_sa.rows() != S || c_sa.cols() != spec.n_actions)
        throw std::invalid_argument("value: cost table dimensions disagree with spec");
    const Vector c_pi = (pi.array() * c_sa.array()).rowwise().sum();
    const Matrix lhs = Matrix::Identity(S, S) - spec.gamma * policy_kernel(policy, kernel);
    ValueResult out;
    out.v = lhs.partialPivLu().solve(c_pi);
    out.v_rho = spec.rho.dot(out.v);
    return out;
}

Vector all_values(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                  const RcmdpSpec& spec) {
    Vector out(1 + spec.m);
    out(0) = value(policy, kernel, spec.cost0, spec).v_rho;
    for (int j = 0; j < spec.m; ++j) out(1 + j) = value(policy, kernel, spec.costs[j], spec).v_rho;
    return out;
}

Vector constraint_values(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                         const RcmdpSpec& spec) {
    Vector out(spec.m);
    for (int j = 0; j < spec.m; ++j) out(j) = value(policy, kernel, spec.costs[j], spec).v_rho;
    return out;
}

CostTable lagrangian_cost(const RcmdpSpec& spec, const Vector& lambda) {
    if (lambda.size() != spec.m) throw std::invalid_argument("lagrangian_cost: lambda has wrong length");
    CostTable combined = spec.cost0;
    for (int j = 0; j < spec.m; ++j)
        combined = combined.axpy(lambda(j), spec.costs[j], spec.n_states, spec.n_actions);
    return combined;
}

double lagrangian_value(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                        const Vector& lambda, const RcmdpSpec& spec) {
    if (lambda.size() != spec.m) throw std::invalid_argument("lagrangian_value: lambda has wrong length");
    if (spec.m > 0 && lambda.minCoeff() < 0.0)
        throw std::invalid_argument("lagrangian_value: multipliers must be nonnegative");
    return value(policy, kernel, lagrangian_cost(spec, lambda), spec).v_rho;
}

Matrix g_values(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                const CostTable& cost, const RcmdpSpec& spec) {
    const int S = spec.n_states, A = spec.n_actions;
    const Vector v = value(policy, kernel, cost, spec).v;
    Matrix g(S * A, S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            for (int s2 = 0; s2 < S; ++s2)
                g(sa_index(s, a, A), s2) = cost.entry(s, a, s2, A) + spec.gamma * v(s2);
    return g;
}

std::pair<double, double> perf_diff_terms(const SoftmaxPolicy& policy,
                                          const TransitionKernel& kernel_p,
                                          const TransitionKernel& kernel_q,
                                          const CostTable& cost, const RcmdpSpec& spec,
                                          bool second_form) {
    const int S = spec.n_states, A = spec.n_actions;
    const double lhs = value(policy, kernel_p, cost, spec).v_rho -
                       value(policy, kernel_q, cost, spec).v_rho;

    // First form: occupancy under q, G under p. Second form swaps both.
    const OccupancyPair d = occupancy(policy, second_form ? kernel_p : kernel_q, spec);
    const Matrix g = g_values(policy, second_form ? kernel_q : kernel_p, cost, spec);
    const Matrix pi = policy.probs();

    double rhs = 0.0;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const int r = sa_index(s, a, A);
            rhs += d.d_state(s) * pi(s, a) *
                   (kernel_p.p.row(r) - kernel_q.p.row(r)).dot(g.row(r));
        }
    rhs /= (1.0 - spec.gamma);
    return {lhs, rhs};
}

}  // namespace rcmdp
