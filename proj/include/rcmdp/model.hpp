#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rcmdp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Flat row index of a state-action pair; kernels and next-state-dependent
/// cost tables store one row per (s,a) in this order.
inline int sa_index(int s, int a, int n_actions) { return s * n_actions + a; }

/**
 * Row-stochastic transition table p(s'|s,a), stored as an (S*A) x S matrix.
 * Each row must be a probability distribution (sum 1 within 1e-10).
 */
struct TransitionKernel {
    int n_states = 0;
    int n_actions = 0;
    Matrix p;  // (S*A) x S

    TransitionKernel() = default;
    TransitionKernel(int S, int A) : n_states(S), n_actions(A), p(Matrix::Zero(S * A, S)) {}

    double operator()(int s, int a, int s2) const { return p(sa_index(s, a, n_actions), s2); }

    Eigen::Block<Matrix, 1> row(int s, int a) { return p.row(sa_index(s, a, n_actions)); }
    Eigen::Block<const Matrix, 1> row(int s, int a) const {
        return p.row(sa_index(s, a, n_actions));
    }

    /// Throws std::invalid_argument if rows are not distributions within tol.
    void validate(double tol = 1e-10) const;

    /// Renormalizes rows whose sums drift within renorm_tol; throws beyond hard_tol.
    void renormalize(double renorm_tol = 1e-6, double hard_tol = 1e-6);
};

/**
 * Cost table over (s,a), optionally carrying next-state dependence (s,a,s').
 * An S x A table broadcasts over the next state.
 */
struct CostTable {
    Matrix sa;   // S x A; empty when sas is set
    Matrix sas;  // (S*A) x S; empty unless next-state dependent

    CostTable() = default;
    static CostTable from_sa(Matrix table) {
        CostTable c;
        c.sa = std::move(table);
        return c;
    }
    static CostTable from_sas(Matrix table, int n_states, int n_actions);

    bool next_state_dependent() const { return sas.size() > 0; }

    double entry(int s, int a, int s2, int n_actions) const {
        return next_state_dependent() ? sas(sa_index(s, a, n_actions), s2) : sa(s, a);
    }

    /// Per-(s,a) expected cost under the kernel; the identity map for S x A tables.
    Matrix expected_sa(const TransitionKernel& kernel) const;

    double max_abs() const { return next_state_dependent() ? sas.cwiseAbs().maxCoeff() : sa.cwiseAbs().maxCoeff(); }

    /// this + coeff * other, lifting to (s,a,s') form if either side needs it.
    CostTable axpy(double coeff, const CostTable& other, int n_states, int n_actions) const;
};

/**
 * Tabular robust constrained MDP: sizes, start distribution, cost table,
 * m constraint-cost tables, and discount. The uncertainty set is carried
 * separately (see uncertainty.hpp).
 */
struct RcmdpSpec {
    int n_states = 0;
    int n_actions = 0;
    int m = 0;  // number of constraints
    double gamma = 0.0;
    Vector rho;                    // start distribution, strictly positive
    CostTable cost0;               // entries in [-1,1]
    std::vector<CostTable> costs;  // m tables, entries in [-1,1]

    /// Checks all type invariants; throws std::invalid_argument on violation.
    void validate() const;
};

/**
 * Policy with per-state logits theta(s,a); probabilities are the row softmax
 * and are strictly positive by construction.
 */
struct SoftmaxPolicy {
    Matrix theta;  // S x A

    SoftmaxPolicy() = default;
    explicit SoftmaxPolicy(Matrix logits) : theta(std::move(logits)) {}

    static SoftmaxPolicy uniform(int n_states, int n_actions) {
        return SoftmaxPolicy(Matrix::Zero(n_states, n_actions));
    }

    Matrix probs() const;      // row-softmax of theta
    Matrix log_probs() const;  // log-softmax, computed stably

    /// Subtracts the row max from theta so logits cannot drift over many updates.
    void recenter();
};

/// Discounted state and state-action visitation distributions, both normalized.
struct OccupancyPair {
    Vector d_state;         // S
    Matrix d_state_action;  // S x A
};

struct ValueResult {
    Vector v;      // per-state values
    double v_rho;  // <rho, v>
};

/// Policy-averaged kernel P_pi(s,s') = sum_a pi(a|s) p(s'|s,a).
Matrix policy_kernel(const SoftmaxPolicy& policy, const TransitionKernel& kernel);

/**
 * Solves the occupancy fixed point d = (1-gamma)*rho + gamma*P_pi^T d
 * exactly as a linear system.
 */
OccupancyPair occupancy(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                        const RcmdpSpec& spec);

/// Exact policy evaluation: solves (I - gamma*P_pi) V = c_pi.
ValueResult value(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                  const CostTable& cost, const RcmdpSpec& spec);

/// Values of all 1+m cost tables at rho; entry 0 is the objective cost.
Vector all_values(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                  const RcmdpSpec& spec);

/// Constraint values V^j(rho), j = 1..m.
Vector constraint_values(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                         const RcmdpSpec& spec);

/// Combined cost c_0 + sum_j lambda_j c_j.
CostTable lagrangian_cost(const RcmdpSpec& spec, const Vector& lambda);

/// Value of the combined cost at rho. Rejects negative multipliers.
double lagrangian_value(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                        const Vector& lambda, const RcmdpSpec& spec);

/// Action next-state values G(s,a,s') = c(s,a,s') + gamma * V(s'), as (S*A) x S.
Matrix g_values(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                const CostTable& cost, const RcmdpSpec& spec);

/**
 * Both sides of a performance difference identity across transition kernels.
 * With second_form = false:
 *   lhs = V_{pi,p}(rho) - V_{pi,q}(rho)
 *   rhs = 1/(1-gamma) sum_s d^{pi,q}(s) sum_a pi(a|s) <p - q, G_{pi,p}(s,a,.)>
 * With second_form = true the occupancy is taken under p and G under q.
 */
std::pair<double, double> perf_diff_terms(const SoftmaxPolicy& policy,
                                          const TransitionKernel& kernel_p,
                                          const TransitionKernel& kernel_q,
                                          const CostTable& cost, const RcmdpSpec& spec,
                                          bool second_form = false);

}  // namespace rcmdp
