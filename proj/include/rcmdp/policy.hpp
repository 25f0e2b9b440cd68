#pragma once

#include <cstdint>
#include <optional>

#include "rcmdp/model.hpp"
#include "rcmdp/sampling.hpp"

namespace rcmdp {

/**
 * Dual variables and the ingredients of the augmented multipliers
 * lambda_tilde_j = lambda_j + eta_lambda * Vhat^j. In clipped mode the update
 * instead clips lambda to [0, lambda_max].
 */
struct DualState {
    Vector lambda;       // m, nonnegative
    double eta_lambda = 1.0;
    Vector last_vhat;    // Vhat^j under the current (policy, kernel)
    std::optional<double> lambda_max;  // set => clipped mode

    /// Multipliers entering the combined cost: lambda + eta_lambda*Vhat in
    /// augmented mode, the plain (clipped) lambda otherwise.
    Vector augmented() const {
        return lambda_max ? lambda : Vector(lambda + eta_lambda * last_vhat);
    }
};

/// Initial dual state: lambda_0j = max{0, -eta_lambda * vhat0_j}.
DualState make_dual(double eta_lambda, const Vector& vhat0,
                    std::optional<double> lambda_max = std::nullopt);

/// lambda'_j = max{-eta_lambda*vhat_j, lambda_j + eta_lambda*vhat_j} (augmented
/// mode) or clip(lambda_j + eta_lambda*vhat_j, 0, lambda_max) (clipped mode).
DualState dual_update(const DualState& dual, const Vector& vhat);

struct MdConfig {
    double eta = 0.0;    // policy step size
    double alpha = 0.0;  // divergence penalty
    int t_k = 1;         // inner iterations per macro step
    // When set, t_k is recomputed each macro step from the current multiplier
    // mass via inner_iterations_preset.
    bool adaptive_t_k = false;

    /// Requires eta*alpha <= 1-gamma when alpha > 0.
    void validate(double gamma) const;
};

/// Step/penalty settings from the convergence analysis:
/// alpha = 2 gamma^2 m eta_lambda / (1-gamma)^3, eta = (1-gamma)/alpha.
MdConfig theory_md_config(double gamma, int m, double eta_lambda, int t_k);

/// Inner-iteration preset t_k = ceil(log(3 C_k K)/(eta*alpha)) with
/// C_k = 2 gamma ((1+|lambda|_1)/(1-gamma) + m eta_lambda/(1-gamma)^2).
int inner_iterations_preset(const MdConfig& md, double gamma, int m, double eta_lambda,
                            int total_macro_iters, double lambda_l1);

/// Augmented cost c~(s,a) = c_0 + sum_j (lambda_j + eta_lambda Vhat^j) c_j.
CostTable augmented_cost(const RcmdpSpec& spec, const DualState& dual);

/// Bound F_lambda = 1 + sum_j lambda_j + eta_lambda m/(1-gamma) on |c~|.
double augmented_cost_bound(const RcmdpSpec& spec, const DualState& dual);

/**
 * Exact regularized values: V~(s) solves the Bellman identity of the cost
 * c~(s,a) + alpha*log(pi(a|s)/anchor(a|s)), folded per state into a linear
 * solve. Requires a strictly positive anchor (softmax policies always are).
 */
Vector regularized_v(const SoftmaxPolicy& policy, const SoftmaxPolicy& anchor,
                     const TransitionKernel& kernel, const CostTable& c_tilde, double alpha,
                     const RcmdpSpec& spec);

/// Q~(s,a) = c~(s,a) + alpha*log(1/anchor(a|s)) + gamma E_{s'}[V~(s')].
Matrix regularized_q(const SoftmaxPolicy& policy, const SoftmaxPolicy& anchor,
                     const TransitionKernel& kernel, const CostTable& c_tilde, double alpha,
                     const RcmdpSpec& spec);

/**
 * Closed-form mirror descent step for softmax policies:
 *   pi'(a|s) ∝ pi(a|s)^{1 - eta*alpha/(1-gamma)} exp(-eta*q(s,a)/(1-gamma)),
 * computed in log space with per-state recentring.
 */
SoftmaxPolicy md_update(const SoftmaxPolicy& policy, const Matrix& q_hat, double eta,
                        double alpha, double gamma);

/// Occupancy-weighted divergence sum_s d(s) KL(pi_a(.|s) || pi_b(.|s)).
double pseudo_kl(const SoftmaxPolicy& policy_a, const SoftmaxPolicy& policy_b,
                 const OccupancyPair& occupancy_of_a);

/// How the inner loop obtains its Q estimates.
struct QEstimatorConfig {
    enum class Kind { Exact, Sampled } kind = Kind::Exact;
    int m_q = 0, n_q = 0;
    std::uint64_t seed = 0;
    std::uint64_t macro_k = 0;
    BudgetLedger* ledger = nullptr;
};

/**
 * Runs t_k mirror descent iterations from the anchor against a fixed kernel
 * and fixed augmented multipliers; returns the final iterate.
 */
SoftmaxPolicy policy_inner_loop(const SoftmaxPolicy& anchor, const TransitionKernel& kernel,
                                const DualState& dual, const MdConfig& md,
                                const QEstimatorConfig& estimator, const RcmdpSpec& spec);

}  // namespace rcmdp
