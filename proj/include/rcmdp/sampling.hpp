#pragma once

#include <cstdint>
#include <vector>

#include "rcmdp/model.hpp"
#include "rcmdp/rng.hpp"

namespace rcmdp {

/// One rollout: states s_0..s_H, actions a_0..a_{H-1}, and the (1+m) cost
/// signals observed at each step l (evaluated at (s_l, a_l, s_{l+1})).
struct Trajectory {
    std::vector<int> states;
    std::vector<int> actions;
    Matrix step_costs;  // (1+m) x horizon
};

/// Running count of generative-model queries, one per sampled transition
/// step charged at the configured (M, N) granularity, split by estimator.
struct BudgetLedger {
    std::uint64_t v_queries = 0;
    std::uint64_t q_queries = 0;
    std::uint64_t g_queries = 0;

    std::uint64_t total() const { return v_queries + q_queries + g_queries; }
};

/// Rollout start: from the start distribution, a fixed state, or a fixed
/// (s, a, s') triple for action next-state estimation.
struct StartCondition {
    enum class Kind { FromRho, FromState, FromTriple } kind = Kind::FromRho;
    int s = -1, a = -1, s2 = -1;

    static StartCondition from_rho() { return {}; }
    static StartCondition from_state(int s) { return {Kind::FromState, s, -1, -1}; }
    static StartCondition from_triple(int s, int a, int s2) { return {Kind::FromTriple, s, a, s2}; }
};

/**
 * Simulates `horizon` steps under (policy, kernel). Deterministic given the
 * stream; actions and next states are drawn by CDF scan so two runs with the
 * same stream key agree bit for bit.
 */
Trajectory sample_trajectory(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                             const StartCondition& start, int horizon, const RcmdpSpec& spec,
                             RngStream& rng);

/**
 * Monte-Carlo estimates of all 1+m values at rho: each entry is the mean of
 * m_v truncated returns sum_{l<n_v} gamma^l c_i(s_l,a_l,s_{l+1}) over rollouts
 * started from rho. Charges m_v * n_v queries to the ledger.
 */
Vector estimate_v(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                  const RcmdpSpec& spec, int m_v, int n_v, std::uint64_t seed,
                  std::uint64_t macro_k, BudgetLedger* ledger = nullptr);

/**
 * Monte-Carlo estimate of the regularized state-action values:
 *   Qhat(s,a) = c(s,a) + alpha*log(1/pi_anchor(a|s))
 *             + mean_j sum_{l=1}^{n_q-1} gamma^l [ c(s_l,a_l)
 *             + alpha * KL(pi(.|s_l) || pi_anchor(.|s_l)) ],
 * with the per-state KL taken in expectation rather than at the realized
 * action. Charges S*A*m_q*n_q queries to the ledger.
 */
Matrix estimate_q_reg(const SoftmaxPolicy& policy, const SoftmaxPolicy& anchor,
                      const TransitionKernel& kernel, const CostTable& c_tilde, double alpha,
                      const RcmdpSpec& spec, int m_q, int n_q, std::uint64_t seed,
                      std::uint64_t macro_k, std::uint64_t inner_t,
                      BudgetLedger* ledger = nullptr);

// Truncation horizons and trajectory counts matching the concentration
// arguments, with the explicit factor-2 constants from the derivations.

/// Smallest N with 2*gamma^N/(1-gamma) <= eps.
int v_horizon(double gamma, double eps);

/// Hoeffding count for |Vhat - E| <= eps with probability 1-delta, range 1/(1-gamma).
int v_trajectories(double gamma, double eps, double delta);

/// Horizon for the regularized Q estimate at multiplier mass lambda_l1.
int q_horizon(double gamma, double lambda_l1, double eps);

/// Trajectory count for the regularized Q estimate (range grows with lambda and t_k).
int q_trajectories(double gamma, double lambda_l1, double eps, double delta, int t_k);

/// Horizon H with 16*M*C*gamma^H/(1-gamma)^2 <= eps'.
int g_horizon(double gamma, double mismatch, double cost_bound, double eps_prime);

/// Trajectory count 2*gamma^{-2N}/(1-gamma)^2 * log(2 S^2 A t' / delta).
int g_trajectories(double gamma, int n_g, int n_states, int n_actions, int t_prime,
                   double delta);

}  // namespace rcmdp
