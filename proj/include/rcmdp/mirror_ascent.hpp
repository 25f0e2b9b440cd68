#pragma once

#include <cstdint>
#include <vector>

#include "rcmdp/model.hpp"
#include "rcmdp/sampling.hpp"
#include "rcmdp/uncertainty.hpp"

namespace rcmdp {

/**
 * Mirror ascent settings for the adversarial kernel. The geometric schedule
 * grows eta_p(t) = eta_p(t-1)/gamma; with the squared-Euclidean divergence the
 * step then approaches the linear-maximization (policy iteration) limit.
 */
struct MirrorAscentConfig {
    double eta_p0 = 1.0;
    double alpha_p = 1.0;
    enum class Schedule { Fixed, Geometric } schedule = Schedule::Geometric;
    int t_prime = 1;

    enum class GEstimator { Exact, MonteCarlo } estimator = GEstimator::Exact;
    int m_g = 0, n_g = 0;

    void validate(double gamma) const;
    double step_at(int t, double gamma) const;
};

struct CpiConfig {
    double eps_prime = 1e-3;  // Frank-Wolfe gap tolerance
    int max_iters = 10000;    // safety cap
};

/**
 * Gradient of the Lagrangian value in the transition kernel under direct
 * parametrization:
 *   grad(s,a,s') = 1/(1-gamma) d(s) pi(a|s) G(s,a,s'),
 * with G evaluated on the combined cost c_0 + sum_j lambda_j c_j.
 */
Matrix transition_gradient(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                           const Vector& lambda, const RcmdpSpec& spec);

/// Same gradient for an arbitrary cost table.
Matrix value_gradient(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                      const CostTable& cost, const RcmdpSpec& spec);

/**
 * One ascent step: per (s,a) row,
 *   p'(.|s,a) = Proj[ p(.|s,a) + (eta_p/alpha_p)/(1-gamma) d(s,a) Ghat(s,a,.) ],
 * the squared-Euclidean mirror step onto the uncertainty set.
 */
TransitionKernel mirror_ascent_step(const TransitionKernel& kernel, const Matrix& g_hat,
                                    const OccupancyPair& occ, double eta_p, double alpha_p,
                                    const UncertaintySet& set, double gamma);

/// MC estimate of the action next-state values: Ghat(s,a,s') = c(s,a,s') plus
/// the mean discounted tail of m_g conditioned rollouts of horizon n_g.
Matrix estimate_g_values(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                         const CostTable& cost, int m_g, int n_g, const RcmdpSpec& spec,
                         std::uint64_t seed, std::uint64_t macro_k, std::uint64_t iter_t,
                         BudgetLedger* ledger = nullptr);

struct AscentResult {
    TransitionKernel kernel;
    std::uint64_t samples_used = 0;
    std::vector<double> values;  // V(rho) on the given cost after each step
};

/**
 * Adversarial inner loop: t' iterations of {estimate or compute G on the
 * current kernel; mirror ascent step}, maximizing the value of `cost` over
 * the set. Starts from `start` (the warm-start kernel).
 */
AscentResult worst_case_mirror_ascent(const SoftmaxPolicy& policy, const CostTable& cost,
                                      const UncertaintySet& set, const MirrorAscentConfig& cfg,
                                      const RcmdpSpec& spec, std::uint64_t seed,
                                      const TransitionKernel& start,
                                      std::uint64_t macro_k = 0,
                                      BudgetLedger* ledger = nullptr);

struct CpiResult {
    TransitionKernel kernel;
    double final_gap = 0.0;
    int iters = 0;
    bool converged = false;
    std::vector<double> gaps;  // Frank-Wolfe gap per iteration
};

/// Mixing weight beta = gap (1-gamma)^3 / (4 gamma^2), capped at 1.
double cpi_mixing_beta(double gap, double gamma);

/**
 * Frank-Wolfe style maximization over a non-rectangular set: repeatedly find
 * an eps'-optimal point of the linearized objective, stop once the gap
 * <grad, p_lmo - p> drops to eps', else mix with beta = gap (1-gamma)^3/(4 gamma^2).
 */
CpiResult conservative_policy_iteration(const SoftmaxPolicy& policy, const CostTable& cost,
                                        const NonRectSet& set, const CpiConfig& cfg,
                                        const RcmdpSpec& spec, const TransitionKernel& start);

}  // namespace rcmdp
