#include "rcmdp/mirror_ascent.hpp"

#include <cmath>
#include <stdexcept>

namespace rcmdp {

void MirrorAscentConfig::validate(double gamma) const {
    if (t_prime < 1) throw std::invalid_argument("MirrorAscentConfig: t_prime must be >= 1");
    if (eta_p0 <= 0.0 || alpha_p <= 0.0)
        throw std::invalid_argument("MirrorAscentConfig: eta_p0, alpha_p must be positive");
    if (schedule == Schedule::Geometric && (gamma <= 0.0 || gamma >= 1.0))
        throw std::invalid_argument("MirrorAscentConfig: geometric schedule needs gamma in (0,1)");
    if (estimator == GEstimator::MonteCarlo && (m_g < 1 || n_g < 1))
        throw std::invalid_argument("MirrorAscentConfig: Monte Carlo estimator needs m_g, n_g >= 1");
}

double MirrorAscentConfig::step_at(int t, double gamma) const {
    return schedule == Schedule::Fixed ? eta_p0 : eta_p0 * std::pow(gamma, -t);
}

Matrix value_gradient(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                      const CostTable& cost, const RcmdpSpec& spec) {
    const int S = spec.n_states, A = spec.n_actions;
    const OccupancyPair occ = occupancy(policy, kernel, spec);
    const Matrix g = g_values(policy, kernel, cost, spec);
    const Matrix pi = policy.probs();
    Matrix grad(S * A, S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const int r = sa_index(s, a, A);
            grad.row(r) = (occ.d_state(s) * pi(s, a) / (1.0 - spec.gamma)) * g.row(r);
        }
    return grad;
}

Matrix transition_gradient(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                           const Vector& lambda, const RcmdpSpec& spec) {
    return value_gradient(policy, kernel, lagrangian_cost(spec, lambda), spec);
}

TransitionKernel mirror_ascent_step(const TransitionKernel& kernel, const Matrix& g_hat,
                                    const OccupancyPair& occ, double eta_p, double alpha_p,
                                    const UncertaintySet& set, double gamma) {
    if (!g_hat.allFinite()) throw std::invalid_argument("mirror_ascent_step: g_hat must be finite");
    const int S = kernel.n_states, A = kernel.n_actions;
    const double scale = std::min(eta_p / (alpha_p * (1.0 - gamma)), 1e200);
    // Every row set lives in the fixed-sum plane, so subtracting a per-row
    // constant from the step never changes the projection; centring keeps the
    // clip arithmetic well conditioned. Capping the centred magnitude is then
    // harmless: the projection saturates once the step dwarfs the set diameter.
    // Rectangular rows cap independently, the non-rectangular step caps as a
    // whole to preserve its direction.
    constexpr double kStepCap = 1e5;
    const bool rect = std::holds_alternative<RectSet>(set);

    Matrix step(S * A, S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const int r = sa_index(s, a, A);
            step.row(r) = (scale * occ.d_state_action(s, a)) *
                          (g_hat.row(r).array() - g_hat.row(r).minCoeff());
            if (rect) {
                const double m = step.row(r).maxCoeff();
                if (m > kStepCap) step.row(r) *= kStepCap / m;
            }
        }
    if (!rect) {
        const double m = step.maxCoeff();
        if (m > kStepCap) step *= kStepCap / m;
    }
    TransitionKernel candidate = kernel;
    candidate.p += step;
    return project(candidate, set);
}

Matrix estimate_g_values(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                         const CostTable& cost, int m_g, int n_g, const RcmdpSpec& spec,
                         std::uint64_t seed, std::uint64_t macro_k, std::uint64_t iter_t,
                         BudgetLedger* ledger) {
    if (m_g < 1 || n_g < 1) throw std::invalid_argument("estimate_g_values: m_g, n_g must be >= 1");
    const int S = spec.n_states, A = spec.n_actions;
    const Matrix pi = policy.probs();

    Matrix g(S * A, S);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            for (int s2 = 0; s2 < S; ++s2) {
                const int r = sa_index(s, a, A);
                // The l=0 term is pinned by the conditioning; only the tail is sampled.
                double tail = 0.0;
                for (int rep = 0; rep < m_g; ++rep) {
                    const std::uint64_t rep_key =
                        (static_cast<std::uint64_t>(r) * S + s2) * m_g + rep;
                    RngStream rng =
                        make_stream(seed, StreamPurpose::GEstimate, macro_k, iter_t, rep_key);
                    if (n_g == 1) continue;
                    const Trajectory traj = sample_trajectory(
                        policy, kernel, StartCondition::from_state(s2), n_g - 1, spec, rng);
                    double disc = spec.gamma;
                    for (int l = 0; l < n_g - 1; ++l, disc *= spec.gamma) {
                        const int sl = traj.states[l];
                        const int al = traj.actions[l];
                        const int next = traj.states[l + 1];
                        tail += disc * cost.entry(sl, al, next, A);
                    }
                }
                g(r, s2) = cost.entry(s, a, s2, A) + tail / m_g;
            }
    if (ledger)
        ledger->g_queries += static_cast<std::uint64_t>(S) * S * A * m_g * n_g;
    return g;
}

AscentResult worst_case_mirror_ascent(const SoftmaxPolicy& policy, const CostTable& cost,
                                      const UncertaintySet& set, const MirrorAscentConfig& cfg,
                                      const RcmdpSpec& spec, std::uint64_t seed,
                                      const TransitionKernel& start, std::uint64_t macro_k,
                                      BudgetLedger* ledger) {
    cfg.validate(spec.gamma);
    AscentResult out;
    out.kernel = start;
    out.values.reserve(cfg.t_prime + 1);
    out.values.push_back(value(policy, out.kernel, cost, spec).v_rho);

    BudgetLedger local;
    BudgetLedger* led = ledger ? ledger : &local;
    const std::uint64_t before = led->g_queries;

    for (int t = 0; t < cfg.t_prime; ++t) {
        Matrix g_hat;
        if (cfg.estimator == MirrorAscentConfig::GEstimator::Exact) {
            g_hat = g_values(policy, out.kernel, cost, spec);
        } else {
            g_hat = estimate_g_values(policy, out.kernel, cost, cfg.m_g, cfg.n_g, spec, seed,
                                      macro_k, static_cast<std::uint64_t>(t), led);
        }
        const OccupancyPair occ = occupancy(policy, out.kernel, spec);
        out.kernel = mirror_ascent_step(out.kernel, g_hat, occ, cfg.step_at(t, spec.gamma),
                                        cfg.alpha_p, set, spec.gamma);
        out.values.push_back(value(policy, out.kernel, cost, spec).v_rho);
    }
    out.samples_used = led->g_queries - before;
    return out;
}

double cpi_mixing_beta(double gap, double gamma) {
    return std::min(1.0, gap * std::pow(1.0 - gamma, 3) / (4.0 * gamma * gamma));
}

CpiResult conservative_policy_iteration(const SoftmaxPolicy& policy, const CostTable& cost,
                                        const NonRectSet& set, const CpiConfig& cfg,
                                        const RcmdpSpec& spec, const TransitionKernel& start) {
    if (cfg.eps_prime <= 0.0)
        throw std::invalid_argument("conservative_policy_iteration: eps_prime must be positive");

    CpiResult out;
    out.kernel = start;
    for (int t = 0; t < cfg.max_iters; ++t) {
        const Matrix grad = value_gradient(policy, out.kernel, cost, spec);
        const TransitionKernel lmo = linear_maximize(grad, set, cfg.eps_prime * 1e-3);
        const double gap = ((lmo.p - out.kernel.p).array() * grad.array()).sum();
        out.gaps.push_back(gap);
        out.iters = t;
        if (gap <= cfg.eps_prime) {
            out.final_gap = gap;
            out.converged = true;
            return out;
        }
        const double beta = cpi_mixing_beta(gap, spec.gamma);
        out.kernel.p = (1.0 - beta) * out.kernel.p + beta * lmo.p;
        out.final_gap = gap;
    }
    out.converged = false;
    return out;
}

}  // namespace rcmdp
