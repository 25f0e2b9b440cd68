#include "rcmdp/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace rcmdp {

Trajectory sample_trajectory(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                             const StartCondition& start, int horizon, const RcmdpSpec& spec,
                             RngStream& rng) {
    if (horizon < 1) throw std::invalid_argument("sample_trajectory: horizon must be >= 1");
    const int A = spec.n_actions;
    const Matrix pi = policy.probs();

    Trajectory traj;
    traj.states.reserve(horizon + 1);
    traj.actions.reserve(horizon);
    traj.step_costs.resize(1 + spec.m, horizon);

    int s;
    switch (start.kind) {
        case StartCondition::Kind::FromRho: s = rng.categorical(spec.rho); break;
        case StartCondition::Kind::FromState: s = start.s; break;
        case StartCondition::Kind::FromTriple: s = start.s; break;
    }
    traj.states.push_back(s);

    for (int l = 0; l < horizon; ++l) {
        int a, s2;
        if (l == 0 && start.kind == StartCondition::Kind::FromTriple) {
            a = start.a;
            s2 = start.s2;
        } else {
            a = rng.categorical(pi.row(s).transpose());
            s2 = rng.categorical(kernel.row(s, a).transpose());
        }
        traj.actions.push_back(a);
        traj.step_costs(0, l) = spec.cost0.entry(s, a, s2, A);
        for (int j = 0; j < spec.m; ++j)
            traj.step_costs(1 + j, l) = spec.costs[j].entry(s, a, s2, A);
        traj.states.push_back(s2);
        s = s2;
    }
    return traj;
}

Vector estimate_v(const SoftmaxPolicy& policy, const TransitionKernel& kernel,
                  const RcmdpSpec& spec, int m_v, int n_v, std::uint64_t seed,
                  std::uint64_t macro_k, BudgetLedger* ledger) {
    if (m_v < 1 || n_v < 1) throw std::invalid_argument("estimate_v: m_v, n_v must be >= 1");
    Vector acc = Vector::Zero(1 + spec.m);
    for (int rep = 0; rep < m_v; ++rep) {
        RngStream rng = make_stream(seed, StreamPurpose::ValueEstimate, macro_k, 0, rep);
        const Trajectory traj =
            sample_trajectory(policy, kernel, StartCondition::from_rho(), n_v, spec, rng);
        double disc = 1.0;
        for (int l = 0; l < n_v; ++l, disc *= spec.gamma) acc += disc * traj.step_costs.col(l);
    }
    if (ledger) ledger->v_queries += static_cast<std::uint64_t>(m_v) * n_v;
    return acc / m_v;
}

Matrix estimate_q_reg(const SoftmaxPolicy& policy, const SoftmaxPolicy& anchor,
                      const TransitionKernel& kernel, const CostTable& c_tilde, double alpha,
                      const RcmdpSpec& spec, int m_q, int n_q, std::uint64_t seed,
                      std::uint64_t macro_k, std::uint64_t inner_t, BudgetLedger* ledger) {
    if (m_q < 1 || n_q < 1) throw std::invalid_argument("estimate_q_reg: m_q, n_q must be >= 1");
    const int S = spec.n_states, A = spec.n_actions;
    const Matrix pi = policy.probs();
    const Matrix log_pi = policy.log_probs();
    const Matrix log_anchor = anchor.log_probs();

    // Per-state KL(pi||anchor), reused at every visited state of every rollout.
    Vector kl = Vector::Zero(S);
    for (int s = 0; s < S; ++s)
        kl(s) = (pi.row(s).array() * (log_pi.row(s) - log_anchor.row(s)).array()).sum();

    const Matrix c_sa = c_tilde.expected_sa(kernel);
    Matrix q(S, A);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            double tail = 0.0;
            for (int rep = 0; rep < m_q; ++rep) {
                const std::uint64_t rep_key =
                    static_cast<std::uint64_t>(sa_index(s, a, A)) * m_q + rep;
                RngStream rng =
                    make_stream(seed, StreamPurpose::QEstimate, macro_k, inner_t, rep_key);
                // conditioned rollout: a_0 = a, then follow the current policy
                const int s1 = rng.categorical(kernel.row(s, a).transpose());
                if (n_q == 1) continue;
                const Trajectory traj = sample_trajectory(
                    policy, kernel, StartCondition::from_state(s1), n_q - 1, spec, rng);
                double disc = spec.gamma;
                int state = s1;
                for (int l = 1; l < n_q; ++l, disc *= spec.gamma) {
                    const int al = traj.actions[l - 1];
                    const int next = traj.states[l];
                    tail += disc * (c_tilde.entry(state, al, next, A) + alpha * kl(state));
                    state = next;
                }
            }
            q(s, a) = c_sa(s, a) - alpha * log_anchor(s, a) + tail / m_q;
        }
    }
    if (ledger)
        ledger->q_queries += static_cast<std::uint64_t>(S) * A * m_q * n_q;
    return q;
}

int v_horizon(double gamma, double eps) {
    return static_cast<int>(std::ceil(std::log(2.0 / ((1.0 - gamma) * eps)) / std::log(1.0 / gamma)));
}

int v_trajectories(double gamma, double eps, double delta) {
    const double denom = (1.0 - gamma) * (1.0 - gamma) * eps * eps;
    return static_cast<int>(std::ceil(2.0 / denom * std::log(2.0 / delta)));
}

int q_horizon(double gamma, double lambda_l1, double eps) {
    const double scale = std::max(1.0, lambda_l1);
    return static_cast<int>(
        std::ceil(std::log(2.0 * scale / ((1.0 - gamma) * eps)) / std::log(1.0 / gamma)));
}

int q_trajectories(double gamma, double lambda_l1, double eps, double delta, int t_k) {
    const double scale = std::max(1.0, lambda_l1) + eps * t_k;
    const double denom = (1.0 - gamma) * (1.0 - gamma) * eps * eps;
    return static_cast<int>(std::ceil(2.0 * scale * scale / denom * std::log(2.0 / delta)));
}

int g_horizon(double gamma, double mismatch, double cost_bound, double eps_prime) {
    const double arg = 16.0 * mismatch * cost_bound / ((1.0 - gamma) * (1.0 - gamma) * eps_prime);
    return static_cast<int>(std::ceil(std::log(arg) / std::log(1.0 / gamma)));
}

int g_trajectories(double gamma, int n_g, int n_states, int n_actions, int t_prime,
                   double delta) {
    const double lead = 2.0 * std::pow(gamma, -2.0 * n_g) / ((1.0 - gamma) * (1.0 - gamma));
    const double log_arg =
        2.0 * static_cast<double>(n_states) * n_states * n_actions * t_prime / delta;
    return static_cast<int>(std::ceil(lead * std::log(log_arg)));
}

}  // namespace rcmdp
