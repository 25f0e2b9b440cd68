#include "rcmdp/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace rcmdp {

DualState make_dual(double eta_lambda, const Vector& vhat0, std::optional<double> lambda_max) {
    if (eta_lambda <= 0.0) throw std::invalid_argument("make_dual: eta_lambda must be positive");
    DualState dual;
    dual.eta_lambda = eta_lambda;
    dual.lambda = (-eta_lambda * vhat0.array()).max(0.0);
    dual.last_vhat = vhat0;
    dual.lambda_max = lambda_max;
    if (lambda_max) dual.lambda = dual.lambda.cwiseMin(*lambda_max);
    return dual;
}

DualState dual_update(const DualState& dual, const Vector& vhat) {
    DualState next = dual;
    next.last_vhat = vhat;
    if (dual.lambda_max) {
        next.lambda = (dual.lambda + dual.eta_lambda * vhat)
                          .cwiseMax(0.0)
                          .cwiseMin(*dual.lambda_max);
    } else {
        next.lambda =
            (dual.lambda + dual.eta_lambda * vhat).cwiseMax(-dual.eta_lambda * vhat);
    }
    return next;
}

void MdConfig::validate(double gamma) const {
    if (eta <= 0.0) throw std::invalid_argument("MdConfig: eta must be positive");
    if (alpha < 0.0) throw std::invalid_argument("MdConfig: alpha must be nonnegative");
    if (t_k < 0) throw std::invalid_argument("MdConfig: t_k must be nonnegative");
    if (alpha > 0.0 && eta * alpha > (1.0 - gamma) + 1e-12)
        throw std::invalid_argument("MdConfig: requires eta <= (1-gamma)/alpha");
}

MdConfig theory_md_config(double gamma, int m, double eta_lambda, int t_k) {
    MdConfig md;
    const double om = 1.0 - gamma;
    md.alpha = 2.0 * gamma * gamma * m * eta_lambda / (om * om * om);
    md.eta = om / md.alpha;
    md.t_k = t_k;
    return md;
}

int inner_iterations_preset(const MdConfig& md, double gamma, int m, double eta_lambda,
                            int total_macro_iters, double lambda_l1) {
    const double om = 1.0 - gamma;
    const double c_k = 2.0 * gamma * ((1.0 + lambda_l1) / om + m * eta_lambda / (om * om));
    const double t = std::log(3.0 * c_k * std::max(1, total_macro_iters)) / (md.eta * md.alpha);
    return std::max(1, static_cast<int>(std::ceil(t)));
}

CostTable augmented_cost(const RcmdpSpec& spec, const DualState& dual) {
    if (dual.lambda.size() != spec.m || dual.last_vhat.size() != spec.m)
        throw std::invalid_argument("augmented_cost: dual state dimension mismatch");
    return lagrangian_cost(spec, dual.augmented());
}

double augmented_cost_bound(const RcmdpSpec& spec, const DualState& dual) {
    return 1.0 + dual.lambda.sum() + dual.eta_lambda * spec.m / (1.0 - spec.gamma);
}

Vector regularized_v(const SoftmaxPolicy& policy, const SoftmaxPolicy& anchor,
                     const TransitionKernel& kernel, const CostTable& c_tilde, double alpha,
                     const RcmdpSpec& spec) {
    const int S = spec.n_states;
    const Matrix pi = policy.probs();
    const Matrix log_ratio = policy.log_probs() - anchor.log_probs();
    const Matrix c_sa = c_tilde.expected_sa(kernel);

    Vector c_pi(S);
    for (int s = 0; s < S; ++s)
        c_pi(s) = pi.row(s).dot(c_sa.row(s)) + alpha * pi.row(s).dot(log_ratio.row(s));

    const Matrix lhs = Matrix::Identity(S, S) - spec.gamma * policy_kernel(policy, kernel);
    return lhs.partialPivLu().solve(c_pi);
}

Matrix regularized_q(const SoftmaxPolicy& policy, const SoftmaxPolicy& anchor,
                     const TransitionKernel& kernel, const CostTable& c_tilde, double alpha,
                     const RcmdpSpec& spec) {
    const int S = spec.n_states, A = spec.n_actions;
    const Vector v = regularized_v(policy, anchor, kernel, c_tilde, alpha, spec);
    const Matrix c_sa = c_tilde.expected_sa(kernel);
    const Matrix log_anchor = anchor.log_probs();

    Matrix q(S, A);
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a)
            q(s, a) = c_sa(s, a) - alpha * log_anchor(s, a) + spec.gamma * kernel.row(s, a).dot(v);
    return q;
}

SoftmaxPolicy md_update(const SoftmaxPolicy& policy, const Matrix& q_hat, double eta,
                        double alpha, double gamma) {
    if (!q_hat.allFinite()) throw std::invalid_argument("md_update: q_hat contains NaN/inf");
    const double om = 1.0 - gamma;
    const double keep = 1.0 - eta * alpha / om;
    if (keep < -1e-12) throw std::invalid_argument("md_update: requires eta*alpha/(1-gamma) <= 1");

    SoftmaxPolicy next(keep * policy.log_probs() - (eta / om) * q_hat);
    next.recenter();
    return next;
}

double pseudo_kl(const SoftmaxPolicy& policy_a, const SoftmaxPolicy& policy_b,
                 const OccupancyPair& occupancy_of_a) {
    const Matrix pa = policy_a.probs();
    const Matrix diff = policy_a.log_probs() - policy_b.log_probs();
    double total = 0.0;
    for (int s = 0; s < pa.rows(); ++s)
        total += occupancy_of_a.d_state(s) * pa.row(s).dot(diff.row(s));
    return total;
}

SoftmaxPolicy policy_inner_loop(const SoftmaxPolicy& anchor, const TransitionKernel& kernel,
                                const DualState& dual, const MdConfig& md,
                                const QEstimatorConfig& estimator, const RcmdpSpec& spec) {
    md.validate(spec.gamma);
    const CostTable c_tilde = augmented_cost(spec, dual);
    SoftmaxPolicy policy = anchor;
    for (int t = 0; t < md.t_k; ++t) {
        Matrix q_hat;
        if (estimator.kind == QEstimatorConfig::Kind::Exact) {
            q_hat = regularized_q(policy, anchor, kernel, c_tilde, md.alpha, spec);
        } else {
            q_hat = estimate_q_reg(policy, anchor, kernel, c_tilde, md.alpha, spec,
                                   estimator.m_q, estimator.n_q, estimator.seed,
                                   estimator.macro_k, static_cast<std::uint64_t>(t),
                                   estimator.ledger);
        }
        policy = md_update(policy, q_hat, md.eta, md.alpha, spec.gamma);
    }
    return policy;
}

}  // namespace rcmdp
