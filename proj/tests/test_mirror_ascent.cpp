#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rcmdp/instances.hpp"
#include "rcmdp/mirror_ascent.hpp"
#include "rcmdp/rng.hpp"

using namespace rcmdp;

TEST_CASE("transition_gradient: constant cost gives occupancy-proportional rows") {
    TabularInstance inst = random_instance(4, 2, 0, 0.8, 61);
    inst.spec.cost0 = CostTable::from_sa(Matrix::Constant(4, 2, 0.5));
    const SoftmaxPolicy policy = random_policy(4, 2, 1);
    const Matrix grad = transition_gradient(policy, inst.nominal, Vector(0), inst.spec);

    // with constant cost every state value is equal, so each gradient row is
    // constant in s' and scales with d(s) pi(a|s)
    const OccupancyPair occ = occupancy(policy, inst.nominal, inst.spec);
    const Matrix pi = policy.probs();
    const double g_const = 0.5 / (1.0 - 0.8);  // c + gamma V = c/(1-gamma)
    for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 2; ++a) {
            const auto row = grad.row(sa_index(s, a, 2));
            CHECK(row.maxCoeff() - row.minCoeff() <= 1e-12);
            CHECK(row(0) == doctest::Approx(occ.d_state(s) * pi(s, a) * g_const / 0.2)
                                .epsilon(1e-10));
        }
}

TEST_CASE("transition_gradient matches central finite differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        TabularInstance inst = random_instance(4, 2, 1, 0.85, 200 + seed);
        const SoftmaxPolicy policy = random_policy(4, 2, seed);
        Vector lambda(1);
        lambda << 0.6;
        const Matrix grad = transition_gradient(policy, inst.nominal, lambda, inst.spec);

        const TransitionKernel other = random_kernel(4, 2, 900 + seed);
        const Matrix dir = other.p - inst.nominal.p;  // feasible direction, rows sum to zero
        const double h = 1e-6;
        TransitionKernel plus = inst.nominal, minus = inst.nominal;
        plus.p += h * dir;
        minus.p -= h * dir;
        const double fd = (lagrangian_value(policy, plus, lambda, inst.spec) -
                           lagrangian_value(policy, minus, lambda, inst.spec)) /
                          (2.0 * h);
        const double analytic = (grad.array() * dir.array()).sum();
        CHECK(std::abs(fd - analytic) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("transition_gradient on a hand-solvable two-state instance") {
    // single action, kernel rows (1-q, q) and (r, 1-r), state costs c0, c1
    const double gamma = 0.5, q = 0.3, r = 0.2, c0 = 0.4, c1 = -0.6;
    RcmdpSpec spec;
    spec.n_states = 2;
    spec.n_actions = 1;
    spec.m = 0;
    spec.gamma = gamma;
    spec.rho = Vector(2);
    spec.rho << 0.7, 0.3;
    Matrix c(2, 1);
    c << c0, c1;
    spec.cost0 = CostTable::from_sa(c);
    TransitionKernel kernel(2, 1);
    kernel.p << 1.0 - q, q,
                r, 1.0 - r;

    // hand inverse of (I - gamma P) via the 2x2 adjugate
    const double a11 = 1.0 - gamma * (1.0 - q), a12 = -gamma * q;
    const double a21 = -gamma * r, a22 = 1.0 - gamma * (1.0 - r);
    const double det = a11 * a22 - a12 * a21;
    const double v0 = (a22 * c0 - a12 * c1) / det;
    const double v1 = (-a21 * c0 + a11 * c1) / det;

    // occupancy from the transposed system, same determinant trick
    const double b11 = 1.0 - gamma * (1.0 - q), b12 = -gamma * r;
    const double b21 = -gamma * q, b22 = 1.0 - gamma * (1.0 - r);
    const double detb = b11 * b22 - b12 * b21;
    const double rhs0 = (1.0 - gamma) * spec.rho(0), rhs1 = (1.0 - gamma) * spec.rho(1);
    const double d0 = (b22 * rhs0 - b12 * rhs1) / detb;
    const double d1 = (-b21 * rhs0 + b11 * rhs1) / detb;

    const Matrix grad = transition_gradient(SoftmaxPolicy::uniform(2, 1), kernel, Vector(0), spec);
    CHECK(grad(0, 0) == doctest::Approx(d0 * (c0 + gamma * v0) / (1.0 - gamma)).epsilon(1e-10));
    CHECK(grad(0, 1) == doctest::Approx(d0 * (c0 + gamma * v1) / (1.0 - gamma)).epsilon(1e-10));
    CHECK(grad(1, 0) == doctest::Approx(d1 * (c1 + gamma * v0) / (1.0 - gamma)).epsilon(1e-10));
    CHECK(grad(1, 1) == doctest::Approx(d1 * (c1 + gamma * v1) / (1.0 - gamma)).epsilon(1e-10));
}

TEST_CASE("mirror_ascent_step: zero G leaves the kernel unchanged") {
    TabularInstance inst = random_instance(3, 2, 0, 0.9, 62);
    RectSet set(inst.nominal, Norm::Linf, 0.1);
    const SoftmaxPolicy policy = random_policy(3, 2, 2);
    const OccupancyPair occ = occupancy(policy, inst.nominal, inst.spec);
    const TransitionKernel next = mirror_ascent_step(inst.nominal, Matrix::Zero(6, 3), occ, 1.0,
                                                     1.0, set, 0.9);
    CHECK((next.p - inst.nominal.p).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("mirror_ascent_step: zero-radius set pins the kernel") {
    TabularInstance inst = random_instance(3, 2, 0, 0.9, 63);
    RectSet set(inst.nominal, Norm::Linf, 0.0);
    const SoftmaxPolicy policy = random_policy(3, 2, 3);
    const OccupancyPair occ = occupancy(policy, inst.nominal, inst.spec);
    const Matrix g = g_values(policy, inst.nominal, inst.spec.cost0, inst.spec);
    const TransitionKernel next =
        mirror_ascent_step(inst.nominal, g, occ, 5.0, 1.0, set, 0.9);
    CHECK((next.p - inst.nominal.p).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("mirror_ascent_step maximizes the penalized objective on a 2-outcome row") {
    TransitionKernel nominal(2, 1);
    nominal.p << 0.6, 0.4,
                 0.5, 0.5;
    RectSet set(nominal, Norm::Linf, 0.15);
    RcmdpSpec spec;
    spec.n_states = 2;
    spec.n_actions = 1;
    spec.m = 0;
    spec.gamma = 0.5;
    spec.rho = Vector::Constant(2, 0.5);
    spec.cost0 = CostTable::from_sa(Matrix::Zero(2, 1));

    Matrix g(2, 2);
    g << 0.2, 0.9,  // second successor is costlier, mass should move there
         0.0, 0.0;
    const SoftmaxPolicy policy = SoftmaxPolicy::uniform(2, 1);
    const OccupancyPair occ = occupancy(policy, nominal, spec);
    const double eta_p = 0.8, alpha_p = 1.0;
    const TransitionKernel next =
        mirror_ascent_step(nominal, g, occ, eta_p, alpha_p, set, spec.gamma);

    // grid oracle over the feasible first row of the penalized objective
    const double scale = eta_p * occ.d_state_action(0, 0) / (1.0 - spec.gamma);
    double best = -1e300, best_t = 0.0;
    for (int i = 0; i <= 300000; ++i) {
        const double t = 0.45 + 0.3 * i / 300000.0;  // |t - 0.6| <= 0.15
        Vector p(2);
        p << t, 1.0 - t;
        const Vector delta = p - nominal.p.row(0).transpose();
        const double obj = scale * g.row(0).dot(p) - 0.5 * alpha_p * delta.squaredNorm();
        if (obj > best) {
            best = obj;
            best_t = t;
        }
    }
    CHECK(std::abs(next.p(0, 0) - best_t) <= 2e-3);
    CHECK(next.p(0, 1) > nominal.p(0, 1));  // moved toward the costlier successor
}

TEST_CASE("exact ascent never decreases the adversarial value") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        TabularInstance inst = random_instance(4, 2, 0, 0.8, 300 + seed);
        RectSet set(inst.nominal, Norm::Linf, 0.08);
        const SoftmaxPolicy policy = random_policy(4, 2, seed);
        MirrorAscentConfig cfg;
        cfg.eta_p0 = 0.5;
        cfg.alpha_p = 1.0;
        cfg.schedule = MirrorAscentConfig::Schedule::Geometric;
        cfg.t_prime = 20;
        const AscentResult res = worst_case_mirror_ascent(policy, inst.spec.cost0, set, cfg,
                                                          inst.spec, 0, inst.nominal);
        for (size_t t = 1; t < res.values.size(); ++t)
            CHECK(res.values[t] >= res.values[t - 1] - 1e-10);
        CHECK(contains(res.kernel, set).ok);
    }
}

TEST_CASE("zero-radius set returns the nominal with no improvement") {
    TabularInstance inst = random_instance(3, 2, 0, 0.9, 64);
    RectSet set(inst.nominal, Norm::Linf, 0.0);
    MirrorAscentConfig cfg;
    cfg.t_prime = 5;
    const AscentResult res = worst_case_mirror_ascent(random_policy(3, 2, 4), inst.spec.cost0,
                                                      set, cfg, inst.spec, 0, inst.nominal);
    CHECK((res.kernel.p - inst.nominal.p).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(res.values.back() == doctest::Approx(res.values.front()).epsilon(1e-12));
}

TEST_CASE("noisy G bounds the per-step decrease") {
    TabularInstance inst = random_instance(4, 2, 0, 0.75, 65);
    RectSet set(inst.nominal, Norm::Linf, 0.1);
    const SoftmaxPolicy policy = random_policy(4, 2, 5);
    const double eps = 0.15;
    RngStream rng = make_stream(999, StreamPurpose::Oracle);

    TransitionKernel kernel = inst.nominal;
    for (int t = 0; t < 30; ++t) {
        Matrix g = g_values(policy, kernel, inst.spec.cost0, inst.spec);
        for (int r = 0; r < g.rows(); ++r)
            for (int c = 0; c < g.cols(); ++c)
                g(r, c) += eps * (rng.uniform01() < 0.5 ? -1.0 : 1.0);
        const OccupancyPair occ = occupancy(policy, kernel, inst.spec);
        const double before = value(policy, kernel, inst.spec.cost0, inst.spec).v_rho;
        kernel = mirror_ascent_step(kernel, g, occ, 2.0, 1.0, set, inst.spec.gamma);
        const double after = value(policy, kernel, inst.spec.cost0, inst.spec).v_rho;
        CHECK(before - after <= 2.0 * eps / (1.0 - inst.spec.gamma) + 1e-9);
    }
}

TEST_CASE("geometric schedule reaches the vertex-oracle optimum") {
    TabularInstance inst = random_instance(4, 2, 0, 0.8, 66);
    RectSet set(inst.nominal, Norm::Linf, 0.05);
    const SoftmaxPolicy policy = random_policy(4, 2, 6);
    MirrorAscentConfig cfg;
    cfg.eta_p0 = 1.0;
    cfg.alpha_p = 1.0;
    cfg.schedule = MirrorAscentConfig::Schedule::Geometric;
    cfg.t_prime = 200;
    const AscentResult res = worst_case_mirror_ascent(policy, inst.spec.cost0, set, cfg,
                                                      inst.spec, 0, inst.nominal);
    const double oracle = oracles::robust_vertex_value(policy, set, inst.spec.cost0, inst.spec);
    CHECK(res.values.back() >= oracle - 1e-4);
    CHECK(res.values.back() <= oracle + 1e-6);

    // regret of the running maximum decays below eps' within the analysis bound
    const double eps_prime = 1e-3;
    const double c_bound = inst.spec.cost0.max_abs();
    const double mismatch = 1.0 / inst.spec.rho.minCoeff();  // d(s) <= 1, rho > 0
    const double base = mismatch / (mismatch - 1.0);
    const int t_bound = static_cast<int>(std::ceil(
        std::log(6.0 * c_bound / (eps_prime * (1.0 - inst.spec.gamma))) / std::log(base)));
    REQUIRE(t_bound < cfg.t_prime);
    double running = -1e300;
    double prev_regret = 1e300;
    for (size_t t = 0; t < res.values.size(); ++t) {
        running = std::max(running, res.values[t]);
        const double regret = oracle - running;
        CHECK(regret <= prev_regret + 1e-12);
        prev_regret = regret;
    }
    double best_by_bound = *std::max_element(res.values.begin(),
                                             res.values.begin() + t_bound + 1);
    CHECK(oracle - best_by_bound <= eps_prime + 1e-4);
}

TEST_CASE("one huge step matches the linear maximization point") {
    TabularInstance inst = random_instance(3, 2, 0, 0.85, 67);
    RectSet set(inst.nominal, Norm::Linf, 0.07);
    const SoftmaxPolicy policy = random_policy(3, 2, 7);
    const Matrix g = g_values(policy, inst.nominal, inst.spec.cost0, inst.spec);
    const OccupancyPair occ = occupancy(policy, inst.nominal, inst.spec);

    const TransitionKernel big_step =
        mirror_ascent_step(inst.nominal, g, occ, 1e9, 1.0, set, inst.spec.gamma);
    const TransitionKernel lmo = linear_maximize(g, set);
    CHECK((big_step.p - lmo.p).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("estimate_g_values is exact on a deterministic instance") {
    RcmdpSpec spec;
    spec.n_states = 2;
    spec.n_actions = 1;
    spec.m = 0;
    spec.gamma = 0.5;
    spec.rho = Vector::Constant(2, 0.5);
    Matrix c(2, 1);
    c << 0.2, -0.5;
    spec.cost0 = CostTable::from_sa(c);
    TransitionKernel chain(2, 1);
    chain.p << 0.0, 1.0,
               0.0, 1.0;  // both states feed the absorbing state
    const SoftmaxPolicy policy = SoftmaxPolicy::uniform(2, 1);

    const Matrix g_exact = g_values(policy, chain, spec.cost0, spec);
    const Matrix g_hat = estimate_g_values(policy, chain, spec.cost0, 1, 60, spec, 1, 0, 0);
    CHECK((g_hat - g_exact).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("g trajectory-count formula matches the worked example") {
    CHECK(g_trajectories(0.5, 2, 2, 2, 1, 0.1) == 650);
}

TEST_CASE("estimated G concentrates around the exact values") {
    TabularInstance inst = random_instance(3, 2, 0, 0.5, 68);
    const SoftmaxPolicy policy = random_policy(3, 2, 8);
    const Matrix g_exact = g_values(policy, inst.nominal, inst.spec.cost0, inst.spec);
    const int n_g = 4;
    const double c_bound = inst.spec.cost0.max_abs();
    const double bound = 2.0 * c_bound * std::pow(inst.spec.gamma, n_g) / (1.0 - inst.spec.gamma);
    const int m_g = g_trajectories(inst.spec.gamma, n_g, 3, 2, 1, 0.1);
    int violations = 0;
    const int runs = 20;
    for (int run = 0; run < runs; ++run) {
        const Matrix g_hat = estimate_g_values(policy, inst.nominal, inst.spec.cost0, m_g, n_g,
                                               inst.spec, 5000 + run, 0, 0);
        if ((g_hat - g_exact).cwiseAbs().maxCoeff() > bound) ++violations;
    }
    CHECK(violations <= 4);  // failure budget delta=0.1 of 20 runs, with slack
}

TEST_CASE("monte carlo ascent counts its sample budget") {
    TabularInstance inst = random_instance(3, 2, 0, 0.6, 69);
    RectSet set(inst.nominal, Norm::Linf, 0.05);
    MirrorAscentConfig cfg;
    cfg.schedule = MirrorAscentConfig::Schedule::Fixed;
    cfg.t_prime = 2;
    cfg.estimator = MirrorAscentConfig::GEstimator::MonteCarlo;
    cfg.m_g = 7;
    cfg.n_g = 3;
    BudgetLedger ledger;
    const AscentResult res = worst_case_mirror_ascent(random_policy(3, 2, 9), inst.spec.cost0,
                                                      set, cfg, inst.spec, 3, inst.nominal, 0,
                                                      &ledger);
    const std::uint64_t expected = 2ULL * 3 * 3 * 2 * 7 * 3;  // t' S^2 A m_g n_g
    CHECK(res.samples_used == expected);
    CHECK(ledger.g_queries == expected);
}

TEST_CASE("cpi mixing coefficient formula") {
    CHECK(cpi_mixing_beta(0.1, 0.5) == doctest::Approx(0.0125).epsilon(1e-15));
}

TEST_CASE("cpi terminates immediately when the nominal already maximizes") {
    TabularInstance inst = random_instance(3, 2, 0, 0.5, 70);
    inst.spec.cost0 = CostTable::from_sa(Matrix::Constant(3, 2, 0.3));  // value independent of p
    NonRectSet set(inst.nominal, 0.1);
    CpiConfig cfg{1e-3, 100};
    const CpiResult res = conservative_policy_iteration(random_policy(3, 2, 10), inst.spec.cost0,
                                                        set, cfg, inst.spec, inst.nominal);
    CHECK(res.converged);
    CHECK(res.iters == 0);
    CHECK(res.final_gap <= 1e-3);
}

TEST_CASE("cpi beats random search over the feasible set") {
    TabularInstance inst = random_instance(3, 2, 0, 0.6, 71);
    NonRectSet set(inst.nominal, 0.1);
    const SoftmaxPolicy policy = random_policy(3, 2, 11);
    CpiConfig cfg{1e-3, 200000};
    const CpiResult res = conservative_policy_iteration(policy, inst.spec.cost0, set, cfg,
                                                        inst.spec, inst.nominal);
    CHECK(res.converged);
    CHECK(res.final_gap <= 1e-3);
    CHECK(contains(res.kernel, set, 1e-7).ok);
    const double achieved = value(policy, res.kernel, inst.spec.cost0, inst.spec).v_rho;

    RngStream rng = make_stream(1234, StreamPurpose::Oracle);
    double best_random = -1e300;
    for (int probe = 0; probe < 10000; ++probe) {
        TransitionKernel cand = inst.nominal;
        for (int r = 0; r < cand.p.rows(); ++r)
            for (int c2 = 0; c2 < cand.p.cols(); ++c2)
                cand.p(r, c2) += rng.uniform(-0.2, 0.2);
        cand = project(cand, set);
        best_random =
            std::max(best_random, value(policy, cand, inst.spec.cost0, inst.spec).v_rho);
    }
    CHECK(achieved >= best_random - 1e-3);
}

TEST_CASE("cpi reports non-convergence under a tiny budget") {
    TabularInstance inst = random_instance(3, 2, 0, 0.6, 72);
    NonRectSet set(inst.nominal, 0.1);
    CpiConfig cfg{1e-14, 3};
    const CpiResult res = conservative_policy_iteration(random_policy(3, 2, 12), inst.spec.cost0,
                                                        set, cfg, inst.spec, inst.nominal);
    CHECK_FALSE(res.converged);
    CHECK(res.final_gap > 1e-14);
    CHECK(res.gaps.size() == 3);
}

TEST_CASE("cpi gap running minimum is non-increasing and kernels stay feasible") {
    TabularInstance inst = random_instance(3, 2, 1, 0.6, 73);
    NonRectSet set(inst.nominal, 0.08);
    const SoftmaxPolicy policy = random_policy(3, 2, 13);
    CpiConfig cfg{1e-4, 500000};
    const CpiResult res = conservative_policy_iteration(policy, inst.spec.cost0, set, cfg,
                                                        inst.spec, inst.nominal);
    double running = 1e300;
    for (double gap : res.gaps) {
        running = std::min(running, gap);
        CHECK(running <= gap + 1e-12);
    }
    CHECK(res.converged);
}
