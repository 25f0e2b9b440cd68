#include "rcmdp/instances.hpp"

#include <algorithm>

#include "rcmdp/rng.hpp"

namespace rcmdp {

TransitionKernel random_kernel(int n_states, int n_actions, std::uint64_t seed, double floor) {
    RngStream rng = make_stream(seed, StreamPurpose::Instance, 1);
    TransitionKernel kernel(n_states, n_actions);
    for (int r = 0; r < n_states * n_actions; ++r) {
        Vector row(n_states);
        for (int s2 = 0; s2 < n_states; ++s2) row(s2) = floor + rng.uniform01();
        kernel.p.row(r) = (row / row.sum()).transpose();
    }
    return kernel;
}

SoftmaxPolicy random_policy(int n_states, int n_actions, std::uint64_t seed, double scale) {
    RngStream rng = make_stream(seed, StreamPurpose::Instance, 2);
    Matrix theta(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) theta(s, a) = rng.uniform(-scale, scale);
    return SoftmaxPolicy(theta);
}

TabularInstance random_instance(int n_states, int n_actions, int m, double gamma,
                                std::uint64_t seed) {
    RngStream rng = make_stream(seed, StreamPurpose::Instance, 0);
    TabularInstance inst;
    inst.spec.n_states = n_states;
    inst.spec.n_actions = n_actions;
    inst.spec.m = m;
    inst.spec.gamma = gamma;

    Vector rho(n_states);
    for (int s = 0; s < n_states; ++s) rho(s) = 0.1 + rng.uniform01();
    inst.spec.rho = rho / rho.sum();

    auto random_cost = [&]() {
        Matrix c(n_states, n_actions);
        for (int s = 0; s < n_states; ++s)
            for (int a = 0; a < n_actions; ++a) c(s, a) = rng.uniform(-1.0, 1.0);
        return CostTable::from_sa(c);
    };
    inst.spec.cost0 = random_cost();
    for (int j = 0; j < m; ++j) inst.spec.costs.push_back(random_cost());

    inst.nominal = random_kernel(n_states, n_actions, seed);
    inst.spec.validate();
    inst.nominal.validate();
    return inst;
}

TabularInstance two_state_tension(double gamma) {
    TabularInstance inst;
    inst.spec.n_states = 2;
    inst.spec.n_actions = 2;
    inst.spec.m = 1;
    inst.spec.gamma = gamma;
    inst.spec.rho = Vector::Constant(2, 0.5);

    // State 1 is expensive; action 1 drifts toward it but pays off on the
    // constraint signal.
    Matrix c0(2, 2);
    c0 << -0.2, -0.2,
           0.8,  0.8;
    inst.spec.cost0 = CostTable::from_sa(c0);
    Matrix c1(2, 2);
    c1 << 0.3, -0.4,
          0.3, -0.4;
    inst.spec.costs.push_back(CostTable::from_sa(c1));

    inst.nominal = TransitionKernel(2, 2);
    inst.nominal.p << 0.5, 0.5,
                      0.3, 0.7,
                      0.6, 0.4,
                      0.4, 0.6;
    inst.spec.validate();
    inst.nominal.validate();
    return inst;
}

TabularInstance inventory_chain() {
    const int S = 5, A = 3;  // actions: 0 sell, 1 hold, 2 buy
    TabularInstance inst;
    inst.spec.n_states = S;
    inst.spec.n_actions = A;
    inst.spec.m = 1;
    inst.spec.gamma = 0.5;
    Vector rho(S);
    rho << 0.3, 0.25, 0.2, 0.15, 0.1;
    inst.spec.rho = rho;

    Matrix c0(S, A), c1(S, A);
    for (int s = 0; s < S; ++s) {
        const double stock = static_cast<double>(s) / (S - 1);
        for (int a = 0; a < A; ++a) {
            // Holding stock pays; selling from an empty inventory is penalized.
            c0(s, a) = -0.8 * stock + (a == 0 && s == 0 ? 0.3 : 0.0) + 0.05 * (a == 2 ? 1 : 0);
            // Purchases draw on a budget that regenerates at rate 0.25, so a
            // never-buy policy keeps the constraint value at -0.5 under every
            // kernel (strict feasibility slack 0.5).
            c1(s, a) = (a == 2 ? 0.4 : 0.0) - 0.25;
        }
    }
    inst.spec.cost0 = CostTable::from_sa(c0);
    inst.spec.costs.push_back(CostTable::from_sa(c1));

    inst.nominal = TransitionKernel(S, A);
    auto set_row = [&](int s, int a, double down, double stay, double up) {
        Vector row = Vector::Zero(S);
        row(std::max(0, s - 1)) += down;
        row(s) += stay;
        row(std::min(S - 1, s + 1)) += up;
        inst.nominal.row(s, a) = row.transpose();
    };
    for (int s = 0; s < S; ++s) {
        set_row(s, 0, 0.7, 0.2, 0.1);
        set_row(s, 1, 0.1, 0.8, 0.1);
        set_row(s, 2, 0.1, 0.2, 0.7);
    }
    inst.spec.validate();
    inst.nominal.validate();
    return inst;
}

}  // namespace rcmdp
