#pragma once

#include <cstdint>

#include "rcmdp/model.hpp"

namespace rcmdp {

/// A tabular problem together with its nominal dynamics.
struct TabularInstance {
    RcmdpSpec spec;
    TransitionKernel nominal;
};

/// Strictly interior random kernel (every entry >= floor after normalization).
TransitionKernel random_kernel(int n_states, int n_actions, std::uint64_t seed,
                               double floor = 0.05);

/// Random logits in [-scale, scale].
SoftmaxPolicy random_policy(int n_states, int n_actions, std::uint64_t seed,
                            double scale = 1.0);

/// Seeded random instance: positive rho, costs in [-1,1], interior nominal kernel.
TabularInstance random_instance(int n_states, int n_actions, int m, double gamma,
                                std::uint64_t seed);

/**
 * Two-state chain with a state-dependent cost and a constraint that penalizes
 * the action pushing toward the expensive state. Shifting next-state mass
 * toward state 1 raises the cost, which makes the distortion direction of the
 * robustness sweep adversarially aligned.
 */
TabularInstance two_state_tension(double gamma = 0.9);

/**
 * Five-state, three-action inventory-style chain (actions: sell/hold/buy)
 * with one constraint on buying, gamma = 0.5. A never-buy policy keeps the
 * constraint value at -0.5 under every kernel, so the strict-feasibility
 * slack is 0.5 regardless of the uncertainty set.
 */
TabularInstance inventory_chain();

}  // namespace rcmdp
