#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rcmdp/instances.hpp"
#include "rcmdp/mirror_ascent.hpp"
#include "rcmdp/model.hpp"
#include "rcmdp/policy.hpp"
#include "rcmdp/sampling.hpp"
#include "rcmdp/uncertainty.hpp"

namespace rcmdp {

struct DualConfig {
    double eta_lambda = 1.0;
    enum class Mode { Augmented, Clipped } mode = Mode::Augmented;
    double lambda_max = 0.0;  // used in clipped mode
};

struct SamplingConfig {
    int m_v = 100, n_v = 10;  // value estimation
    int m_q = 100, n_q = 10;  // Q estimation
};

struct SweepConfig {
    std::vector<double> levels;  // distortion levels in [0,1]
    int n_test = 1;              // evaluation episodes per row in sampled mode
    double lambda_max = 1.0;     // penalized-return statistic weight
};

struct RunConfig {
    int macro_iters = 10;  // K
    enum class Mode { Exact, Sampled } mode = Mode::Exact;
    enum class InnerSolver { MirrorAscent, Cpi } inner_solver = InnerSolver::MirrorAscent;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    bool cold_start = false;  // restart each adversary solve from the nominal
};

struct ExperimentConfig {
    RcmdpSpec spec;
    TransitionKernel nominal;
    UncertaintySet set;
    MdConfig md;
    MirrorAscentConfig ascent;
    CpiConfig cpi;
    DualConfig dual;
    SamplingConfig sampling;
    RunConfig run;
    SweepConfig sweep;
};

/// Parses the experiment file (JSON blocks: rcmdp, uncertainty, md, dual,
/// adversary, sampling, run, sweep). Throws std::invalid_argument on bad input.
ExperimentConfig load_config(const std::string& path);

/// Loads a tabular problem (sizes, rho, cost tables, nominal kernel) from its
/// JSON description; kernel rows are renormalized within 1e-6.
TabularInstance load_instance(const std::string& path);

void save_instance(const TabularInstance& inst, const std::string& path);

struct RunLogRow {
    int k = 0;
    double v = 0.0;              // V(rho) on the objective cost
    Vector v_constraints;        // V^j(rho)
    double lagrangian = 0.0;     // V + <lambda, V^{1:m}> at the updated lambda
    Vector lambda;
    double kernel_linf_dev = 0.0;  // max |p_k - nominal|
    double pkl_step = 0.0;         // pseudo-KL between consecutive policies
    std::uint64_t budget = 0;      // cumulative generative-model queries
};

struct RunLog {
    int m = 0;
    std::vector<RunLogRow> rows;
};

struct TrainResult {
    SoftmaxPolicy policy;
    TransitionKernel kernel;
    DualState dual;
    RunLog log;
    BudgetLedger ledger;
    std::vector<SoftmaxPolicy> policy_iterates;  // pi_1 ... pi_K
};

/// Full primal-dual training loop (policy mirror descent, adversarial kernel
/// ascent, dual update, per-iteration logging). Errors are rethrown with the
/// failing macro-iteration index.
TrainResult run_training(const ExperimentConfig& cfg);

struct SweepRow {
    double x = 0.0;
    std::vector<int> signs;
    double ret = 0.0;  // negated objective value, reported as a return
    Vector constraint_costs;
    double r_pen = 0.0;
    double r_pen_signed = 0.0;
};

struct SweepTable {
    int m = 0;
    int n_dims = 0;  // perturbation dimensions; 2^n_dims sign vectors per level
    std::vector<SweepRow> rows;
};

/**
 * Evaluates the policy on every (level, sign vector) distortion of the set:
 * |levels| * 2^n rows, exact tabular evaluation (or n_test-episode Monte Carlo
 * in sampled mode).
 */
SweepTable robustness_sweep(const SoftmaxPolicy& policy, const RectSet& set,
                            const std::vector<double>& levels, int n_test, double lambda_max,
                            const RcmdpSpec& spec, std::uint64_t seed,
                            RunConfig::Mode mode = RunConfig::Mode::Exact);

/// (r_pen, r_pen_signed) = (v - lmax*sum_j max(0,c_j), v - lmax*sum_j c_j).
std::pair<double, double> penalized_return(double v, const Vector& c, double lambda_max);

/// CSV with a fixed header and %.12g floats; identical inputs give identical bytes.
void emit(const RunLog& log, const std::string& path);
void emit(const SweepTable& table, const std::string& path);

/**
 * Robust Lagrangian objective of a policy with the dual range capped at
 * b_lambda: max over multiplier sign patterns of the worst-case Lagrangian
 * value, each inner problem solved by kernel mirror ascent to convergence.
 * For a feasible policy this reduces to the worst-case value itself.
 */
double robust_objective(const SoftmaxPolicy& policy, const UncertaintySet& set,
                        double b_lambda, const RcmdpSpec& spec, int ascent_iters = 120);

}  // namespace rcmdp
