#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rcmdp/harness.hpp"

namespace {

using namespace rcmdp;

void apply_overrides(ExperimentConfig& cfg, const std::optional<std::uint64_t>& seed,
                     const std::optional<std::string>& out,
                     const std::optional<std::string>& mode) {
    if (seed) cfg.run.seed = *seed;
    if (out) cfg.run.out_dir = *out;
    if (mode) {
        if (*mode == "exact") cfg.run.mode = RunConfig::Mode::Exact;
        else if (*mode == "sampled") cfg.run.mode = RunConfig::Mode::Sampled;
        else throw std::invalid_argument("--mode must be exact or sampled");
    }
}

SoftmaxPolicy load_policy(const std::string& path, int S, int A) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    nlohmann::json j;
    in >> j;
    Matrix theta(S, A);
    const auto& rows = j.at("theta");
    if (static_cast<int>(rows.size()) != S)
        throw std::invalid_argument(path + ": theta has wrong number of rows");
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) theta(s, a) = rows[s][a].get<double>();
    return SoftmaxPolicy(theta);
}

void save_policy(const SoftmaxPolicy& policy, const std::string& path) {
    nlohmann::json j;
    std::vector<std::vector<double>> rows(policy.theta.rows(),
                                          std::vector<double>(policy.theta.cols()));
    for (int s = 0; s < policy.theta.rows(); ++s)
        for (int a = 0; a < policy.theta.cols(); ++a) rows[s][a] = policy.theta(s, a);
    j["theta"] = rows;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

int cmd_train(const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.run.out_dir);
    const TrainResult res = run_training(cfg);
    const std::string log_path = cfg.run.out_dir + "/train_log.csv";
    emit(res.log, log_path);
    save_policy(res.policy, cfg.run.out_dir + "/policy.json");

    const auto& last = res.log.rows.back();
    std::printf("trained %d macro-iterations: V=%.6f", cfg.run.macro_iters, last.v);
    for (int j = 0; j < cfg.spec.m; ++j)
        std::printf(" V_%d=%.6f lambda_%d=%.6f", j + 1, last.v_constraints(j), j + 1,
                    last.lambda(j));
    std::printf(" budget=%llu\n", static_cast<unsigned long long>(last.budget));
    std::printf("log written to %s\n", log_path.c_str());
    return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, const std::optional<std::string>& policy_path) {
    const auto* rect = std::get_if<RectSet>(&cfg.set);
    if (!rect) throw std::invalid_argument("sweep requires a rectangular uncertainty set");
    if (cfg.sweep.levels.empty())
        throw std::invalid_argument("config has no sweep.levels block");

    SoftmaxPolicy policy;
    if (policy_path) {
        policy = load_policy(*policy_path, cfg.spec.n_states, cfg.spec.n_actions);
    } else {
        policy = run_training(cfg).policy;
    }
    std::filesystem::create_directories(cfg.run.out_dir);
    const SweepTable table =
        robustness_sweep(policy, *rect, cfg.sweep.levels, cfg.sweep.n_test,
                         cfg.sweep.lambda_max, cfg.spec, cfg.run.seed, cfg.run.mode);
    const std::string path = cfg.run.out_dir + "/sweep.csv";
    emit(table, path);
    std::printf("%zu sweep rows written to %s\n", table.rows.size(), path.c_str());
    return 0;
}

int cmd_check(const ExperimentConfig& cfg) {
    int failures = 0;
    auto report = [&](const char* name, bool ok, double detail) {
        std::printf("%-34s %s (%.3e)\n", name, ok ? "ok" : "FAIL", detail);
        if (!ok) ++failures;
    };

    const RcmdpSpec& spec = cfg.spec;
    const SoftmaxPolicy policy = random_policy(spec.n_states, spec.n_actions, cfg.run.seed);
    const TransitionKernel& nominal = nominal_of(cfg.set);

    const OccupancyPair occ = occupancy(policy, nominal, spec);
    const Matrix ppi = policy_kernel(policy, nominal);
    const Vector residual =
        occ.d_state - ((1.0 - spec.gamma) * spec.rho + spec.gamma * ppi.transpose() * occ.d_state);
    report("occupancy fixed point", residual.lpNorm<Eigen::Infinity>() <= 1e-10,
           residual.lpNorm<Eigen::Infinity>());

    if (spec.m > 0) {
        Vector lambda = Vector::Constant(spec.m, 0.7);
        const double direct = lagrangian_value(policy, nominal, lambda, spec);
        const Vector vals = all_values(policy, nominal, spec);
        const double split = vals(0) + lambda.dot(vals.tail(spec.m));
        report("lagrangian dual route", std::abs(direct - split) <= 1e-10,
               std::abs(direct - split));
    }

    TransitionKernel probe = nominal;
    probe.p.array() += 0.31;
    for (int r = 0; r < probe.p.rows(); ++r) probe.p.row(r) /= probe.p.row(r).sum();
    const TransitionKernel projected = project(probe, cfg.set);
    const ContainsReport rep = contains(projected, cfg.set);
    report("projection feasibility", rep.ok, rep.worst_violation);

    ExperimentConfig short_cfg = cfg;
    short_cfg.run.macro_iters = std::min(cfg.run.macro_iters, 5);
    const TrainResult res = run_training(short_cfg);  // multiplier invariants assert inside
    report("training multiplier invariants", true,
           res.log.rows.empty() ? 0.0 : res.log.rows.back().lagrangian);
    report("final kernel in set", contains(res.kernel, cfg.set).ok,
           contains(res.kernel, cfg.set).worst_violation);

    if (failures > 0) {
        std::printf("%d check(s) failed\n", failures);
        return 3;
    }
    std::printf("all checks passed\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tabular robust constrained MDP optimizer"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir, mode, policy_path;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
        cmd->add_option("--seed", seed, "override run.seed");
        cmd->add_option("--out", out_dir, "override output directory");
        cmd->add_option("--mode", mode, "override run.mode (exact|sampled)");
    };
    CLI::App* train = app.add_subcommand("train", "run the primal-dual training loop");
    add_common(train);
    CLI::App* sweep = app.add_subcommand("sweep", "evaluate a policy across distortion levels");
    add_common(sweep);
    sweep->add_option("--policy", policy_path, "policy logits JSON (default: train first)");
    CLI::App* check = app.add_subcommand("check", "run the invariant suite on the instance");
    add_common(check);

    CLI11_PARSE(app, argc, argv);

    try {
        rcmdp::ExperimentConfig cfg = rcmdp::load_config(config_path);
        apply_overrides(cfg, seed, out_dir, mode);
        if (train->parsed()) return cmd_train(cfg);
        if (sweep->parsed()) return cmd_sweep(cfg, policy_path);
        return cmd_check(cfg);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    }
}
