#include "rcmdp/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rcmdp {

using nlohmann::json;

namespace {

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
    return j;
}

Matrix parse_matrix(const json& j, int rows, int cols, const std::string& what) {
    if (!j.is_array() || static_cast<int>(j.size()) != rows)
        throw std::invalid_argument(what + ": expected " + std::to_string(rows) + " rows");
    Matrix out(rows, cols);
    for (int r = 0; r < rows; ++r) {
        if (static_cast<int>(j[r].size()) != cols)
            throw std::invalid_argument(what + ": row " + std::to_string(r) + " has wrong length");
        for (int c = 0; c < cols; ++c) out(r, c) = j[r][c].get<double>();
    }
    return out;
}

CostTable parse_cost(const json& j, int S, int A, const std::string& what) {
    if (j.is_object() && j.contains("sas"))
        return CostTable::from_sas(parse_matrix(j["sas"], S * A, S, what), S, A);
    return CostTable::from_sa(parse_matrix(j, S, A, what));
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void check_multiplier_invariants(const DualState& dual, bool initial, int k) {
    const double tol = 1e-12;
    for (int j = 0; j < dual.lambda.size(); ++j) {
        const double lam = dual.lambda(j);
        const double drift = dual.eta_lambda * dual.last_vhat(j);
        if (lam < -tol)
            throw std::runtime_error("macro-iteration " + std::to_string(k) +
                                     ": negative multiplier");
        if (dual.lambda_max) continue;  // remaining properties are for the augmented update
        if (lam + drift < -tol)
            throw std::runtime_error("macro-iteration " + std::to_string(k) +
                                     ": negative augmented multiplier");
        if (initial && lam * lam > drift * drift + tol)
            throw std::runtime_error("initialization: |lambda_0| exceeds |eta*vhat_0|");
        if (!initial && lam * lam < drift * drift - tol)
            throw std::runtime_error("macro-iteration " + std::to_string(k) +
                                     ": |lambda_k| below |eta*vhat_k|");
    }
}

}  // namespace

namespace {

TabularInstance load_instance_impl(const std::string& path) {
    const json j = read_json(path);
    TabularInstance inst;
    inst.spec.n_states = j.at("n_states").get<int>();
    inst.spec.n_actions = j.at("n_actions").get<int>();
    inst.spec.m = j.at("m").get<int>();
    inst.spec.gamma = j.at("gamma").get<double>();
    const int S = inst.spec.n_states, A = inst.spec.n_actions;

    inst.spec.rho = Vector(S);
    if (static_cast<int>(j.at("rho").size()) != S)
        throw std::invalid_argument(path + ": rho has wrong length");
    for (int s = 0; s < S; ++s) inst.spec.rho(s) = j["rho"][s].get<double>();

    inst.spec.cost0 = parse_cost(j.at("cost0"), S, A, "cost0");
    for (int c = 0; c < inst.spec.m; ++c)
        inst.spec.costs.push_back(parse_cost(j.at("costs")[c], S, A, "costs"));

    inst.nominal.n_states = S;
    inst.nominal.n_actions = A;
    inst.nominal.p = parse_matrix(j.at("kernel"), S * A, S, "kernel");
    inst.nominal.renormalize();

    inst.spec.validate();
    inst.nominal.validate();
    return inst;
}

}  // namespace

TabularInstance load_instance(const std::string& path) {
    try {
        return load_instance_impl(path);
    } catch (const json::exception& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

void save_instance(const TabularInstance& inst, const std::string& path) {
    json j;
    j["n_states"] = inst.spec.n_states;
    j["n_actions"] = inst.spec.n_actions;
    j["m"] = inst.spec.m;
    j["gamma"] = inst.spec.gamma;
    j["rho"] = std::vector<double>(inst.spec.rho.data(), inst.spec.rho.data() + inst.spec.rho.size());
    auto dump_matrix = [](const Matrix& m) {
        std::vector<std::vector<double>> rows(m.rows(), std::vector<double>(m.cols()));
        for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < m.cols(); ++c) rows[r][c] = m(r, c);
        return rows;
    };
    auto dump_cost = [&](const CostTable& c) {
        if (c.next_state_dependent()) return json{{"sas", dump_matrix(c.sas)}};
        return json(dump_matrix(c.sa));
    };
    j["cost0"] = dump_cost(inst.spec.cost0);
    j["costs"] = json::array();
    for (const auto& c : inst.spec.costs) j["costs"].push_back(dump_cost(c));
    j["kernel"] = dump_matrix(inst.nominal.p);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

namespace {

ExperimentConfig load_config_impl(const std::string& path) {
    const json j = read_json(path);
    ExperimentConfig cfg;

    const json& jr = j.at("rcmdp");
    TabularInstance inst;
    if (jr.contains("path")) {
        inst = load_instance(jr["path"].get<std::string>());
    } else if (jr.contains("builtin")) {
        const std::string name = jr["builtin"].get<std::string>();
        if (name == "inventory") inst = inventory_chain();
        else if (name == "two_state") inst = two_state_tension();
        else throw std::invalid_argument("unknown builtin instance: " + name);
    } else if (jr.contains("random")) {
        const json& r = jr["random"];
        inst = random_instance(r.at("n_states").get<int>(), r.at("n_actions").get<int>(),
                               r.at("m").get<int>(), r.at("gamma").get<double>(),
                               r.at("seed").get<std::uint64_t>());
    } else {
        throw std::invalid_argument("rcmdp block needs one of: path, builtin, random");
    }
    cfg.spec = inst.spec;
    cfg.nominal = inst.nominal;

    const json& ju = j.at("uncertainty");
    const std::string kind = ju.value("kind", "rect");
    if (kind == "rect") {
        const std::string norm = ju.value("norm", "linf");
        Norm n = norm == "l1" ? Norm::L1 : norm == "l2" ? Norm::L2 : Norm::Linf;
        if (norm != "l1" && norm != "l2" && norm != "linf")
            throw std::invalid_argument("uncertainty.norm must be l1, l2, or linf");
        RectSet set(cfg.nominal, n, ju.at("radius").get<double>());
        const std::string grouping = ju.value("groups", "single");
        if (grouping == "per_state") {
            for (int s = 0; s < cfg.spec.n_states; ++s)
                for (int a = 0; a < cfg.spec.n_actions; ++a)
                    set.groups[sa_index(s, a, cfg.spec.n_actions)] = s;
        } else if (grouping != "single") {
            throw std::invalid_argument("uncertainty.groups must be single or per_state");
        }
        cfg.set = set;
    } else if (kind == "nonrect") {
        cfg.set = NonRectSet(cfg.nominal, ju.at("budget").get<double>());
    } else {
        throw std::invalid_argument("uncertainty.kind must be rect or nonrect");
    }

    const json& jm = j.at("md");
    if (jm.value("preset", "") == "theory") {
        cfg.md = theory_md_config(cfg.spec.gamma, cfg.spec.m,
                                  j.at("dual").value("eta_lambda", 1.0), jm.at("t_k").get<int>());
    } else {
        cfg.md.eta = jm.at("eta").get<double>();
        cfg.md.alpha = jm.at("alpha").get<double>();
        cfg.md.t_k = jm.at("t_k").get<int>();
    }
    const std::string t_k_preset = jm.value("t_k_preset", "fixed");
    if (t_k_preset == "log_lambda") cfg.md.adaptive_t_k = true;
    else if (t_k_preset != "fixed")
        throw std::invalid_argument("md.t_k_preset must be fixed or log_lambda");

    if (j.contains("dual")) {
        const json& jd = j["dual"];
        cfg.dual.eta_lambda = jd.value("eta_lambda", 1.0);
        const std::string mode = jd.value("mode", "augmented");
        if (mode == "clipped") {
            cfg.dual.mode = DualConfig::Mode::Clipped;
            cfg.dual.lambda_max = jd.at("lambda_max").get<double>();
        } else if (mode != "augmented") {
            throw std::invalid_argument("dual.mode must be augmented or clipped");
        }
    }

    const json& ja = j.at("adversary");
    cfg.ascent.eta_p0 = ja.value("eta_p0", 1.0);
    cfg.ascent.alpha_p = ja.value("alpha_p", 1.0);
    const std::string sched = ja.value("schedule", "geometric");
    if (sched == "fixed") cfg.ascent.schedule = MirrorAscentConfig::Schedule::Fixed;
    else if (sched == "geometric") cfg.ascent.schedule = MirrorAscentConfig::Schedule::Geometric;
    else throw std::invalid_argument("adversary.schedule must be fixed or geometric");
    cfg.ascent.t_prime = ja.value("t_prime", 30);
    cfg.ascent.m_g = ja.value("m_g", 0);
    cfg.ascent.n_g = ja.value("n_g", 0);
    cfg.cpi.eps_prime = ja.value("eps_prime", 1e-3);
    cfg.cpi.max_iters = ja.value("max_iters", 10000);

    if (j.contains("sampling")) {
        const json& js = j["sampling"];
        if (js.contains("epsilon")) {
            // derive the truncation/concentration sizes from a target accuracy
            const double eps = js.at("epsilon").get<double>();
            const double delta = js.value("delta", 0.1);
            cfg.sampling.n_v = v_horizon(cfg.spec.gamma, eps);
            cfg.sampling.m_v = v_trajectories(cfg.spec.gamma, eps, delta);
            cfg.sampling.n_q = q_horizon(cfg.spec.gamma, 0.0, eps);
            cfg.sampling.m_q = q_trajectories(cfg.spec.gamma, 0.0, eps, delta, cfg.md.t_k);
        }
        cfg.sampling.m_v = js.value("m_v", cfg.sampling.m_v);
        cfg.sampling.n_v = js.value("n_v", cfg.sampling.n_v);
        cfg.sampling.m_q = js.value("m_q", cfg.sampling.m_q);
        cfg.sampling.n_q = js.value("n_q", cfg.sampling.n_q);
    }

    const json& jn = j.at("run");
    cfg.run.macro_iters = jn.at("K").get<int>();
    const std::string mode = jn.value("mode", "exact");
    if (mode == "sampled") cfg.run.mode = RunConfig::Mode::Sampled;
    else if (mode != "exact") throw std::invalid_argument("run.mode must be exact or sampled");
    const std::string solver = jn.value("inner_solver", "mirror_ascent");
    if (solver == "cpi") cfg.run.inner_solver = RunConfig::InnerSolver::Cpi;
    else if (solver != "mirror_ascent" && solver != "tma")
        throw std::invalid_argument("run.inner_solver must be mirror_ascent or cpi");
    cfg.run.seed = jn.value("seed", 0ULL);
    cfg.run.out_dir = jn.value("out", ".");
    cfg.run.cold_start = jn.value("cold_start", false);

    if (j.contains("sweep")) {
        const json& js = j["sweep"];
        for (const auto& lv : js.at("levels")) cfg.sweep.levels.push_back(lv.get<double>());
        cfg.sweep.n_test = js.value("n_test", 1);
        cfg.sweep.lambda_max = js.value("lambda_max", 1.0);
    }

    cfg.spec.validate();
    cfg.md.validate(cfg.spec.gamma);
    if (cfg.run.inner_solver == RunConfig::InnerSolver::MirrorAscent) {
        if (cfg.run.mode == RunConfig::Mode::Sampled &&
            cfg.ascent.estimator == MirrorAscentConfig::GEstimator::Exact) {
            cfg.ascent.estimator = MirrorAscentConfig::GEstimator::MonteCarlo;
            if (cfg.ascent.m_g < 1 || cfg.ascent.n_g < 1)
                throw std::invalid_argument("sampled mode needs adversary.m_g and adversary.n_g");
        }
        cfg.ascent.validate(cfg.spec.gamma);
    }
    return cfg;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
    try {
        return load_config_impl(path);
    } catch (const json::exception& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

TrainResult run_training(const ExperimentConfig& cfg) {
    const RcmdpSpec& spec = cfg.spec;
    const bool exact = cfg.run.mode == RunConfig::Mode::Exact;

    TrainResult res;
    res.policy = SoftmaxPolicy::uniform(spec.n_states, spec.n_actions);
    res.kernel = nominal_of(cfg.set);
    res.log.m = spec.m;

    auto values_at = [&](const SoftmaxPolicy& pi, const TransitionKernel& p,
                         std::uint64_t k) -> Vector {
        if (exact) return all_values(pi, p, spec);
        return estimate_v(pi, p, spec, cfg.sampling.m_v, cfg.sampling.n_v, cfg.run.seed, k,
                          &res.ledger);
    };

    Vector v0 = values_at(res.policy, res.kernel, 0);
    res.dual = make_dual(cfg.dual.eta_lambda, v0.tail(spec.m),
                         cfg.dual.mode == DualConfig::Mode::Clipped
                             ? std::optional<double>(cfg.dual.lambda_max)
                             : std::nullopt);
    check_multiplier_invariants(res.dual, true, 0);

    for (int k = 0; k < cfg.run.macro_iters; ++k) {
        try {
            QEstimatorConfig q_est;
            if (!exact) {
                q_est.kind = QEstimatorConfig::Kind::Sampled;
                q_est.m_q = cfg.sampling.m_q;
                q_est.n_q = cfg.sampling.n_q;
                q_est.seed = cfg.run.seed;
                q_est.macro_k = static_cast<std::uint64_t>(k);
                q_est.ledger = &res.ledger;
            }
            MdConfig md = cfg.md;
            if (md.adaptive_t_k)
                md.t_k = inner_iterations_preset(md, spec.gamma, spec.m, cfg.dual.eta_lambda,
                                                 cfg.run.macro_iters,
                                                 res.dual.lambda.lpNorm<1>());
            const SoftmaxPolicy prev = res.policy;
            res.policy = policy_inner_loop(prev, res.kernel, res.dual, md, q_est, spec);

            const CostTable adversary_cost = lagrangian_cost(spec, res.dual.lambda);
            const TransitionKernel start = cfg.run.cold_start ? nominal_of(cfg.set) : res.kernel;
            if (cfg.run.inner_solver == RunConfig::InnerSolver::Cpi) {
                const auto* nonrect = std::get_if<NonRectSet>(&cfg.set);
                if (!nonrect)
                    throw std::invalid_argument("cpi inner solver needs a non-rectangular set");
                res.kernel = conservative_policy_iteration(res.policy, adversary_cost, *nonrect,
                                                           cfg.cpi, spec, start)
                                 .kernel;
            } else {
                res.kernel = worst_case_mirror_ascent(res.policy, adversary_cost, cfg.set,
                                                      cfg.ascent, spec, cfg.run.seed, start,
                                                      static_cast<std::uint64_t>(k), &res.ledger)
                                 .kernel;
            }
            if (!contains(res.kernel, cfg.set).ok)
                throw std::runtime_error("adversarial kernel left the uncertainty set");

            const Vector vals = values_at(res.policy, res.kernel, k + 1);
            res.dual = dual_update(res.dual, vals.tail(spec.m));
            check_multiplier_invariants(res.dual, false, k);

            RunLogRow row;
            row.k = k;
            row.v = vals(0);
            row.v_constraints = vals.tail(spec.m);
            row.lambda = res.dual.lambda;
            row.lagrangian = vals(0) + res.dual.lambda.dot(row.v_constraints);
            row.kernel_linf_dev =
                (res.kernel.p - nominal_of(cfg.set).p).cwiseAbs().maxCoeff();
            row.pkl_step = pseudo_kl(res.policy, prev, occupancy(res.policy, res.kernel, spec));
            row.budget = res.ledger.total();
            res.log.rows.push_back(row);
            res.policy_iterates.push_back(res.policy);
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception& e) {
            throw std::runtime_error("macro-iteration " + std::to_string(k) + ": " + e.what());
        }
    }
    return res;
}

std::pair<double, double> penalized_return(double v, const Vector& c, double lambda_max) {
    if (lambda_max < 0.0) throw std::invalid_argument("penalized_return: lambda_max must be >= 0");
    const double pen = c.array().max(0.0).sum();
    return {v - lambda_max * pen, v - lambda_max * c.sum()};
}

SweepTable robustness_sweep(const SoftmaxPolicy& policy, const RectSet& set,
                            const std::vector<double>& levels, int n_test, double lambda_max,
                            const RcmdpSpec& spec, std::uint64_t seed, RunConfig::Mode mode) {
    SweepTable table;
    table.m = spec.m;
    table.n_dims = set.n_groups();
    const int n_signs = 1 << table.n_dims;

    std::uint64_t row_id = 0;
    for (double x : levels) {
        for (int mask = 0; mask < n_signs; ++mask) {
            std::vector<int> signs(table.n_dims);
            for (int d = 0; d < table.n_dims; ++d) signs[d] = (mask >> d) & 1 ? -1 : 1;
            const TransitionKernel kernel = distort(set, x, signs);

            SweepRow row;
            row.x = x;
            row.signs = signs;
            Vector vals;
            if (mode == RunConfig::Mode::Exact) {
                vals = all_values(policy, kernel, spec);
            } else {
                BudgetLedger scratch;
                vals = estimate_v(policy, kernel, spec, n_test,
                                  v_horizon(spec.gamma, 1e-3), seed, row_id, &scratch);
            }
            row.ret = -vals(0);
            row.constraint_costs = vals.tail(spec.m);
            std::tie(row.r_pen, row.r_pen_signed) =
                penalized_return(row.ret, row.constraint_costs, lambda_max);
            table.rows.push_back(std::move(row));
            ++row_id;
        }
    }
    return table;
}

void emit(const RunLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "k,V";
    for (int j = 1; j <= log.m; ++j) out << ",V_" << j;
    out << ",lagrangian";
    for (int j = 1; j <= log.m; ++j) out << ",lambda_" << j;
    out << ",kernel_linf_dev,pkl_step,budget_T\n";
    for (const auto& row : log.rows) {
        out << row.k << ',' << fmt(row.v);
        for (int j = 0; j < log.m; ++j) out << ',' << fmt(row.v_constraints(j));
        out << ',' << fmt(row.lagrangian);
        for (int j = 0; j < log.m; ++j) out << ',' << fmt(row.lambda(j));
        out << ',' << fmt(row.kernel_linf_dev) << ',' << fmt(row.pkl_step) << ',' << row.budget
            << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

void emit(const SweepTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "x";
    for (int d = 1; d <= table.n_dims; ++d) out << ",sign_" << d;
    out << ",return";
    for (int j = 1; j <= table.m; ++j) out << ",c_" << j;
    out << ",r_pen,r_pen_signed\n";
    for (const auto& row : table.rows) {
        out << fmt(row.x);
        for (int sign : row.signs) out << ',' << sign;
        out << ',' << fmt(row.ret);
        for (int j = 0; j < table.m; ++j) out << ',' << fmt(row.constraint_costs(j));
        out << ',' << fmt(row.r_pen) << ',' << fmt(row.r_pen_signed) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

double robust_objective(const SoftmaxPolicy& policy, const UncertaintySet& set, double b_lambda,
                        const RcmdpSpec& spec, int ascent_iters) {
    // sup_p [V + b sum_j max(0, V^j)] = max over constraint subsets J of
    // sup_p [V + b sum_{j in J} V^j]; each inner problem is a plain worst-case
    // Lagrangian solve.
    MirrorAscentConfig cfg;
    cfg.eta_p0 = 1.0;
    cfg.alpha_p = 1.0;
    cfg.schedule = MirrorAscentConfig::Schedule::Geometric;
    cfg.t_prime = ascent_iters;

    double best = -std::numeric_limits<double>::infinity();
    for (int mask = 0; mask < (1 << spec.m); ++mask) {
        Vector lambda = Vector::Zero(spec.m);
        for (int j = 0; j < spec.m; ++j)
            if ((mask >> j) & 1) lambda(j) = b_lambda;
        const CostTable cost = lagrangian_cost(spec, lambda);
        const auto res = worst_case_mirror_ascent(policy, cost, set, cfg, spec, 0,
                                                  nominal_of(set));
        best = std::max(best, res.values.back());
    }
    return best;
}

}  // namespace rcmdp
