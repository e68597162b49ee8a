#include "gail/cli.hpp"

#include "gail/analysis.hpp"
#include "gail/errors.hpp"
#include "gail/oracles.hpp"
#include "gail/rng.hpp"
#include "gail/sampling.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <type_traits>

namespace gail {
namespace {

using Reader = std::function<void(RunConfig&, const KvDocument&, const std::string&)>;

template <class T>
Reader reader(T RunConfig::*field) {
    return [field](RunConfig& cfg, const KvDocument& doc, const std::string& key) {
        if constexpr (std::is_same_v<T, double>) {
            cfg.*field = doc.get_double(key);
        } else if constexpr (std::is_same_v<T, int>) {
            const long long v = doc.get_int(key);
            if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
                throw ParseError("key '" + key + "': value out of range");
            cfg.*field = static_cast<int>(v);
        } else if constexpr (std::is_same_v<T, long long> || std::is_same_v<T, std::optional<long long>>) {
            cfg.*field = doc.get_int(key);
        } else if constexpr (std::is_same_v<T, bool>) {
            cfg.*field = doc.get_bool(key);
        } else if constexpr (std::is_same_v<T, std::uint64_t> || std::is_same_v<T, std::optional<std::uint64_t>>) {
            cfg.*field = doc.get_u64(key);
        } else if constexpr (std::is_same_v<T, std::vector<long long>>) {
            cfg.*field = doc.get_int_list(key);
        } else {
            cfg.*field = T(doc.get_string(key));
        }
    };
}

struct KeySpec {
    const char* key;
    Reader read;
};

const std::vector<KeySpec>& key_specs() {
    static const std::vector<KeySpec> specs = {
        {"seed", reader(&RunConfig::seed)},
        {"out", reader(&RunConfig::out)},
        {"strict_theory", reader(&RunConfig::strict_theory)},
        {"mdp_file", reader(&RunConfig::mdp_file)},
        {"mdp_states", reader(&RunConfig::mdp_states)},
        {"mdp_actions", reader(&RunConfig::mdp_actions)},
        {"mdp_seed", reader(&RunConfig::mdp_seed)},
        {"mdp_concentration", reader(&RunConfig::mdp_concentration)},
        {"features_file", reader(&RunConfig::features_file)},
        {"d_state", reader(&RunConfig::d_state)},
        {"d_action", reader(&RunConfig::d_action)},
        {"n_features", reader(&RunConfig::n_features)},
        {"bandwidth", reader(&RunConfig::bandwidth)},
        {"feature_seed", reader(&RunConfig::feature_seed)},
        {"temperature", reader(&RunConfig::temperature)},
        {"expert_file", reader(&RunConfig::expert_file)},
        {"expert_strength", reader(&RunConfig::expert_strength)},
        {"n_trajectories", reader(&RunConfig::n_trajectories)},
        {"trajectory_length", reader(&RunConfig::trajectory_length)},
        {"demo_burn_in", reader(&RunConfig::demo_burn_in)},
        {"demos_file", reader(&RunConfig::demos_file)},
        {"algo", reader(&RunConfig::algo)},
        {"iters", reader(&RunConfig::iters)},
        {"eta_theta", reader(&RunConfig::eta_theta)},
        {"eta_omega", reader(&RunConfig::eta_omega)},
        {"min_pairs_per_batch", reader(&RunConfig::min_pairs_per_batch)},
        {"q_theta", reader(&RunConfig::q_theta)},
        {"q_omega", reader(&RunConfig::q_omega)},
        {"greedy_theta_batch", reader(&RunConfig::greedy_theta_batch)},
        {"kappa", reader(&RunConfig::kappa)},
        {"mu", reader(&RunConfig::mu)},
        {"lambda", reader(&RunConfig::lambda)},
        {"reward_updates", reader(&RunConfig::reward_updates)},
        {"checkpoint_every", reader(&RunConfig::checkpoint_every)},
        {"sample_mode", reader(&RunConfig::sample_mode)},
        {"sample_burn_in", reader(&RunConfig::sample_burn_in)},
        {"rollout_q", reader(&RunConfig::rollout_q)},
        {"rollout_horizon", reader(&RunConfig::rollout_horizon)},
        {"demo_mode", reader(&RunConfig::demo_mode)},
        {"exact_gradients", reader(&RunConfig::exact_gradients)},
        {"epsilon", reader(&RunConfig::epsilon)},
        {"batch_cap", reader(&RunConfig::batch_cap)},
        {"policy_file", reader(&RunConfig::policy_file)},
        {"nT_grid", reader(&RunConfig::nT_grid)},
        {"gap_seeds", reader(&RunConfig::gap_seeds)},
        {"gap_trajectory_length", reader(&RunConfig::gap_trajectory_length)},
        {"gap_burn_in", reader(&RunConfig::gap_burn_in)},
        {"delta", reader(&RunConfig::delta)},
        {"beta_kmax", reader(&RunConfig::beta_kmax)},
        {"epsilon_opt", reader(&RunConfig::epsilon_opt)},
        {"n_probe", reader(&RunConfig::n_probe)},
        {"audit_pairs", reader(&RunConfig::audit_pairs)},
        {"noise_probes", reader(&RunConfig::noise_probes)},
        {"mc_draws", reader(&RunConfig::mc_draws)},
        {"probe_radius", reader(&RunConfig::probe_radius)},
        {"safety", reader(&RunConfig::safety)},
        {"mixing_horizon", reader(&RunConfig::mixing_horizon)},
    };
    return specs;
}

void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw InvalidArgument("config key `" + key + "` " + what);
}

std::filesystem::path or_default(const std::filesystem::path& p, const std::filesystem::path& fallback) {
    return p.empty() ? fallback : p;
}

std::filesystem::path demos_path(const RunConfig& cfg) { return or_default(cfg.demos_file, cfg.out / "demos.csv"); }
std::filesystem::path expert_path(const RunConfig& cfg) { return cfg.out / "expert.txt"; }
std::filesystem::path policy_path(const RunConfig& cfg) {
    return or_default(cfg.policy_file, cfg.out / ("policy_" + cfg.algo + ".txt"));
}

Vector induced_chain_fe(const Problem& p, const SoftmaxPolicy& policy) {
    return feature_expectation(p.fs, induced_chain(p.mdp, policy, p.fs).stationary);
}

Vector demo_feature_expectation(const RunConfig& cfg, const Problem& p, const SoftmaxPolicy& expert) {
    if (cfg.demo_mode == "population") return induced_chain_fe(p, expert);
    const std::filesystem::path path = demos_path(cfg);
    if (!std::filesystem::exists(path))
        throw InvalidArgument("demonstrations not found at " + path.string() + "; run demo-gen first or set `demos_file`");
    return empirical_feature_expectation(load_demos(path, p.mdp), p.fs);
}

double expert_reward(const Problem& p, const SoftmaxPolicy& expert) {
    return average_true_reward(p.mdp, induced_chain(p.mdp, expert, p.fs));
}

std::string kv_line(const std::string& key, double v) { return key + " = " + format_double(v) + "\n"; }

// ---------------------------------------------------------------- commands

int cmd_demo_gen(const RunConfig& cfg, std::ostream& log) {
    const Problem p = load_problem(cfg);
    const SoftmaxPolicy expert = load_expert(cfg, p);
    const TrajectoryBatch batch = rollout(p.mdp, expert, p.fs, cfg.n_trajectories, cfg.trajectory_length,
                                          derive_seed(cfg.seed, "demos"), cfg.demo_burn_in);
    std::filesystem::create_directories(cfg.out);
    write_file_atomic(demos_path(cfg), demos_to_csv(batch));
    write_file_atomic(expert_path(cfg), policy_to_kv(expert, p.fs).to_string());
    const PolicyChain chain = induced_chain(p.mdp, expert, p.fs);
    const double fe_gap = (empirical_feature_expectation(batch, p.fs) - feature_expectation(p.fs, chain.stationary)).norm();
    log << "demo-gen: " << cfg.n_trajectories << " trajectories of length " << cfg.trajectory_length << " -> "
        << demos_path(cfg).string() << "\n";
    log << "demo-gen: expert average true reward " << format_double(average_true_reward(p.mdp, chain))
        << ", |empirical G - G| = " << format_double(fe_gap) << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& log, std::ostream& err) {
    const Problem p = load_problem(cfg);
    const SoftmaxPolicy expert = load_expert(cfg, p);
    const Vector demo_fe = demo_feature_expectation(cfg, p, expert);
    const Algorithm algo = cfg.algo == "alt" ? Algorithm::alt : Algorithm::greedy;

    AltSgdConfig opt = optimizer_config(cfg);
    TrainerState state = initial_state(p.fs, opt);
    std::ostringstream summary;
    std::optional<TheoryConstants> constants;
    if (cfg.strict_theory) {
        constants = estimate_theory_constants(p.mdp, p.fs, demo_fe, audit_options(cfg));
        if (algo == Algorithm::alt) {
            const Theorem2Schedule steps = theorem2_step_sizes(*constants);
            const double c0 = initial_potential_constant(p.mdp, p.fs, demo_fe, state, steps, *constants, cfg.temperature);
            const Theorem2Schedule sched = theorem2_schedule(*constants, cfg.epsilon, c0);
            const AltSgdConfig base = opt;
            opt = schedule_config(sched, *constants, cfg.batch_cap, std::max(cfg.iters, 1LL));
            opt.exact_gradients = base.exact_gradients;
            opt.estimator = base.estimator;
            opt.mode = base.mode;
            opt.temperature = base.temperature;
            opt.seed = base.seed;
            opt.reward_updates = base.reward_updates;
            opt.greedy_theta_batch = base.greedy_theta_batch;
            const PotentialCoefficients coef =
                potential_coefficients(sched.eta_omega, sched.eta_theta, constants->L_omega, constants->mu);
            state.potential = PotentialState::start(coef, state.omega, state.theta);
            summary << kv_line("schedule_eta_omega", sched.eta_omega) << kv_line("schedule_eta_theta", sched.eta_theta)
                    << kv_line("schedule_q_theta", sched.q_theta) << kv_line("schedule_q_omega", sched.q_omega)
                    << kv_line("schedule_N", sched.N) << kv_line("schedule_c0", c0);
        } else {
            opt.eta_omega = greedy_step_size(*constants, cfg.epsilon);
            summary << kv_line("schedule_eta_omega", opt.eta_omega);
        }
        summary << kv_line("L_omega", constants->L_omega) << kv_line("S_omega", constants->S_omega)
                << kv_line("M_G", constants->M_G);
    }
    std::vector<std::string> warnings = validate(opt, constants);
    for (const std::string& w : warnings) err << "warning: " << w << "\n";

    std::filesystem::create_directories(cfg.out);
    const std::filesystem::path ckpt_dir = cfg.out / "checkpoints";
    if (cfg.checkpoint_every > 0) std::filesystem::create_directories(ckpt_dir);
    auto on_iteration = [&](const TrainerState& s) {
        const long long done = s.iteration - 1;
        if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0)
            write_file_atomic(ckpt_dir / (cfg.algo + "_iter_" + std::to_string(done) + ".txt"),
                              checkpoint_to_kv(s, p.fs, opt).to_string());
    };

    const TrainResult result = train(algo, opt, p.mdp, p.fs, demo_fe, cfg.iters, state, on_iteration);

    std::ostringstream metrics;
    metrics << metrics_header() << "\n";
    for (const MetricsRow& r : result.rows) metrics << format_metrics_row(r) << "\n";
    write_file_atomic(cfg.out / ("metrics_" + cfg.algo + ".csv"), metrics.str());
    write_file_atomic(cfg.out / ("policy_" + cfg.algo + ".txt"),
                      checkpoint_to_kv(result.final_state, p.fs, opt).to_string());

    long long increases = 0;
    for (std::size_t i = 1; i < result.rows.size(); ++i) {
        const double a = result.rows[i - 1].potential, b = result.rows[i].potential;
        if (std::isfinite(a) && std::isfinite(b) && b > a + 1e-9) ++increases;
    }
    const double final_reward = result.rows.back().avg_true_reward;
    const double target = expert_reward(p, expert);
    summary << "algo = " << cfg.algo << "\n"
            << "iterations = " << cfg.iters << "\n"
            << kv_line("final_avg_true_reward", final_reward) << kv_line("expert_avg_true_reward", target)
            << kv_line("reward_ratio", final_reward / target) << kv_line("final_J", result.rows.back().J_running)
            << kv_line("final_I", result.rows.back().I_running) << "potential_increases = " << increases << "\n"
            << "warnings = " << warnings.size() << "\n";
    write_file_atomic(cfg.out / ("train_" + cfg.algo + "_summary.txt"), summary.str());

    log << "train(" << cfg.algo << "): " << cfg.iters << " iterations, final average true reward "
        << format_double(final_reward) << " (expert " << format_double(target) << ")\n";
    if (state.potential) log << "train(" << cfg.algo << "): potential increases " << increases << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& log) {
    const Problem p = load_problem(cfg);
    const std::filesystem::path path = policy_path(cfg);
    const SoftmaxPolicy policy = load_policy(path, p.fs);
    const PolicyOracle oracle(p.mdp, p.fs, policy);
    std::ostringstream out;
    out << "metric,value\n";
    const double reward = average_true_reward(p.mdp, oracle.chain());
    out << "avg_true_reward," << format_double(reward) << "\n";
    out << "entropy," << format_double(oracle.entropy()) << "\n";
    std::optional<SoftmaxPolicy> expert;
    try {
        expert = load_expert(cfg, p);
    } catch (const MissingExpert&) {
    }
    if (expert) {
        const PolicyChain ec = induced_chain(p.mdp, *expert, p.fs);
        const double er = average_true_reward(p.mdp, ec);
        out << "expert_avg_true_reward," << format_double(er) << "\n";
        out << "reward_ratio," << format_double(reward / er) << "\n";
        out << "r_distance_to_expert," << format_double(exact_r_distance(p.fs, oracle.chain(), ec, cfg.kappa)) << "\n";
        const Vector demo = feature_expectation(p.fs, ec.stationary);
        out << "F_at_theta_star," << format_double(oracle.objective(oracle.theta_star(cfg.mu, demo), cfg.lambda, cfg.mu, demo))
            << "\n";
    }
    std::filesystem::create_directories(cfg.out);
    write_file_atomic(cfg.out / "eval.csv", out.str());
    log << "eval: " << path.string() << " average true reward " << format_double(reward) << "\n";
    return 0;
}

struct BetaFit {
    double beta0 = 0.0, beta1 = 1.0, alpha = 1.0;
};

BetaFit expert_beta(const RunConfig& cfg, const PolicyChain& chain) {
    const BetaMixingCurve c = beta_mixing_curve(chain, cfg.beta_kmax);
    BetaFit f;
    if (!c.exact) {
        f.beta0 = c.beta0;
        f.beta1 = c.beta1;
        f.alpha = c.alpha;
    }
    return f;
}

Theorem1Terms bound_at(const RunConfig& cfg, const Problem& p, const BetaFit& beta, long long nT) {
    const double B_r = std::numbers::sqrt2 * cfg.kappa * p.fs.rho_g;
    const auto log_cov = [&](double eps) { return covering_bound_kernel(cfg.kappa, p.fs.rho_g, p.fs.q, eps); };
    return theorem1_bound(B_r, log_cov, 1, nT, cfg.delta, beta.beta0, beta.beta1, beta.alpha, cfg.epsilon_opt);
}

int cmd_gen_gap(const RunConfig& cfg, std::ostream& log) {
    const Problem p = load_problem(cfg);
    const SoftmaxPolicy expert = load_expert(cfg, p);
    const PolicyChain expert_chain = induced_chain(p.mdp, expert, p.fs);
    const std::filesystem::path lp = policy_path(cfg);
    const SoftmaxPolicy learned =
        std::filesystem::exists(lp) ? load_policy(lp, p.fs) : SoftmaxPolicy::uniform(p.fs);
    const PolicyChain learned_chain = induced_chain(p.mdp, learned, p.fs);

    GapOptions go;
    go.trajectory_length = cfg.gap_trajectory_length;
    go.burn_in = cfg.gap_burn_in;
    go.seed = cfg.seed;
    const GapExperiment ex = generalization_gap_experiment(p.mdp, p.fs, expert_chain.policy, expert_chain, learned_chain,
                                                           cfg.kappa, cfg.nT_grid, cfg.gap_seeds, go);
    std::ostringstream csv;
    csv << "nT,seed,gap,empirical_d,exact_d\n";
    for (const GapRow& r : ex.rows)
        csv << r.nT << ',' << r.seed << ',' << format_double(r.gap) << ',' << format_double(r.empirical_d) << ','
            << format_double(r.exact_d) << "\n";

    const BetaFit beta = expert_beta(cfg, expert_chain);
    std::ostringstream summary;
    summary << "slope = " << format_double(ex.slope) << "\n";
    bool dominated = true;
    for (std::size_t g = 0; g < ex.nT_grid.size(); ++g) {
        const Theorem1Terms t = bound_at(cfg, p, beta, ex.nT_grid[g]);
        double worst = 0.0;
        for (const GapRow& r : ex.rows)
            if (r.nT == ex.nT_grid[g]) worst = std::max(worst, r.gap);
        dominated = dominated && worst <= t.bound;
        summary << "median_gap_" << ex.nT_grid[g] << " = " << format_double(ex.median_gap[g]) << "\n"
                << "bound_" << ex.nT_grid[g] << " = " << format_double(t.bound) << "\n";
    }
    summary << "bound_dominates = " << (dominated ? "true" : "false") << "\n";

    std::filesystem::create_directories(cfg.out);
    write_file_atomic(cfg.out / "gen_gap.csv", csv.str());
    write_file_atomic(cfg.out / "gen_gap_summary.txt", summary.str());
    log << "gen-gap: log-log slope " << format_double(ex.slope) << ", bound dominates: " << (dominated ? "yes" : "no")
        << "\n";
    return 0;
}

int cmd_bounds(const RunConfig& cfg, std::ostream& log) {
    const Problem p = load_problem(cfg);
    const SoftmaxPolicy expert = load_expert(cfg, p);
    const BetaFit beta = expert_beta(cfg, induced_chain(p.mdp, expert, p.fs));
    std::ostringstream csv;
    csv << "nT,bound,b,zeta\n";
    for (const long long nT : cfg.nT_grid) {
        const Theorem1Terms t = bound_at(cfg, p, beta, nT);
        csv << nT << ',' << format_double(t.bound) << ',' << t.b << ',' << format_double(t.zeta) << "\n";
    }
    std::filesystem::create_directories(cfg.out);
    write_file_atomic(cfg.out / "bounds.csv", csv.str());
    log << "bounds: " << cfg.nT_grid.size() << " rows -> " << (cfg.out / "bounds.csv").string() << "\n";
    return 0;
}

int cmd_audit(const RunConfig& cfg, std::ostream& log) {
    const Problem p = load_problem(cfg);
    Vector demo_fe;
    if (std::filesystem::exists(demos_path(cfg))) {
        demo_fe = empirical_feature_expectation(load_demos(demos_path(cfg), p.mdp), p.fs);
    } else {
        demo_fe = induced_chain_fe(p, load_expert(cfg, p));
    }
    const AuditReport rep = run_audit(p.mdp, p.fs, demo_fe, audit_options(cfg));
    std::filesystem::create_directories(cfg.out);
    write_file_atomic(cfg.out / "audit.csv", audit_csv(rep));
    write_file_atomic(cfg.out / "constants.txt", constants_to_kv(rep).to_string());
    for (const AuditRow& r : rep.rows)
        if (!r.ok) log << "audit: " << r.name << " observed " << format_double(r.observed) << " exceeds bound "
                       << format_double(r.bound) << "\n";
    log << "audit: " << rep.rows.size() << " constants, all within bounds: " << (rep.all_ok() ? "yes" : "no") << "\n";
    return 0;
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const KeySpec& s : key_specs()) k.emplace_back(s.key);
        return k;
    }();
    return keys;
}

RunConfig run_config_from_kv(const KvDocument& doc, const std::filesystem::path& base_dir) {
    for (const std::string& key : doc.keys()) {
        const auto& specs = key_specs();
        if (std::none_of(specs.begin(), specs.end(), [&](const KeySpec& s) { return key == s.key; }))
            throw ParseError("unknown config key `" + key + "`");
    }
    RunConfig cfg;
    for (const KeySpec& s : key_specs()) {
        if (!doc.has(s.key)) continue;
        s.read(cfg, doc, s.key);
    }
    for (std::filesystem::path* p : {&cfg.mdp_file, &cfg.features_file, &cfg.expert_file, &cfg.demos_file, &cfg.policy_file})
        if (!p->empty() && p->is_relative() && !base_dir.empty()) *p = base_dir / *p;
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    return run_config_from_kv(KvDocument::load(path), path.parent_path());
}

void validate(const RunConfig& c) {
    require(!c.out.empty(), "out", "must not be empty");
    require(c.mdp_states >= 1, "mdp_states", "must be at least 1");
    require(c.mdp_actions >= 1, "mdp_actions", "must be at least 1");
    require(c.mdp_concentration > 0.0, "mdp_concentration", "must be positive");
    require(c.d_state >= 1, "d_state", "must be at least 1");
    require(c.d_action >= 1, "d_action", "must be at least 1");
    require(c.n_features >= 1, "n_features", "must be at least 1");
    require(c.bandwidth > 0.0, "bandwidth", "must be positive");
    require(c.temperature > 0.0, "temperature", "must be positive");
    require(std::isfinite(c.expert_strength) && c.expert_strength >= 0.0, "expert_strength", "must be finite and nonnegative");
    require(c.n_trajectories >= 1, "n_trajectories", "must be at least 1");
    require(c.trajectory_length >= 1, "trajectory_length", "must be at least 1");
    require(c.demo_burn_in >= 0, "demo_burn_in", "must be nonnegative");
    require(c.algo == "alt" || c.algo == "greedy", "algo", "must be alt or greedy");
    require(c.iters >= 0, "iters", "must be nonnegative");
    require(c.eta_theta > 0.0, "eta_theta", "must be positive");
    require(c.eta_omega > 0.0, "eta_omega", "must be positive");
    require(c.min_pairs_per_batch >= 1, "min_pairs_per_batch", "must be at least 1");
    require(c.q_theta.value_or(1) >= 1, "q_theta", "must be at least 1");
    require(c.q_omega.value_or(1) >= 1, "q_omega", "must be at least 1");
    require(c.greedy_theta_batch.value_or(1) >= 1, "greedy_theta_batch", "must be at least 1");
    require(c.kappa > 0.0, "kappa", "must be positive");
    require(c.mu > 0.0, "mu", "must be positive");
    require(c.lambda >= 0.0, "lambda", "must be nonnegative");
    require(c.reward_updates >= 1, "reward_updates", "must be at least 1");
    require(c.checkpoint_every >= 0, "checkpoint_every", "must be nonnegative");
    require(c.sample_mode == "stationary" || c.sample_mode == "trajectory", "sample_mode", "must be stationary or trajectory");
    require(c.sample_burn_in >= 0, "sample_burn_in", "must be nonnegative");
    require(c.rollout_horizon >= 1, "rollout_horizon", "must be at least 1");
    require(c.demo_mode == "sample" || c.demo_mode == "population", "demo_mode", "must be sample or population");
    require(c.epsilon > 0.0, "epsilon", "must be positive");
    require(c.batch_cap >= 1, "batch_cap", "must be at least 1");
    require(!c.nT_grid.empty(), "nT_grid", "must not be empty");
    for (const long long nT : c.nT_grid) require(nT >= 2, "nT_grid", "entries must be at least 2");
    require(c.gap_seeds >= 1, "gap_seeds", "must be at least 1");
    require(c.gap_trajectory_length >= 1, "gap_trajectory_length", "must be at least 1");
    for (const long long nT : c.nT_grid)
        require(nT % std::min<long long>(c.gap_trajectory_length, nT) == 0, "nT_grid",
                "entries must be multiples of gap_trajectory_length");
    require(c.gap_burn_in >= 0, "gap_burn_in", "must be nonnegative");
    require(c.delta > 0.0 && c.delta < 1.0, "delta", "must lie in (0, 1)");
    require(c.beta_kmax >= 1, "beta_kmax", "must be at least 1");
    require(c.epsilon_opt >= 0.0, "epsilon_opt", "must be nonnegative");
    require(c.n_probe >= 100, "n_probe", "must be at least 100");
    require(c.audit_pairs >= 1, "audit_pairs", "must be at least 1");
    require(c.noise_probes >= 1, "noise_probes", "must be at least 1");
    require(c.mc_draws >= 2, "mc_draws", "must be at least 2");
    require(c.probe_radius > 0.0, "probe_radius", "must be positive");
    require(c.safety >= 1.0, "safety", "must be at least 1");
    require(c.mixing_horizon >= 1, "mixing_horizon", "must be at least 1");
}

void apply_overrides(RunConfig& cfg, const CliOverrides& o) {
    if (o.seed) cfg.seed = *o.seed;
    if (o.out) cfg.out = *o.out;
    if (o.algo) cfg.algo = *o.algo;
    if (o.strict_theory) cfg.strict_theory = true;
    if (o.reward_updates) cfg.reward_updates = *o.reward_updates;
    if (o.iters) cfg.iters = *o.iters;
}

Problem load_problem(const RunConfig& cfg) {
    Problem p;
    p.mdp = cfg.mdp_file.empty()
                ? random_mdp(cfg.mdp_states, cfg.mdp_actions, cfg.mdp_seed.value_or(derive_seed(cfg.seed, "mdp")),
                             cfg.mdp_concentration)
                : load_mdp(cfg.mdp_file);
    if (!cfg.features_file.empty()) {
        p.fs = load_features(cfg.features_file);
        if (p.fs.n_states != p.mdp.n_states || p.fs.n_actions != p.mdp.n_actions)
            throw InvalidArgument("features file does not match the MDP dimensions");
    } else {
        FeatureOptions fo;
        fo.d_state = cfg.d_state;
        fo.d_action = cfg.d_action;
        fo.q = cfg.n_features;
        fo.bandwidth = cfg.bandwidth;
        fo.seed = cfg.feature_seed.value_or(derive_seed(cfg.seed, "features"));
        p.fs = build_features(p.mdp, fo);
    }
    return p;
}

SoftmaxPolicy load_expert(const RunConfig& cfg, const Problem& p) {
    if (!cfg.expert_file.empty()) return load_policy(cfg.expert_file, p.fs);
    if (!p.mdp.eval_reward)
        throw MissingExpert("the MDP has no eval_reward and no `expert_file` was given");
    const PolicyIterationResult pi = average_reward_policy_iteration(p.mdp);
    return softened_deterministic_policy(p.fs, pi.actions, cfg.expert_strength);
}

AltSgdConfig optimizer_config(const RunConfig& c) {
    AltSgdConfig o;
    o.eta_theta = c.eta_theta;
    o.eta_omega = c.eta_omega;
    o.q_theta = c.q_theta.value_or(c.min_pairs_per_batch);
    o.q_omega = c.q_omega.value_or(c.min_pairs_per_batch);
    o.kappa = c.kappa;
    o.mu = c.mu;
    o.lambda = c.lambda;
    o.max_iters = c.iters;
    o.mode = c.demo_mode == "population" ? DemoMode::population : DemoMode::sample;
    o.reward_updates = c.reward_updates;
    o.strict_theory = c.strict_theory;
    o.exact_gradients = c.exact_gradients;
    o.greedy_theta_batch = c.greedy_theta_batch.value_or(c.min_pairs_per_batch);
    o.temperature = c.temperature;
    o.estimator.mode = c.sample_mode == "trajectory" ? SampleMode::trajectory : SampleMode::stationary;
    o.estimator.burn_in = c.sample_burn_in;
    o.estimator.rollout_q = c.rollout_q;
    o.estimator.rollout_horizon = c.rollout_horizon;
    o.seed = derive_seed(c.seed, "train-" + c.algo);
    return o;
}

AuditOptions audit_options(const RunConfig& c) {
    AuditOptions a;
    a.n_probe = c.n_probe;
    a.audit_pairs = c.audit_pairs;
    a.noise_probes = c.noise_probes;
    a.mc_draws = c.mc_draws;
    a.regularity.radius = c.probe_radius;
    a.regularity.safety = c.safety;
    a.regularity.kappa = c.kappa;
    a.regularity.mixing_horizon = c.mixing_horizon;
    a.regularity.temperature = c.temperature;
    a.mu = c.mu;
    a.lambda = c.lambda;
    a.greedy_theta_batch = c.greedy_theta_batch.value_or(c.min_pairs_per_batch);
    a.greedy_omega_batch = c.q_omega.value_or(c.min_pairs_per_batch);
    a.moment_safety = c.safety;
    a.seed = derive_seed(c.seed, "audit");
    return a;
}

int run_command(const std::string& command, const RunConfig& cfg, std::ostream& log, std::ostream& err) {
    static const std::vector<std::string> commands = {"demo-gen", "train", "eval", "gen-gap", "bounds", "audit"};
    if (std::find(commands.begin(), commands.end(), command) == commands.end()) {
        err << "error: unknown command `" << command << "`\n";
        return 2;
    }
    try {
        validate(cfg);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    try {
        if (command == "demo-gen") return cmd_demo_gen(cfg, log);
        if (command == "eval") return cmd_eval(cfg, log);
        if (command == "gen-gap") return cmd_gen_gap(cfg, log);
        if (command == "bounds") return cmd_bounds(cfg, log);
        if (command == "audit") return cmd_audit(cfg, log);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    // train: configuration problems surface before the first iteration, anything later is
    // an invariant trip.
    try {
        return cmd_train(cfg, log, err);
    } catch (const BallViolation& e) {
        err << "invariant violated: " << e.what() << "\n";
        return 3;
    } catch (const InvalidArgument& e) {
        const std::string what = e.what();
        const bool tripped = what.find("iteration") != std::string::npos;
        err << (tripped ? "invariant violated: " : "error: ") << what << "\n";
        return tripped ? 3 : 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int cli_main(int argc, char** argv) {
    CLI::App app{"Imitation learning on tabular average-reward MDPs"};
    std::string command;
    std::string config_path;
    CliOverrides o;
    std::uint64_t seed = 0;
    std::string out;
    std::string algo;
    int reward_updates = 0;
    long long iters = 0;
    app.add_option("command", command, "demo-gen | train | eval | gen-gap | bounds | audit")
        ->required()
        ->check(CLI::IsMember({"demo-gen", "train", "eval", "gen-gap", "bounds", "audit"}));
    app.add_option("--config", config_path, "flat key = value configuration file");
    auto* seed_opt = app.add_option("--seed", seed, "root seed");
    auto* out_opt = app.add_option("--out", out, "output directory");
    auto* algo_opt = app.add_option("--algo", algo, "alt | greedy")->check(CLI::IsMember({"alt", "greedy"}));
    app.add_flag("--strict-theory", o.strict_theory, "use the theoretical step sizes and batch sizes");
    auto* ru_opt = app.add_option("--reward-updates", reward_updates, "reward ascent steps per iteration");
    auto* iters_opt = app.add_option("--iters", iters, "iterations");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    if (*seed_opt) o.seed = seed;
    if (*out_opt) o.out = out;
    if (*algo_opt) o.algo = algo;
    if (*ru_opt) o.reward_updates = reward_updates;
    if (*iters_opt) o.iters = iters;

    RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = load_run_config(config_path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    apply_overrides(cfg, o);
    return run_command(command, cfg, std::cout, std::cerr);
}

}  // namespace gail
