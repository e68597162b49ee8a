#pragma once

// Run configuration and the command implementations behind the `gail` executable.
// Every command is a deterministic function of its configuration; all randomness comes
// from `seed` through named sub-streams.

#include "gail/audit.hpp"
#include "gail/features.hpp"
#include "gail/kv_text.hpp"
#include "gail/mdp.hpp"
#include "gail/optimize.hpp"
#include "gail/policy.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gail {

struct RunConfig {
    // global
    std::uint64_t seed = 0;
    std::filesystem::path out = "out";
    bool strict_theory = false;

    // problem; an empty file name means "generate from the seed"
    std::filesystem::path mdp_file;
    int mdp_states = 5;
    int mdp_actions = 3;
    std::optional<std::uint64_t> mdp_seed;
    double mdp_concentration = 1.0;
    std::filesystem::path features_file;
    int d_state = 5;
    int d_action = 3;
    int n_features = 16;
    double bandwidth = 1.0;
    std::optional<std::uint64_t> feature_seed;
    double temperature = 1.0;

    // demo-gen
    std::filesystem::path expert_file;
    double expert_strength = 5.0;
    int n_trajectories = 500;
    int trajectory_length = 200;
    int demo_burn_in = 200;
    std::filesystem::path demos_file;  // default <out>/demos.csv

    // train
    std::string algo = "alt";
    long long iters = 2000;
    double eta_theta = 0.1;
    double eta_omega = 5.0;
    long long min_pairs_per_batch = 8192;  // default for the three batch sizes below
    std::optional<long long> q_theta;
    std::optional<long long> q_omega;
    std::optional<long long> greedy_theta_batch;
    double kappa = 1.0;
    double mu = 0.3;
    double lambda = 0.0;
    int reward_updates = 1;
    long long checkpoint_every = 500;
    std::string sample_mode = "stationary";
    int sample_burn_in = 200;
    bool rollout_q = false;
    int rollout_horizon = 60;
    std::string demo_mode = "sample";
    bool exact_gradients = false;
    double epsilon = 0.01;
    long long batch_cap = 1'000'000'000'000LL;

    // eval
    std::filesystem::path policy_file;  // default <out>/policy_<algo>.txt

    // gen-gap and bounds
    std::vector<long long> nT_grid{1000, 10000, 100000};
    int gap_seeds = 20;
    int gap_trajectory_length = 200;
    int gap_burn_in = 200;
    double delta = 0.05;
    int beta_kmax = 200;
    double epsilon_opt = 0.0;

    // audit
    int n_probe = 200;
    int audit_pairs = 1000;
    int noise_probes = 16;
    int mc_draws = 200;
    double probe_radius = 5.0;
    double safety = 1.5;
    int mixing_horizon = 200;
};

/// Every key the config file accepts.
const std::vector<std::string>& config_keys();

/// Reads a flat key-value document. Unknown keys throw ParseError; relative file names are
/// resolved against base_dir.
RunConfig run_config_from_kv(const KvDocument& doc, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Throws InvalidArgument naming the first offending key.
void validate(const RunConfig& cfg);

/// Command-line flags; set fields replace the config values.
struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    std::optional<std::string> algo;
    bool strict_theory = false;
    std::optional<int> reward_updates;
    std::optional<long long> iters;
};
void apply_overrides(RunConfig& cfg, const CliOverrides& overrides);

struct Problem {
    TabularMDP mdp;
    FeatureSystem fs;
};
Problem load_problem(const RunConfig& cfg);

/// Expert from expert_file, or the policy-iteration optimum of eval_reward softened to a
/// softmax with logit gap expert_strength. Throws MissingExpert when neither exists.
SoftmaxPolicy load_expert(const RunConfig& cfg, const Problem& problem);

AltSgdConfig optimizer_config(const RunConfig& cfg);
AuditOptions audit_options(const RunConfig& cfg);

/// Runs one of demo-gen, train, eval, gen-gap, bounds, audit. Returns the exit code:
/// 0 success, 1 runtime failure, 2 bad configuration, 3 invariant trip during training.
int run_command(const std::string& command, const RunConfig& cfg, std::ostream& log, std::ostream& err);

/// Entry point of the executable.
int cli_main(int argc, char** argv);

}  // namespace gail
