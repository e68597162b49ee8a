#pragma once

#include "gail/kv_text.hpp"
#include "gail/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace gail {

/// Finite MDP. Transition rows are indexed by the flat pair index s * n_actions + a.
struct TabularMDP {
    int n_states = 0;
    int n_actions = 0;
    Matrix transition;                 // (n_states * n_actions) x n_states
    Vector initial_dist;               // n_states
    std::optional<Matrix> eval_reward;  // n_states x n_actions, evaluation only

    int n_pairs() const { return n_states * n_actions; }
    double prob(int s, int a, int next) const { return transition(pair_index(s, a, n_actions), next); }

    /// Throws InvalidArgument naming the first violated row.
    void validate() const;
};

TabularMDP mdp_from_kv(const KvDocument& doc);
KvDocument mdp_to_kv(const TabularMDP& mdp);
TabularMDP load_mdp(const std::filesystem::path& path);

/// Seeded random MDP with Dirichlet(concentration) transition rows and U[0,1) rewards.
TabularMDP random_mdp(int n_states, int n_actions, std::uint64_t seed, double concentration = 1.0);

/// (chi, upsilon) with d_t <= 1.05 * chi * upsilon^t over the measured range.
struct MixingFit {
    double chi = 1.0;
    double upsilon = 0.5;
    bool exact = false;  // chain mixed in one step; upsilon is machine epsilon
};

/// Markov chain on state-action pairs induced by a policy.
struct PolicyChain {
    int n_states = 0;
    int n_actions = 0;
    Matrix policy;      // n_states x n_actions, pi(a|s)
    Matrix kernel;      // pairs x pairs, P_pi[(s,a)][(s',a')]
    Vector stationary;  // pairs
    std::uint64_t policy_fingerprint = 0;
    std::optional<MixingFit> mixing_fit;

    int n_pairs() const { return n_states * n_actions; }
    /// rho0(s, a) = p0(s) pi(a|s).
    Vector initial_pair_dist(const TabularMDP& mdp) const;
};

struct ChainOptions {
    long long max_iterations = 100000;
    double fixed_point_tol = 1e-12;
    double start_disagreement_tol = 1e-8;
};

/// Builds P_pi(s',a'|s,a) = pi(a'|s') P(s'|s,a) and its stationary distribution.
/// Throws NonErgodicChain if power iteration stalls or two starts disagree.
PolicyChain induced_chain(const TabularMDP& mdp, const Matrix& policy, std::uint64_t fingerprint = 0,
                          const ChainOptions& options = {});

/// Fits a geometric envelope to TV(rho0 P^t, rho) for t = 1..horizon.
MixingFit fit_mixing(const PolicyChain& chain, const Vector& rho0, int horizon);

/// Envelope over all point-mass starts, t = 0..horizon. Dominates fit_mixing for any rho0.
MixingFit fit_mixing_worst_case(const PolicyChain& chain, int horizon);

/// Fits log d_t = log chi + t log upsilon on the leading entries above 1e-10, then inflates
/// until d_t <= slack * chi * upsilon^t at every entry above 1e-10. Smaller values are at the
/// precision of the stationary vector. `curve[i]` is d at t = first_t + i.
MixingFit fit_geometric_envelope(const std::vector<double>& curve, int first_t, double slack);

struct BetaMixingCurve {
    std::vector<double> beta_hat;  // beta_hat[k-1] for k = 1..kmax
    double beta0 = 0.0;
    double beta1 = 1.0;
    double alpha = 1.0;
    bool exact = false;  // beta_hat identically zero
};

/// beta_hat(k) = max_x TV(P^k(x, .), rho), an upper bound on the beta-mixing coefficient
/// of the stationary chain, with a fitted envelope beta0 * exp(-beta1 * k).
BetaMixingCurve beta_mixing_curve(const PolicyChain& chain, int kmax);

/// Average-reward optimal deterministic policy for eval_reward (policy iteration).
struct PolicyIterationResult {
    std::vector<int> actions;
    double gain = 0.0;
    int iterations = 0;
};
PolicyIterationResult average_reward_policy_iteration(const TabularMDP& mdp);

}  // namespace gail
