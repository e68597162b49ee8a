#pragma once

// Trajectory simulation, demonstration files and the stochastic gradient estimators.
//
// A batch average of q i.i.d. draws from a finite distribution only depends on the draw
// counts, so every stationary-mode estimator draws a multinomial count vector and
// reduces over pairs. The result has exactly the distribution of the naive loop and
// costs O(pairs) regardless of q.

#include "gail/features.hpp"
#include "gail/linalg.hpp"
#include "gail/mdp.hpp"
#include "gail/oracles.hpp"
#include "gail/policy.hpp"
#include "gail/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace gail {

struct TrajectoryBatch {
    int n = 0;
    int T = 0;
    std::vector<int> states;   // n * T, trajectory-major
    std::vector<int> actions;  // n * T
    std::uint64_t seed = 0;

    long long size() const { return static_cast<long long>(n) * T; }
    int state(int i, int t) const { return states[static_cast<std::size_t>(i) * T + t]; }
    int action(int i, int t) const { return actions[static_cast<std::size_t>(i) * T + t]; }
};

/// Simulates n trajectories of T retained steps under the policy table (n_states x n_actions).
/// Trajectory i uses its own counter stream, so batches are reproducible and any prefix of
/// trajectories is the same regardless of n. The first burn_in steps are discarded.
TrajectoryBatch rollout(const TabularMDP& mdp, const Matrix& policy, int n, int T, std::uint64_t seed,
                        int burn_in = 0);
TrajectoryBatch rollout(const TabularMDP& mdp, const SoftmaxPolicy& policy, const FeatureSystem& fs, int n, int T,
                        std::uint64_t seed, int burn_in = 0);

/// CSV with header `traj,t,state,action`.
std::string demos_to_csv(const TrajectoryBatch& batch);
TrajectoryBatch demos_from_csv(std::istream& in, const TabularMDP& mdp);
TrajectoryBatch load_demos(const std::filesystem::path& path, const TabularMDP& mdp);

/// Concatenates trajectories; both batches must share T.
TrajectoryBatch concatenate(const TrajectoryBatch& a, const TrajectoryBatch& b);

/// Empirical distribution of the retained pairs.
Vector empirical_pair_distribution(const TrajectoryBatch& batch, int n_states, int n_actions);

/// (1/nT) sum of g over the retained pairs.
Vector empirical_feature_expectation(const TrajectoryBatch& batch, const FeatureSystem& fs);

/// Index drawn from a cumulative table with cdf.back() == total mass.
int sample_from_cdf(const std::vector<double>& cdf, double u);

/// Multinomial(batch, dist) counts via conditional binomials.
std::vector<long long> multinomial_counts(const Vector& dist, long long batch, CounterRng& rng);

enum class GradKind { theta, omega, theta_star };

struct StochGrad {
    Vector value;
    long long batch_size = 1;
    GradKind kind = GradKind::theta;
};

enum class SampleMode {
    stationary,  // pairs drawn exactly from rho_pi
    trajectory,  // consecutive pairs of one simulated trajectory after a burn-in
};

struct EstimatorOptions {
    SampleMode mode = SampleMode::stationary;
    int burn_in = 200;
    /// Replace the exact Q in the omega estimator by truncated simulated returns.
    bool rollout_q = false;
    int rollout_horizon = 60;
};

/// Counts of the q pairs an estimator averages over.
std::vector<long long> draw_pair_counts(const TabularMDP& mdp, const PolicyChain& chain, long long q,
                                        std::uint64_t seed, const EstimatorOptions& options = {});

/// Average of q single-sample estimates g(s_j, a_j) - demo_fe - mu theta.
StochGrad stoch_grad_theta(const TabularMDP& mdp, const FeatureSystem& fs, const PolicyOracle& oracle,
                           const Vector& theta, double mu, const Vector& demo_fe, long long q_theta,
                           std::uint64_t seed, const EstimatorOptions& options = {});
StochGrad stoch_grad_theta(const TabularMDP& mdp, const FeatureSystem& fs, const SoftmaxPolicy& policy,
                           const KernelReward& reward, double mu, const Vector& demo_fe, long long q_theta,
                           std::uint64_t seed, const EstimatorOptions& options = {});

/// Average of q samples of score(s_j, a_j) (Q_theta(s_j, a_j) - lambda Q_H(s_j, a_j)).
StochGrad stoch_grad_omega(const TabularMDP& mdp, const FeatureSystem& fs, const PolicyOracle& oracle,
                           const Vector& theta, double lambda, long long q_omega, std::uint64_t seed,
                           const EstimatorOptions& options = {});
StochGrad stoch_grad_omega(const TabularMDP& mdp, const FeatureSystem& fs, const SoftmaxPolicy& policy,
                           const KernelReward& reward, double lambda, long long q_omega, std::uint64_t seed,
                           const EstimatorOptions& options = {});

/// (1/mu)(sampled feature expectation under rho_pi - demo_fe); unconstrained.
StochGrad theta_star_estimator(const TabularMDP& mdp, const FeatureSystem& fs, const PolicyOracle& oracle,
                               const Vector& demo_fe, double mu, long long batch, std::uint64_t seed,
                               const EstimatorOptions& options = {});
StochGrad theta_star_estimator(const TabularMDP& mdp, const FeatureSystem& fs, const SoftmaxPolicy& policy,
                               const Vector& demo_fe, double mu, long long batch, std::uint64_t seed,
                               const EstimatorOptions& options = {});

/// Second moments of the estimator noise.
///   M_theta: per-sample E|g(x) - G|^2
///   M_omega: per-sample E|score(x)|^2 (kappa |Q_g(x)| + lambda |Q_H(x)|)^2, which bounds the
///            noise second moment for every theta in the kappa ball
///   M_G:     E|greedy omega estimate|^2 at the configured batch sizes, averaged over theta-hat
struct NoiseMoments {
    double M_theta = 0.0;
    double M_omega = 0.0;
    double M_G = 0.0;
};

struct NoiseMomentOptions {
    double kappa = 1.0;
    double lambda = 0.0;
    double mu = 0.3;
    long long greedy_theta_batch = 8192;
    long long greedy_omega_batch = 8192;
    int theta_draws = 64;
};

NoiseMoments noise_moments(const TabularMDP& mdp, const FeatureSystem& fs, const PolicyOracle& oracle,
                           const Vector& demo_fe, std::uint64_t seed, const NoiseMomentOptions& options);

/// Maximum of noise_moments over the uniform policy and n_probe policies drawn in the ball
/// of the given radius.
NoiseMoments measure_noise_moments(const TabularMDP& mdp, const FeatureSystem& fs, const Vector& demo_fe,
                                   int n_probe, double radius, std::uint64_t seed,
                                   const NoiseMomentOptions& options);

}  // namespace gail
