#pragma once

#include "gail/features.hpp"
#include "gail/kv_text.hpp"
#include "gail/linalg.hpp"
#include "gail/mdp.hpp"

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace gail {

/// Log-linear policy pi(a|s) proportional to exp(omega_a . psi_s / temperature).
/// omega is stored flat, block a occupying entries [a * d_state, (a + 1) * d_state).
class SoftmaxPolicy {
public:
    SoftmaxPolicy() = default;
    SoftmaxPolicy(int n_actions, int d_state, double temperature = 1.0);
    SoftmaxPolicy(Vector omega, int n_actions, int d_state, double temperature = 1.0);

    static SoftmaxPolicy uniform(const FeatureSystem& fs) { return SoftmaxPolicy(fs.n_actions, fs.d_state); }

    const Vector& omega() const { return omega_; }
    int n_actions() const { return n_actions_; }
    int d_state() const { return d_state_; }
    double temperature() const { return temperature_; }
    Eigen::Index dim() const { return omega_.size(); }

    SoftmaxPolicy with_omega(Vector omega) const { return SoftmaxPolicy(std::move(omega), n_actions_, d_state_, temperature_); }

    /// n_states x n_actions table of pi(a|s); computed with a max-shift for stability.
    Matrix probabilities(const FeatureSystem& fs) const;
    /// n_states x n_actions table of log pi(a|s).
    Matrix log_probabilities(const FeatureSystem& fs) const;

    std::uint64_t fingerprint() const;

private:
    void check(const FeatureSystem& fs) const;

    Vector omega_;
    int n_actions_ = 0;
    int d_state_ = 0;
    double temperature_ = 1.0;
};

/// Builds the chain induced by a softmax policy, tagged with the policy fingerprint.
PolicyChain induced_chain(const TabularMDP& mdp, const SoftmaxPolicy& policy, const FeatureSystem& fs);

/// Score function (e_a - pi(.|s)) (x) psi_s / temperature.
Vector log_prob_grad(const SoftmaxPolicy& policy, const FeatureSystem& fs, int s, int a);

/// All scores at once: row = flat pair index, columns = omega coordinates.
Matrix score_table(const SoftmaxPolicy& policy, const FeatureSystem& fs);

/// Stationary conditional entropy E_rho[-log pi(a|s)]. Throws ChainMismatch if `chain`
/// was built from a different omega.
double entropy(const SoftmaxPolicy& policy, const FeatureSystem& fs, const PolicyChain& chain);

/// Constants of the policy-class regularity assumptions.
struct RegularityConstants {
    double B_omega = 0.0;  // score bound
    double S_pi = 0.0;     // score Lipschitz
    double L_rho = 0.0;    // stationary-distribution TV Lipschitz
    double L_Q = 0.0;      // Q Lipschitz (sup over the kappa ball of rewards)
    double B_H = 0.0;      // entropy bound
    double S_H = 0.0;      // entropy-gradient Lipschitz
    double chi = 1.0;
    double upsilon = 0.5;
};

struct RegularityOptions {
    double radius = 5.0;
    double safety = 1.5;
    double kappa = 1.0;
    int mixing_horizon = 200;
    double temperature = 1.0;
};

/// Probes random omega pairs in a ball and reports inflated worst-case ratios.
/// Bit-reproducible from (seed, n_probe).
RegularityConstants estimate_regularity(const FeatureSystem& fs, const TabularMDP& mdp, int n_probe,
                                        std::uint64_t seed, const RegularityOptions& options = {});

/// Random omega pair used by the regularity probes and audits: half far apart, half local.
std::pair<Vector, Vector> probe_pair(Eigen::Index dim, double radius, std::uint64_t seed, std::uint64_t index);

/// Omega whose softmax puts logit `strength` on actions[s] and 0 elsewhere, solved in the
/// least-squares sense over the state features.
SoftmaxPolicy softened_deterministic_policy(const FeatureSystem& fs, const std::vector<int>& actions, double strength);

KvDocument policy_to_kv(const SoftmaxPolicy& policy, const FeatureSystem& fs);
SoftmaxPolicy policy_from_kv(const KvDocument& doc, const FeatureSystem& fs);
SoftmaxPolicy load_policy(const std::filesystem::path& path, const FeatureSystem& fs);

}  // namespace gail
