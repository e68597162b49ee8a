#pragma once

#include "gail/kv_text.hpp"
#include "gail/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>

namespace gail {

struct TabularMDP;

/// State/action feature vectors and the shifted random Fourier reward map
///   g(x) = sqrt(2/q) [cos(w_j . x + b_j) - cos(b_j)]_j,   x = (psi_s, psi_a),
/// which vanishes at the origin and is rho_g-Lipschitz.
struct FeatureSystem {
    int n_states = 0;
    int n_actions = 0;
    int d_state = 0;
    int d_action = 0;
    int q = 0;
    Matrix psi_state;   // n_states x d_state
    Matrix psi_action;  // n_actions x d_action
    Matrix g_weights;   // q x (d_state + d_action)
    Vector g_phase;     // q
    double rho_g = 0.0;

    /// g evaluated at every pair, row = flat pair index. Rebuilt by refresh_table().
    Matrix table;

    void refresh_table();
    int n_pairs() const { return n_states * n_actions; }

    /// Shifted map at an arbitrary input of dimension d_state + d_action.
    Vector g_hat(const Vector& x) const;
    std::uint64_t fingerprint() const;
};

struct FeatureOptions {
    int d_state = 5;
    int d_action = 3;
    int q = 16;
    double bandwidth = 1.0;
    std::uint64_t seed = 0;
    /// Pins psi_s and psi_a of this pair to zero.
    std::optional<std::pair<int, int>> zero_pair;
};

FeatureSystem build_features(const TabularMDP& mdp, const FeatureOptions& options);

/// g(psi_s, psi_a); throws IndexOutOfRange.
Vector reward_features(const FeatureSystem& fs, int s, int a);

/// sum_{(s,a)} rho(s,a) g(psi_s, psi_a); equals G(pi) when rho is pi's stationary distribution.
Vector feature_expectation(const FeatureSystem& fs, const Vector& rho);

/// Largest observed |g(x) - g(x')| / |x - x'| over random pairs in the feature domain.
double empirical_lipschitz(const FeatureSystem& fs, int n_pairs, std::uint64_t seed);

KvDocument features_to_kv(const FeatureSystem& fs);
FeatureSystem features_from_kv(const KvDocument& doc);
FeatureSystem load_features(const std::filesystem::path& path);

}  // namespace gail
