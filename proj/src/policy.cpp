#include "gail/policy.hpp"

#include "gail/errors.hpp"
#include "gail/rng.hpp"

#include <cmath>
#include <cstring>
#include <string>

namespace gail {

SoftmaxPolicy::SoftmaxPolicy(int n_actions, int d_state, double temperature)
    : SoftmaxPolicy(Vector::Zero(static_cast<Eigen::Index>(n_actions) * d_state), n_actions, d_state, temperature) {}

SoftmaxPolicy::SoftmaxPolicy(Vector omega, int n_actions, int d_state, double temperature)
    : omega_(std::move(omega)), n_actions_(n_actions), d_state_(d_state), temperature_(temperature) {
    if (n_actions < 1 || d_state < 1) throw InvalidArgument("SoftmaxPolicy: dimensions must be positive");
    if (omega_.size() != static_cast<Eigen::Index>(n_actions) * d_state)
        throw InvalidArgument("SoftmaxPolicy: omega must have n_actions * d_state entries");
    if (!(temperature > 0.0)) throw InvalidArgument("SoftmaxPolicy: temperature must be positive");
}

void SoftmaxPolicy::check(const FeatureSystem& fs) const {
    if (fs.n_actions != n_actions_ || fs.d_state != d_state_)
        throw InvalidArgument("SoftmaxPolicy: dimensions do not match the feature system");
}

Matrix SoftmaxPolicy::log_probabilities(const FeatureSystem& fs) const {
    check(fs);
    const Eigen::Map<const Matrix> weights(omega_.data(), n_actions_, d_state_);
    Matrix logits = fs.psi_state * weights.transpose() / temperature_;  // n_states x n_actions
    for (Eigen::Index s = 0; s < logits.rows(); ++s) {
        const double m = logits.row(s).maxCoeff();
        const double lse = m + std::log((logits.row(s).array() - m).exp().sum());
        logits.row(s).array() -= lse;
    }
    return logits;
}

Matrix SoftmaxPolicy::probabilities(const FeatureSystem& fs) const {
    Matrix p = log_probabilities(fs).array().exp().matrix();
    for (Eigen::Index s = 0; s < p.rows(); ++s) p.row(s) /= p.row(s).sum();
    return p;
}

std::uint64_t SoftmaxPolicy::fingerprint() const {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(n_actions_) << 32 | static_cast<std::uint64_t>(d_state_));
    std::uint64_t bits = 0;
    std::memcpy(&bits, &temperature_, sizeof bits);
    h = mix64(h ^ bits);
    for (Eigen::Index i = 0; i < omega_.size(); ++i) {
        std::memcpy(&bits, omega_.data() + i, sizeof bits);
        h = mix64(h ^ bits);
    }
    return h;
}

PolicyChain induced_chain(const TabularMDP& mdp, const SoftmaxPolicy& policy, const FeatureSystem& fs) {
    return induced_chain(mdp, policy.probabilities(fs), policy.fingerprint());
}

Vector log_prob_grad(const SoftmaxPolicy& policy, const FeatureSystem& fs, int s, int a) {
    if (s < 0 || s >= fs.n_states || a < 0 || a >= fs.n_actions)
        throw IndexOutOfRange("log_prob_grad: pair (" + std::to_string(s) + ", " + std::to_string(a) + ") out of range");
    const Matrix p = policy.probabilities(fs);
    const int d = policy.d_state();
    Vector grad(policy.dim());
    for (int b = 0; b < policy.n_actions(); ++b) {
        const double coeff = ((b == a) ? 1.0 : 0.0) - p(s, b);
        grad.segment(static_cast<Eigen::Index>(b) * d, d) = coeff * fs.psi_state.row(s).transpose() / policy.temperature();
    }
    return grad;
}

Matrix score_table(const SoftmaxPolicy& policy, const FeatureSystem& fs) {
    const Matrix p = policy.probabilities(fs);
    const int d = policy.d_state();
    Matrix scores(fs.n_pairs(), policy.dim());
    for (int s = 0; s < fs.n_states; ++s) {
        const Vector psi = fs.psi_state.row(s).transpose() / policy.temperature();
        for (int a = 0; a < fs.n_actions; ++a) {
            auto row = scores.row(pair_index(s, a, fs.n_actions));
            for (int b = 0; b < fs.n_actions; ++b)
                row.segment(static_cast<Eigen::Index>(b) * d, d) = (((b == a) ? 1.0 : 0.0) - p(s, b)) * psi.transpose();
        }
    }
    return scores;
}

double entropy(const SoftmaxPolicy& policy, const FeatureSystem& fs, const PolicyChain& chain) {
    if (chain.policy_fingerprint != policy.fingerprint())
        throw ChainMismatch("entropy: chain was built from a different policy");
    const Matrix logp = policy.log_probabilities(fs);
    double h = 0.0;
    for (int s = 0; s < fs.n_states; ++s)
        for (int a = 0; a < fs.n_actions; ++a) h -= chain.stationary[pair_index(s, a, fs.n_actions)] * logp(s, a);
    return h;
}

SoftmaxPolicy softened_deterministic_policy(const FeatureSystem& fs, const std::vector<int>& actions, double strength) {
    if (static_cast<int>(actions.size()) != fs.n_states) throw InvalidArgument("softened policy: one action per state required");
    Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(fs.n_states, fs.n_actions);
    for (int s = 0; s < fs.n_states; ++s) {
        const int a = actions[static_cast<std::size_t>(s)];
        if (a < 0 || a >= fs.n_actions) throw IndexOutOfRange("softened policy: action out of range");
        targets(s, a) = strength;
    }
    const Eigen::MatrixXd psi = fs.psi_state;
    // Minimum-norm least-squares solution of psi * W^T = targets.
    const Eigen::MatrixXd weights_t = psi.completeOrthogonalDecomposition().solve(targets);  // d_state x n_actions
    Vector omega(static_cast<Eigen::Index>(fs.n_actions) * fs.d_state);
    for (int a = 0; a < fs.n_actions; ++a) omega.segment(static_cast<Eigen::Index>(a) * fs.d_state, fs.d_state) = weights_t.col(a);
    return SoftmaxPolicy(std::move(omega), fs.n_actions, fs.d_state);
}

KvDocument policy_to_kv(const SoftmaxPolicy& policy, const FeatureSystem& fs) {
    KvDocument doc;
    doc.set("n_actions", static_cast<long long>(policy.n_actions()));
    doc.set("d_state", static_cast<long long>(policy.d_state()));
    doc.set("temperature", policy.temperature());
    doc.set("omega", policy.omega());
    doc.set("feature_fingerprint", std::to_string(fs.fingerprint()));
    return doc;
}

SoftmaxPolicy policy_from_kv(const KvDocument& doc, const FeatureSystem& fs) {
    if (doc.get_u64("feature_fingerprint") != fs.fingerprint())
        throw InvalidArgument("policy checkpoint was written for a different feature system");
    return SoftmaxPolicy(doc.get_vector("omega"), static_cast<int>(doc.get_int("n_actions")),
                         static_cast<int>(doc.get_int("d_state")), doc.get_double("temperature"));
}

SoftmaxPolicy load_policy(const std::filesystem::path& path, const FeatureSystem& fs) {
    return policy_from_kv(KvDocument::load(path), fs);
}

}  // namespace gail
