#include "gail/features.hpp"

#include "gail/errors.hpp"
#include "gail/mdp.hpp"
#include "gail/rng.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <random>
#include <string>

namespace gail {

namespace {

Vector uniform_in_ball(int dim, CounterRng& rng) {
    std::normal_distribution<double> normal;
    Vector v(dim);
    double norm = 0.0;
    do {
        for (int i = 0; i < dim; ++i) v[i] = normal(rng);
        norm = v.norm();
    } while (norm == 0.0);
    const double radius = std::pow(rng.uniform(), 1.0 / dim);
    return v * (radius / norm);
}

std::uint64_t hash_doubles(std::uint64_t h, const double* data, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, data + i, sizeof bits);
        h = mix64(h ^ bits);
    }
    return h;
}

}  // namespace

Vector FeatureSystem::g_hat(const Vector& x) const {
    const double scale = std::sqrt(2.0 / q);
    Vector arg = g_weights * x + g_phase;
    return scale * (arg.array().cos() - g_phase.array().cos()).matrix();
}

void FeatureSystem::refresh_table() {
    table.resize(n_pairs(), q);
    Vector x(d_state + d_action);
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            x.head(d_state) = psi_state.row(s).transpose();
            x.tail(d_action) = psi_action.row(a).transpose();
            table.row(pair_index(s, a, n_actions)) = g_hat(x).transpose();
        }
    }
}

std::uint64_t FeatureSystem::fingerprint() const {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(n_states) * 1000003ULL + static_cast<std::uint64_t>(n_actions));
    h = mix64(h ^ static_cast<std::uint64_t>(q));
    h = hash_doubles(h, psi_state.data(), psi_state.size());
    h = hash_doubles(h, psi_action.data(), psi_action.size());
    h = hash_doubles(h, g_weights.data(), g_weights.size());
    h = hash_doubles(h, g_phase.data(), g_phase.size());
    return h;
}

FeatureSystem build_features(const TabularMDP& mdp, const FeatureOptions& opt) {
    if (opt.d_state < 1 || opt.d_action < 1 || opt.q < 1) throw InvalidArgument("feature dimensions must be at least 1");
    if (!(opt.bandwidth > 0.0)) throw InvalidArgument("bandwidth must be positive");
    FeatureSystem fs;
    fs.n_states = mdp.n_states;
    fs.n_actions = mdp.n_actions;
    fs.d_state = opt.d_state;
    fs.d_action = opt.d_action;
    fs.q = opt.q;

    CounterRng psi_rng(opt.seed, 1);
    fs.psi_state.resize(mdp.n_states, opt.d_state);
    for (int s = 0; s < mdp.n_states; ++s) fs.psi_state.row(s) = uniform_in_ball(opt.d_state, psi_rng).transpose();
    fs.psi_action.resize(mdp.n_actions, opt.d_action);
    for (int a = 0; a < mdp.n_actions; ++a) fs.psi_action.row(a) = uniform_in_ball(opt.d_action, psi_rng).transpose();
    if (opt.zero_pair) {
        const auto [s, a] = *opt.zero_pair;
        if (s < 0 || s >= mdp.n_states || a < 0 || a >= mdp.n_actions) throw IndexOutOfRange("zero_pair out of range");
        fs.psi_state.row(s).setZero();
        fs.psi_action.row(a).setZero();
    }

    CounterRng w_rng(opt.seed, 2);
    std::normal_distribution<double> normal(0.0, 1.0 / opt.bandwidth);
    fs.g_weights.resize(opt.q, opt.d_state + opt.d_action);
    for (Eigen::Index i = 0; i < fs.g_weights.size(); ++i) fs.g_weights.data()[i] = normal(w_rng);
    fs.g_phase.resize(opt.q);
    for (int j = 0; j < opt.q; ++j) fs.g_phase[j] = 2.0 * std::numbers::pi * w_rng.uniform();

    // |diag(sin) W|_2 <= |W|_2 <= |W|_F bounds the Jacobian everywhere.
    const double scale = std::sqrt(2.0 / opt.q);
    const double frobenius = scale * fs.g_weights.norm();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(fs.g_weights));
    const double spectral = scale * svd.singularValues()(0);
    fs.rho_g = std::min(frobenius, spectral);
    fs.refresh_table();
    return fs;
}

Vector reward_features(const FeatureSystem& fs, int s, int a) {
    if (s < 0 || s >= fs.n_states || a < 0 || a >= fs.n_actions)
        throw IndexOutOfRange("reward_features: pair (" + std::to_string(s) + ", " + std::to_string(a) + ") out of range");
    return fs.table.row(pair_index(s, a, fs.n_actions)).transpose();
}

Vector feature_expectation(const FeatureSystem& fs, const Vector& rho) {
    if (rho.size() != fs.n_pairs()) throw InvalidArgument("feature_expectation: distribution has the wrong size");
    return fs.table.transpose() * rho;
}

double empirical_lipschitz(const FeatureSystem& fs, int n_pairs, std::uint64_t seed) {
    CounterRng rng(seed, 3);
    const int dim = fs.d_state + fs.d_action;
    double worst = 0.0;
    Vector x(dim), y(dim);
    for (int i = 0; i < n_pairs; ++i) {
        x.head(fs.d_state) = uniform_in_ball(fs.d_state, rng);
        x.tail(fs.d_action) = uniform_in_ball(fs.d_action, rng);
        // Half of the pairs are close together, where the local slope is probed.
        if (i % 2 == 0) {
            y.head(fs.d_state) = uniform_in_ball(fs.d_state, rng);
            y.tail(fs.d_action) = uniform_in_ball(fs.d_action, rng);
        } else {
            y = x;
            for (int k = 0; k < dim; ++k) y[k] += 1e-3 * (rng.uniform() - 0.5);
        }
        const double dx = (x - y).norm();
        if (dx == 0.0) continue;
        worst = std::max(worst, (fs.g_hat(x) - fs.g_hat(y)).norm() / dx);
    }
    return worst;
}

KvDocument features_to_kv(const FeatureSystem& fs) {
    KvDocument doc;
    doc.set("n_states", static_cast<long long>(fs.n_states));
    doc.set("n_actions", static_cast<long long>(fs.n_actions));
    doc.set("d_state", static_cast<long long>(fs.d_state));
    doc.set("d_action", static_cast<long long>(fs.d_action));
    doc.set("q", static_cast<long long>(fs.q));
    doc.set("psi_state", Vector(Eigen::Map<const Vector>(fs.psi_state.data(), fs.psi_state.size())));
    doc.set("psi_action", Vector(Eigen::Map<const Vector>(fs.psi_action.data(), fs.psi_action.size())));
    doc.set("g_weights", Vector(Eigen::Map<const Vector>(fs.g_weights.data(), fs.g_weights.size())));
    doc.set("g_phase", fs.g_phase);
    doc.set("rho_g", fs.rho_g);
    return doc;
}

FeatureSystem features_from_kv(const KvDocument& doc) {
    FeatureSystem fs;
    fs.n_states = static_cast<int>(doc.get_int("n_states"));
    fs.n_actions = static_cast<int>(doc.get_int("n_actions"));
    fs.d_state = static_cast<int>(doc.get_int("d_state"));
    fs.d_action = static_cast<int>(doc.get_int("d_action"));
    fs.q = static_cast<int>(doc.get_int("q"));
    if (fs.n_states < 1 || fs.n_actions < 1 || fs.d_state < 1 || fs.d_action < 1 || fs.q < 1)
        throw InvalidArgument("feature file: dimensions must be positive");
    auto read = [&](const char* key, Eigen::Index rows, Eigen::Index cols) {
        const Vector flat = doc.get_vector(key);
        if (flat.size() != rows * cols) throw InvalidArgument(std::string("feature file: '") + key + "' has the wrong size");
        return Matrix(Eigen::Map<const Matrix>(flat.data(), rows, cols));
    };
    fs.psi_state = read("psi_state", fs.n_states, fs.d_state);
    fs.psi_action = read("psi_action", fs.n_actions, fs.d_action);
    fs.g_weights = read("g_weights", fs.q, fs.d_state + fs.d_action);
    fs.g_phase = doc.get_vector("g_phase");
    if (fs.g_phase.size() != fs.q) throw InvalidArgument("feature file: 'g_phase' has the wrong size");
    fs.rho_g = doc.get_double("rho_g");
    for (int s = 0; s < fs.n_states; ++s)
        if (fs.psi_state.row(s).norm() > 1.0 + 1e-12) throw InvalidArgument("feature file: psi_state row " + std::to_string(s) + " has norm > 1");
    for (int a = 0; a < fs.n_actions; ++a)
        if (fs.psi_action.row(a).norm() > 1.0 + 1e-12) throw InvalidArgument("feature file: psi_action row " + std::to_string(a) + " has norm > 1");
    fs.refresh_table();
    return fs;
}

FeatureSystem load_features(const std::filesystem::path& path) { return features_from_kv(KvDocument::load(path)); }

}  // namespace gail
