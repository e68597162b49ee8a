#include "gail/mdp.hpp"

#include "gail/errors.hpp"
#include "gail/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace gail {

namespace {

constexpr double kRowTol = 1e-12;
constexpr double kFitFloor = 1e-13;
// TV curves flatten out near the accuracy of the stationary vector (a few 1e-13), so the
// envelope is fitted and checked only above this level.
constexpr double kNoiseFloor = 1e-10;

void check_distribution(const Eigen::Ref<const Vector>& row, const std::string& what) {
    for (Eigen::Index i = 0; i < row.size(); ++i) {
        if (!(row[i] >= 0.0) || !std::isfinite(row[i])) throw InvalidArgument(what + " has a negative or non-finite entry");
    }
    if (std::abs(row.sum() - 1.0) > kRowTol) throw InvalidArgument(what + " does not sum to 1");
}

Vector dirichlet(int n, double concentration, CounterRng& rng) {
    std::gamma_distribution<double> gamma(concentration, 1.0);
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = gamma(rng);
    return v / v.sum();
}

}  // namespace

void TabularMDP::validate() const {
    if (n_states < 1 || n_actions < 1) throw InvalidArgument("n_states and n_actions must be positive");
    if (transition.rows() != n_pairs() || transition.cols() != n_states)
        throw InvalidArgument("transition must have n_states * n_actions rows and n_states columns");
    for (int row = 0; row < n_pairs(); ++row) {
        check_distribution(transition.row(row).transpose(), "transition row " + std::to_string(row));
    }
    if (initial_dist.size() != n_states) throw InvalidArgument("initial_dist must have n_states entries");
    check_distribution(initial_dist, "initial_dist");
    if (eval_reward) {
        if (eval_reward->rows() != n_states || eval_reward->cols() != n_actions)
            throw InvalidArgument("eval_reward must be n_states x n_actions");
        if (!eval_reward->allFinite()) throw InvalidArgument("eval_reward has a non-finite entry");
    }
}

TabularMDP mdp_from_kv(const KvDocument& doc) {
    TabularMDP mdp;
    mdp.n_states = static_cast<int>(doc.get_int("n_states"));
    mdp.n_actions = static_cast<int>(doc.get_int("n_actions"));
    if (mdp.n_states < 1 || mdp.n_actions < 1) throw InvalidArgument("n_states and n_actions must be positive");
    const Vector flat = doc.get_vector("transition");
    const Eigen::Index expected = static_cast<Eigen::Index>(mdp.n_pairs()) * mdp.n_states;
    if (flat.size() != expected)
        throw InvalidArgument("transition has " + std::to_string(flat.size()) + " entries, expected " +
                              std::to_string(expected));
    mdp.transition = Eigen::Map<const Matrix>(flat.data(), mdp.n_pairs(), mdp.n_states);
    mdp.initial_dist = doc.get_vector("initial_dist");
    for (const auto& key : doc.keys()) {
        if (key != "n_states" && key != "n_actions" && key != "transition" && key != "initial_dist" &&
            key != "eval_reward")
            throw ParseError("unknown key '" + key + "' in MDP file");
    }
    if (doc.has("eval_reward")) {
        const Vector r = doc.get_vector("eval_reward");
        if (r.size() != mdp.n_pairs()) throw InvalidArgument("eval_reward must have n_states * n_actions entries");
        mdp.eval_reward = Matrix(Eigen::Map<const Matrix>(r.data(), mdp.n_states, mdp.n_actions));
    }
    mdp.validate();
    return mdp;
}

KvDocument mdp_to_kv(const TabularMDP& mdp) {
    KvDocument doc;
    doc.set("n_states", static_cast<long long>(mdp.n_states));
    doc.set("n_actions", static_cast<long long>(mdp.n_actions));
    doc.set("transition", Vector(Eigen::Map<const Vector>(mdp.transition.data(), mdp.transition.size())));
    doc.set("initial_dist", mdp.initial_dist);
    if (mdp.eval_reward)
        doc.set("eval_reward", Vector(Eigen::Map<const Vector>(mdp.eval_reward->data(), mdp.eval_reward->size())));
    return doc;
}

TabularMDP load_mdp(const std::filesystem::path& path) { return mdp_from_kv(KvDocument::load(path)); }

TabularMDP random_mdp(int n_states, int n_actions, std::uint64_t seed, double concentration) {
    if (n_states < 1 || n_actions < 1 || !(concentration > 0.0)) throw InvalidArgument("random_mdp: bad dimensions");
    CounterRng rng(seed, 0x6d6470);
    TabularMDP mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.transition.resize(n_states * n_actions, n_states);
    for (int row = 0; row < n_states * n_actions; ++row) mdp.transition.row(row) = dirichlet(n_states, concentration, rng);
    mdp.initial_dist = dirichlet(n_states, concentration, rng);
    Matrix reward(n_states, n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) reward(s, a) = rng.uniform();
    mdp.eval_reward = reward;
    return mdp;
}

Vector PolicyChain::initial_pair_dist(const TabularMDP& mdp) const {
    Vector rho0(n_pairs());
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) rho0[pair_index(s, a, n_actions)] = mdp.initial_dist[s] * policy(s, a);
    return rho0;
}

namespace {

// Returns the fixed point reached from `start`, or nullopt if the cap is hit.
std::optional<Vector> power_iterate(const Matrix& kernel, Vector rho, const ChainOptions& opt) {
    const Matrix kt = kernel.transpose();
    Vector next(rho.size());
    for (long long it = 0; it < opt.max_iterations; ++it) {
        next.noalias() = kt * rho;
        const double change = (next - rho).lpNorm<Eigen::Infinity>();
        rho.swap(next);
        if (change <= opt.fixed_point_tol) return rho;
    }
    return std::nullopt;
}

}  // namespace

PolicyChain induced_chain(const TabularMDP& mdp, const Matrix& policy, std::uint64_t fingerprint,
                          const ChainOptions& options) {
    if (policy.rows() != mdp.n_states || policy.cols() != mdp.n_actions)
        throw InvalidArgument("policy dimensions do not match the MDP");
    PolicyChain chain;
    chain.n_states = mdp.n_states;
    chain.n_actions = mdp.n_actions;
    chain.policy = policy;
    chain.policy_fingerprint = fingerprint;
    const int n = mdp.n_pairs();
    chain.kernel.resize(n, n);
    for (int row = 0; row < n; ++row) {
        for (int next = 0; next < mdp.n_states; ++next) {
            const double p = mdp.transition(row, next);
            for (int a = 0; a < mdp.n_actions; ++a) chain.kernel(row, pair_index(next, a, mdp.n_actions)) = p * policy(next, a);
        }
    }

    const auto from_uniform = power_iterate(chain.kernel, Vector::Constant(n, 1.0 / n), options);
    Vector point = Vector::Zero(n);
    point[n - 1] = 1.0;
    const auto from_point = power_iterate(chain.kernel, point, options);
    if (!from_uniform || !from_point)
        throw NonErgodicChain("power iteration did not converge within " + std::to_string(options.max_iterations) +
                              " iterations");
    if ((*from_uniform - *from_point).lpNorm<Eigen::Infinity>() > options.start_disagreement_tol)
        throw NonErgodicChain("power iteration from two starts reached different fixed points");
    chain.stationary = from_uniform->cwiseMax(0.0);
    chain.stationary /= chain.stationary.sum();
    return chain;
}

MixingFit fit_geometric_envelope(const std::vector<double>& curve, int first_t, double slack) {
    std::vector<double> ts, logs;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        if (curve[i] > kNoiseFloor) {
            ts.push_back(static_cast<double>(first_t) + static_cast<double>(i));
            logs.push_back(std::log(curve[i]));
        } else {
            break;
        }
    }
    MixingFit fit;
    if (ts.empty()) {
        fit.chi = 1.0;
        fit.upsilon = std::numeric_limits<double>::epsilon();
        fit.exact = true;
        return fit;
    }
    double log_chi = logs.front() - ts.front() * std::log(0.5);
    double log_upsilon = std::log(0.5);
    if (ts.size() >= 2) {
        const double n = static_cast<double>(ts.size());
        double mt = 0, ml = 0;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            mt += ts[i];
            ml += logs[i];
        }
        mt /= n;
        ml /= n;
        double sxy = 0, sxx = 0;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            sxy += (ts[i] - mt) * (logs[i] - ml);
            sxx += (ts[i] - mt) * (ts[i] - mt);
        }
        log_upsilon = sxy / sxx;
        // The asymptotic rate governs the envelope beyond the measured range.
        const std::size_t tail = std::max<std::size_t>(1, ts.size() / 4);
        const std::size_t last = ts.size() - 1;
        const double tail_rate = (logs[last] - logs[last - tail]) / (ts[last] - ts[last - tail]);
        log_upsilon = std::max(log_upsilon, tail_rate);
        log_upsilon = std::min(log_upsilon, std::log1p(-1e-9));
        log_chi = ml - log_upsilon * mt;
    }
    // Inflate chi until the envelope covers every measured point.
    for (std::size_t i = 0; i < curve.size(); ++i) {
        if (curve[i] <= kNoiseFloor) continue;
        const double t = static_cast<double>(first_t) + static_cast<double>(i);
        log_chi = std::max(log_chi, std::log(curve[i]) - t * log_upsilon - std::log(slack));
    }
    fit.chi = std::exp(log_chi);
    fit.upsilon = std::exp(log_upsilon);
    return fit;
}

MixingFit fit_mixing(const PolicyChain& chain, const Vector& rho0, int horizon) {
    if (horizon < 10) throw InvalidArgument("fit_mixing: horizon must be at least 10");
    if (rho0.size() != chain.n_pairs()) throw InvalidArgument("fit_mixing: rho0 has the wrong size");
    const Matrix kt = chain.kernel.transpose();
    std::vector<double> curve;
    curve.reserve(static_cast<std::size_t>(horizon));
    Vector dist = rho0;
    for (int t = 1; t <= horizon; ++t) {
        dist = kt * dist;
        curve.push_back(tv_distance(dist, chain.stationary));
    }
    if (curve.front() < kFitFloor) return MixingFit{1.0, std::numeric_limits<double>::epsilon(), true};
    return fit_geometric_envelope(curve, 1, 1.05);
}

MixingFit fit_mixing_worst_case(const PolicyChain& chain, int horizon) {
    if (horizon < 10) throw InvalidArgument("fit_mixing_worst_case: horizon must be at least 10");
    const int n = chain.n_pairs();
    std::vector<double> curve;
    curve.reserve(static_cast<std::size_t>(horizon) + 1);
    Matrix power = Matrix::Identity(n, n);
    for (int t = 0; t <= horizon; ++t) {
        double worst = 0.0;
        for (int x = 0; x < n; ++x) worst = std::max(worst, tv_distance(power.row(x).transpose(), chain.stationary));
        curve.push_back(worst);
        power = power * chain.kernel;
    }
    if (curve[1] < kFitFloor) return MixingFit{std::max(1.0, curve[0] / 1.05), std::numeric_limits<double>::epsilon(), true};
    return fit_geometric_envelope(curve, 0, 1.05);
}

BetaMixingCurve beta_mixing_curve(const PolicyChain& chain, int kmax) {
    if (kmax < 1) throw InvalidArgument("beta_mixing_curve: kmax must be positive");
    const int n = chain.n_pairs();
    BetaMixingCurve out;
    out.beta_hat.reserve(static_cast<std::size_t>(kmax));
    Matrix power = chain.kernel;
    for (int k = 1; k <= kmax; ++k) {
        double worst = 0.0;
        for (int x = 0; x < n; ++x) worst = std::max(worst, tv_distance(power.row(x).transpose(), chain.stationary));
        out.beta_hat.push_back(worst);
        power = power * chain.kernel;
    }
    if (out.beta_hat.front() < kFitFloor) {
        out.exact = true;
        out.beta0 = 0.0;
        out.beta1 = 1.0;
        return out;
    }
    const MixingFit env = fit_geometric_envelope(out.beta_hat, 1, 1.0);
    out.beta0 = env.chi;
    out.beta1 = -std::log(env.upsilon);
    return out;
}

PolicyIterationResult average_reward_policy_iteration(const TabularMDP& mdp) {
    if (!mdp.eval_reward) throw MissingExpert("policy iteration needs eval_reward");
    const int ns = mdp.n_states;
    const int na = mdp.n_actions;
    const Matrix& r = *mdp.eval_reward;
    PolicyIterationResult res;
    res.actions.assign(static_cast<std::size_t>(ns), 0);
    for (int s = 0; s < ns; ++s) r.row(s).maxCoeff(&res.actions[static_cast<std::size_t>(s)]);

    for (int iter = 0; iter < 1000; ++iter) {
        res.iterations = iter + 1;
        // Unknowns: gain g and bias h with h(0) = 0. Equations: g + h(s) - sum P h = r(s, d(s)).
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(ns, ns);
        Eigen::VectorXd b(ns);
        for (int s = 0; s < ns; ++s) {
            const int a = res.actions[static_cast<std::size_t>(s)];
            A(s, 0) = 1.0;  // gain column replaces h(0)
            for (int next = 1; next < ns; ++next) A(s, next) -= mdp.prob(s, a, next);
            if (s > 0) A(s, s) += 1.0;
            b[s] = r(s, a);
        }
        const Eigen::VectorXd sol = A.colPivHouseholderQr().solve(b);
        Eigen::VectorXd h = sol;
        res.gain = sol[0];
        h[0] = 0.0;

        bool changed = false;
        for (int s = 0; s < ns; ++s) {
            auto& current = res.actions[static_cast<std::size_t>(s)];
            auto value = [&](int a) {
                double v = r(s, a);
                for (int next = 0; next < ns; ++next) v += mdp.prob(s, a, next) * h[next];
                return v;
            };
            double best = value(current);
            for (int a = 0; a < na; ++a) {
                const double v = value(a);
                if (v > best + 1e-12) {
                    best = v;
                    current = a;
                    changed = true;
                }
            }
        }
        if (!changed) break;
    }
    return res;
}

}  // namespace gail
