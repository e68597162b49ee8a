#include "gail/sampling.hpp"

#include "gail/errors.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

namespace gail {

namespace {

std::vector<double> cumulative(const double* p, Eigen::Index n) {
    std::vector<double> cdf(static_cast<std::size_t>(n));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) cdf[static_cast<std::size_t>(i)] = acc += p[i];
    return cdf;
}

std::vector<std::vector<double>> row_cdfs(const Matrix& m) {
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(cumulative(m.row(r).data(), m.cols()));
    return out;
}

// sum_x counts[x] * rows(x, :) / total
Vector count_average(const std::vector<long long>& counts, const Eigen::MatrixXd& rows, long long total) {
    Vector acc = Vector::Zero(rows.cols());
    for (std::size_t x = 0; x < counts.size(); ++x)
        if (counts[x] != 0) acc += static_cast<double>(counts[x]) * rows.row(static_cast<Eigen::Index>(x)).transpose();
    return acc / static_cast<double>(total);
}

void require_batch(long long q, const char* what) {
    if (q < 1) throw InvalidArgument(std::string(what) + ": batch size must be at least 1");
}

}  // namespace

int sample_from_cdf(const std::vector<double>& cdf, double u) {
    const double target = u * cdf.back();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    const auto idx = static_cast<int>(it - cdf.begin());
    // u * total can round onto the last edge.
    return std::min(idx, static_cast<int>(cdf.size()) - 1);
}

TrajectoryBatch rollout(const TabularMDP& mdp, const Matrix& policy, int n, int T, std::uint64_t seed, int burn_in) {
    if (n < 1 || T < 1) throw InvalidArgument("rollout: n and T must be at least 1");
    if (burn_in < 0) throw InvalidArgument("rollout: burn_in must be nonnegative");
    if (policy.rows() != mdp.n_states || policy.cols() != mdp.n_actions)
        throw InvalidArgument("rollout: policy table does not match the MDP");
    const auto p0 = cumulative(mdp.initial_dist.data(), mdp.initial_dist.size());
    const auto pi = row_cdfs(policy);
    const auto trans = row_cdfs(mdp.transition);

    TrajectoryBatch batch;
    batch.n = n;
    batch.T = T;
    batch.seed = seed;
    batch.states.resize(static_cast<std::size_t>(batch.size()));
    batch.actions.resize(static_cast<std::size_t>(batch.size()));
    for (int i = 0; i < n; ++i) {
        CounterRng rng(seed, static_cast<std::uint64_t>(i));
        int s = sample_from_cdf(p0, rng.uniform());
        for (int t = -burn_in; t < T; ++t) {
            const int a = sample_from_cdf(pi[static_cast<std::size_t>(s)], rng.uniform());
            if (t >= 0) {
                const auto k = static_cast<std::size_t>(i) * T + t;
                batch.states[k] = s;
                batch.actions[k] = a;
            }
            s = sample_from_cdf(trans[static_cast<std::size_t>(pair_index(s, a, mdp.n_actions))], rng.uniform());
        }
    }
    return batch;
}

TrajectoryBatch rollout(const TabularMDP& mdp, const SoftmaxPolicy& policy, const FeatureSystem& fs, int n, int T,
                        std::uint64_t seed, int burn_in) {
    return rollout(mdp, policy.probabilities(fs), n, T, seed, burn_in);
}

std::string demos_to_csv(const TrajectoryBatch& batch) {
    std::ostringstream out;
    out << "traj,t,state,action\n";
    for (int i = 0; i < batch.n; ++i)
        for (int t = 0; t < batch.T; ++t) out << i << ',' << t << ',' << batch.state(i, t) << ',' << batch.action(i, t) << '\n';
    return out.str();
}

TrajectoryBatch demos_from_csv(std::istream& in, const TabularMDP& mdp) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("demonstration file is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "traj,t,state,action") throw ParseError("demonstration header must be `traj,t,state,action`");

    struct Row { long long traj, t; int s, a; };
    std::vector<Row> rows;
    long long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream fields(line);
        Row r{};
        char c1 = 0, c2 = 0, c3 = 0;
        if (!(fields >> r.traj >> c1 >> r.t >> c2 >> r.s >> c3 >> r.a) || c1 != ',' || c2 != ',' || c3 != ',')
            throw ParseError("demonstration line " + std::to_string(line_no) + ": expected four integers");
        if (r.s < 0 || r.s >= mdp.n_states)
            throw ParseError("demonstration line " + std::to_string(line_no) + ": state out of range");
        if (r.a < 0 || r.a >= mdp.n_actions)
            throw ParseError("demonstration line " + std::to_string(line_no) + ": action out of range");
        rows.push_back(r);
    }
    if (rows.empty()) throw ParseError("demonstration file has no rows");

    long long n = 0;
    for (const Row& r : rows) n = std::max(n, r.traj + 1);
    if (static_cast<long long>(rows.size()) % n != 0)
        throw ParseError("demonstration trajectories must all have the same length");
    TrajectoryBatch batch;
    batch.n = static_cast<int>(n);
    batch.T = static_cast<int>(static_cast<long long>(rows.size()) / n);
    batch.states.assign(rows.size(), -1);
    batch.actions.assign(rows.size(), -1);
    for (const Row& r : rows) {
        if (r.traj < 0 || r.t < 0 || r.t >= batch.T)
            throw ParseError("demonstration row (" + std::to_string(r.traj) + ", " + std::to_string(r.t) + ") out of range");
        const auto k = static_cast<std::size_t>(r.traj * batch.T + r.t);
        if (batch.states[k] != -1) throw ParseError("demonstration row duplicated");
        batch.states[k] = r.s;
        batch.actions[k] = r.a;
    }
    return batch;
}

TrajectoryBatch load_demos(const std::filesystem::path& path, const TabularMDP& mdp) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open demonstration file " + path.string());
    return demos_from_csv(in, mdp);
}

TrajectoryBatch concatenate(const TrajectoryBatch& a, const TrajectoryBatch& b) {
    if (a.T != b.T) throw InvalidArgument("concatenate: trajectory lengths differ");
    TrajectoryBatch out = a;
    out.n = a.n + b.n;
    out.states.insert(out.states.end(), b.states.begin(), b.states.end());
    out.actions.insert(out.actions.end(), b.actions.begin(), b.actions.end());
    return out;
}

Vector empirical_pair_distribution(const TrajectoryBatch& batch, int n_states, int n_actions) {
    if (batch.size() == 0) throw InvalidArgument("empty trajectory batch");
    Vector freq = Vector::Zero(static_cast<Eigen::Index>(n_states) * n_actions);
    for (std::size_t k = 0; k < batch.states.size(); ++k) freq[pair_index(batch.states[k], batch.actions[k], n_actions)] += 1.0;
    return freq / static_cast<double>(batch.size());
}

Vector empirical_feature_expectation(const TrajectoryBatch& batch, const FeatureSystem& fs) {
    return feature_expectation(fs, empirical_pair_distribution(batch, fs.n_states, fs.n_actions));
}

std::vector<long long> multinomial_counts(const Vector& dist, long long batch, CounterRng& rng) {
    std::vector<long long> counts(static_cast<std::size_t>(dist.size()), 0);
    long long remaining = batch;
    double mass = dist.sum();
    for (Eigen::Index x = 0; x < dist.size() && remaining > 0; ++x) {
        const double p = std::max(dist[x], 0.0);
        if (x + 1 == dist.size() || p >= mass) {
            counts[static_cast<std::size_t>(x)] = remaining;
            break;
        }
        std::binomial_distribution<long long> binom(remaining, std::clamp(p / mass, 0.0, 1.0));
        const long long c = binom(rng);
        counts[static_cast<std::size_t>(x)] = c;
        remaining -= c;
        mass -= p;
    }
    return counts;
}

std::vector<long long> draw_pair_counts(const TabularMDP& mdp, const PolicyChain& chain, long long q, std::uint64_t seed,
                                        const EstimatorOptions& options) {
    CounterRng rng(seed, 0);
    if (options.mode == SampleMode::stationary) return multinomial_counts(chain.stationary, q, rng);
    if (q > 100'000'000) throw InvalidArgument("trajectory sampling mode supports batches up to 1e8 pairs");
    const auto kernel = row_cdfs(chain.kernel);
    const Vector rho0 = chain.initial_pair_dist(mdp);
    int x = sample_from_cdf(cumulative(rho0.data(), rho0.size()), rng.uniform());
    std::vector<long long> counts(static_cast<std::size_t>(chain.n_pairs()), 0);
    for (long long t = -options.burn_in; t < q; ++t) {
        if (t >= 0) ++counts[static_cast<std::size_t>(x)];
        x = sample_from_cdf(kernel[static_cast<std::size_t>(x)], rng.uniform());
    }
    return counts;
}

StochGrad stoch_grad_theta(const TabularMDP& mdp, const FeatureSystem& fs, const PolicyOracle& oracle,
                           const Vector& theta, double mu, const Vector& demo_fe, long long q_theta,
                           std::uint64_t seed, const EstimatorOptions& options) {
    require_batch(q_theta, "stoch_grad_theta");
    const auto counts = draw_pair_counts(mdp, oracle.chain(), q_theta, seed, options);
    StochGrad out;
    out.value = count_average(counts, fs.table, q_theta) - demo_fe - mu * theta;
    out.batch_size = q_theta;
    out.kind = GradKind::theta;
    return out;
}

StochGrad stoch_grad_theta(const TabularMDP& mdp, const FeatureSystem& fs, const SoftmaxPolicy& policy,
                           const KernelReward& reward, double mu, const Vector& demo_fe, long long q_theta,
                           std::uint64_t seed, const EstimatorOptions& options) {
    return stoch_grad_theta(mdp, fs, PolicyOracle(mdp, fs, policy), reward.theta, mu, demo_fe, q_theta, seed, options);
}

StochGrad stoch_grad_omega(const TabularMDP& mdp, const FeatureSystem& fs, const PolicyOracle& oracle,
                           const Vector& theta, double lambda, long long q_omega, std::uint64_t seed,
                           const EstimatorOptions& options) {
    require_batch(q_omega, "stoch_grad_omega");
    const auto counts = draw_pair_counts(mdp, oracle.chain(), q_omega, seed, options);
    const Matrix& scores = oracle.scores();
    StochGrad out;
    out.batch_size = q_omega;
    out.kind = GradKind::omega;
    out.value = Vector::Zero(scores.cols());

    if (!options.rollout_q) {
        const Vector q = oracle.combined_q(theta, lambda);
        for (std::size_t x = 0; x < counts.size(); ++x)
            if (counts[x] != 0) {
                const auto i = static_cast<Eigen::Index>(x);
                out.value += (static_cast<double>(counts[x]) * q[i]) * scores.row(i).transpose();
            }
        out.value /= static_cast<double>(q_omega);
        return out;
    }

    // Truncated simulated returns of r_theta + lambda log pi, centred by the exact gain.
    if (q_omega * static_cast<long long>(options.rollout_horizon) > 1'000'000'000LL)
        throw InvalidArgument("rollout Q estimator: batch * horizon must not exceed 1e9");
    const auto kernel = row_cdfs(oracle.chain().kernel);
    const Vector reward = fs.table * theta + lambda * Eigen::Map<const Vector>(oracle.log_probs().data(), fs.n_pairs());
    const double gain = oracle.chain().stationary.dot(reward);
    CounterRng rng(seed, 1);
    for (std::size_t x = 0; x < counts.size(); ++x) {
        double total = 0.0;
        for (long long j = 0; j < counts[x]; ++j) {
            int y = static_cast<int>(x);
            for (int t = 0; t < options.rollout_horizon; ++t) {
                total += reward[y] - gain;
                y = sample_from_cdf(kernel[static_cast<std::size_t>(y)], rng.uniform());
            }
        }
        if (counts[x] != 0) out.value += total * scores.row(static_cast<Eigen::Index>(x)).transpose();
    }
    out.value /= static_cast<double>(q_omega);
    return out;
}

StochGrad stoch_grad_omega(const TabularMDP& mdp, const FeatureSystem& fs, const SoftmaxPolicy& policy,
                           const KernelReward& reward, double lambda, long long q_omega, std::uint64_t seed,
                           const EstimatorOptions& options) {
    return stoch_grad_omega(mdp, fs, PolicyOracle(mdp, fs, policy), reward.theta, lambda, q_omega, seed, options);
}

StochGrad theta_star_estimator(const TabularMDP& mdp, const FeatureSystem& fs, const PolicyOracle& oracle,
                               const Vector& demo_fe, double mu, long long batch, std::uint64_t seed,
                               const EstimatorOptions& options) {
    require_batch(batch, "theta_star_estimator");
    if (!(mu > 0.0)) throw InvalidArgument("theta_star_estimator: mu must be positive");
    const auto counts = draw_pair_counts(mdp, oracle.chain(), batch, seed, options);
    StochGrad out;
    out.value = (count_average(counts, fs.table, batch) - demo_fe) / mu;
    out.batch_size = batch;
    out.kind = GradKind::theta_star;
    return out;
}

StochGrad theta_star_estimator(const TabularMDP& mdp, const FeatureSystem& fs, const SoftmaxPolicy& policy,
                               const Vector& demo_fe, double mu, long long batch, std::uint64_t seed,
                               const EstimatorOptions& options) {
    return theta_star_estimator(mdp, fs, PolicyOracle(mdp, fs, policy), demo_fe, mu, batch, seed, options);
}

NoiseMoments noise_moments(const TabularMDP& mdp, const FeatureSystem& fs, const PolicyOracle& oracle,
                           const Vector& demo_fe, std::uint64_t seed, const NoiseMomentOptions& opt) {
    const Vector& rho = oracle.chain().stationary;
    const Vector& G = oracle.feature_expectation();
    const Matrix& scores = oracle.scores();
    const Eigen::MatrixXd& qg = oracle.feature_q();
    const Vector& qh = oracle.entropy_q();

    NoiseMoments m;
    for (Eigen::Index x = 0; x < rho.size(); ++x) {
        m.M_theta += rho[x] * (fs.table.row(x).transpose() - G).squaredNorm();
        const double c = opt.kappa * qg.row(x).norm() + opt.lambda * std::abs(qh[x]);
        m.M_omega += rho[x] * scores.row(x).squaredNorm() * c * c;
    }

    // Greedy direction: theta-hat from one batch, then an omega estimate from another.
    // For each theta-hat the second moment over the omega batch is exact:
    //   |grad F(omega, theta-hat)|^2 + (E|v(x)|^2 - |grad F|^2) / q_omega.
    double acc = 0.0;
    for (int r = 0; r < opt.theta_draws; ++r) {
        const Vector th = theta_star_estimator(mdp, fs, oracle, demo_fe, opt.mu, opt.greedy_theta_batch,
                                               derive_seed(seed, static_cast<std::uint64_t>(r)))
                              .value;
        const Vector cq = oracle.combined_q(th, opt.lambda);
        const Vector mean = oracle.grad_omega(th, opt.lambda);
        double second = 0.0;
        for (Eigen::Index x = 0; x < rho.size(); ++x) second += rho[x] * scores.row(x).squaredNorm() * cq[x] * cq[x];
        const double msq = mean.squaredNorm();
        acc += msq + std::max(second - msq, 0.0) / static_cast<double>(opt.greedy_omega_batch);
    }
    m.M_G = acc / static_cast<double>(std::max(opt.theta_draws, 1));
    return m;
}

NoiseMoments measure_noise_moments(const TabularMDP& mdp, const FeatureSystem& fs, const Vector& demo_fe, int n_probe,
                                   double radius, std::uint64_t seed, const NoiseMomentOptions& opt) {
    const Eigen::Index dim = static_cast<Eigen::Index>(fs.n_actions) * fs.d_state;
    NoiseMoments worst;
    for (int i = -1; i < n_probe; ++i) {
        const Vector omega =
            i < 0 ? Vector(Vector::Zero(dim)) : probe_pair(dim, radius, seed, static_cast<std::uint64_t>(i)).first;
        const PolicyOracle oracle(mdp, fs, SoftmaxPolicy(omega, fs.n_actions, fs.d_state));
        const NoiseMoments m = noise_moments(mdp, fs, oracle, demo_fe, derive_seed(seed, "moments") + static_cast<std::uint64_t>(i + 1), opt);
        worst.M_theta = std::max(worst.M_theta, m.M_theta);
        worst.M_omega = std::max(worst.M_omega, m.M_omega);
        worst.M_G = std::max(worst.M_G, m.M_G);
    }
    return worst;
}

}  // namespace gail
