#include "gail/analysis.hpp"

#include "gail/errors.hpp"
#include "gail/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gail {

double exact_r_distance(const FeatureSystem& fs, const PolicyChain& a, const PolicyChain& b, double kappa) {
    return kappa * (feature_expectation(fs, a.stationary) - feature_expectation(fs, b.stationary)).norm();
}

double empirical_r_distance(const FeatureSystem& fs, const TrajectoryBatch& batch, const PolicyChain& chain, double kappa) {
    return kappa * (empirical_feature_expectation(batch, fs) - feature_expectation(fs, chain.stationary)).norm();
}

long long block_size(long long T, double delta, double beta0, double beta1, double alpha) {
    if (T < 1) throw InvalidArgument("make_blocks: T must be positive");
    if (!(delta > 0.0) || !(beta1 > 0.0) || !(alpha > 0.0) || !(beta0 >= 0.0))
        throw InvalidArgument("make_blocks: delta, beta1 and alpha must be positive, beta0 nonnegative");
    const double arg = 4.0 * beta0 * static_cast<double>(T) / delta;
    // beta0 = 0 means the sequence is already independent; blocks of one suffice.
    if (!(arg > 1.0)) return 1;
    return std::max(1LL, static_cast<long long>(std::ceil(std::pow(std::log(arg) / beta1, 1.0 / alpha))));
}

BlockPartition make_blocks(long long T, double delta, double beta0, double beta1, double alpha) {
    const long long b = block_size(T, delta, beta0, beta1, alpha);
    if (2 * b > T) {
        long long t_min = std::max(T, 2LL);
        while (2 * block_size(t_min, delta, beta0, beta1, alpha) > t_min) t_min *= 2;
        long long lo = t_min / 2, hi = t_min;  // lo fails (or is below T), hi works
        while (hi - lo > 1) {
            const long long mid = lo + (hi - lo) / 2;
            if (2 * block_size(mid, delta, beta0, beta1, alpha) <= mid) hi = mid; else lo = mid;
        }
        throw TrajectoryTooShort("trajectory of length " + std::to_string(T) + " is shorter than two blocks of size " +
                                     std::to_string(b) + "; need T >= " + std::to_string(hi),
                                 hi);
    }
    BlockPartition p;
    p.T = T;
    p.b = b;
    p.m = T / (2 * b);
    for (long long j = 0; j < 2 * p.m; ++j) {
        const IndexRange r{j * b, (j + 1) * b};
        (j % 2 == 0 ? p.odd_blocks : p.even_blocks).push_back(r);
    }
    const double log_term = std::log(beta0 * static_cast<double>(T) / delta) / beta1;
    p.zeta = std::pow(std::max(log_term, 0.0), 1.0 / alpha);
    return p;
}

MeanSe kernel_rademacher(const FeatureSystem& fs, const std::vector<std::pair<int, int>>& heads, double B_theta,
                         int n_sigma, std::uint64_t seed) {
    if (heads.empty()) throw InvalidArgument("kernel_rademacher: need at least one block head");
    if (n_sigma < 1) throw InvalidArgument("kernel_rademacher: n_sigma must be positive");
    std::vector<Vector> feats;
    feats.reserve(heads.size());
    for (const auto& [s, a] : heads) feats.push_back(reward_features(fs, s, a));
    const double m = static_cast<double>(heads.size());

    double sum = 0.0, sum_sq = 0.0;
    for (int r = 0; r < n_sigma; ++r) {
        CounterRng rng(seed, static_cast<std::uint64_t>(r));
        Vector acc = Vector::Zero(fs.q);
        std::uint64_t bits = 0;
        for (std::size_t t = 0; t < feats.size(); ++t) {
            if (t % 64 == 0) bits = rng();
            acc += ((bits >> (t % 64)) & 1U) ? feats[t] : Vector(-feats[t]);
        }
        const double v = B_theta * acc.norm() / m;
        sum += v;
        sum_sq += v * v;
    }
    MeanSe out;
    out.mean = sum / n_sigma;
    const double var = n_sigma > 1 ? std::max(sum_sq - n_sigma * out.mean * out.mean, 0.0) / (n_sigma - 1) : 0.0;
    out.se = std::sqrt(var / n_sigma);
    return out;
}

double covering_bound_kernel(double B_theta, double rho_g, int q, double eps) {
    if (!(eps > 0.0)) throw InvalidArgument("covering_bound_kernel: eps must be positive");
    return q * std::log1p(2.0 * std::numbers::sqrt2 * rho_g * B_theta / eps);
}

double covering_bound_nn(int d, int D, double eps) {
    if (!(eps > 0.0) || d < 1 || D < 1) throw InvalidArgument("covering_bound_nn: need eps > 0 and d, D >= 1");
    const double dd = d, DD = D;
    return dd * dd * DD * std::log1p(std::numbers::sqrt2 * DD * std::sqrt(dd) / eps);
}

Theorem1Terms theorem1_bound(double B_r, const std::function<double(double)>& log_covering, long long n, long long T,
                             double delta, double beta0, double beta1, double alpha, double epsilon_opt) {
    if (n < 1 || T < 1 || !(B_r >= 0.0)) throw InvalidArgument("theorem1_bound: inputs must be positive");
    const long long total = n * T;
    const BlockPartition blocks = make_blocks(total, delta, beta0, beta1, alpha);
    const double N = static_cast<double>(total);
    const double b = static_cast<double>(blocks.b);
    const double m = N / (2.0 * b);
    const double delta_prime = delta / 2.0;
    Theorem1Terms out;
    out.b = blocks.b;
    out.zeta = blocks.zeta;
    out.m = m;
    out.bound = 32.0 * b / N + 48.0 * B_r / std::sqrt(m) * std::sqrt(std::max(log_covering(1.0 / std::sqrt(m)), 0.0)) +
                12.0 * B_r * std::sqrt(std::log(4.0 / delta_prime) / (N / b)) + epsilon_opt;
    return out;
}

double median(std::vector<double> v) {
    if (v.empty()) throw InvalidArgument("median of an empty set");
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("loglog_slope: need two or more points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

GapExperiment generalization_gap_experiment(const TabularMDP& mdp, const FeatureSystem& fs, const Matrix& expert_policy,
                                            const PolicyChain& expert_chain, const PolicyChain& learned_chain,
                                            double kappa, const std::vector<long long>& nT_grid, int n_seeds,
                                            const GapOptions& opt) {
    if (nT_grid.empty() || n_seeds < 1) throw InvalidArgument("gen-gap: grids must be non-empty");
    const double exact = exact_r_distance(fs, expert_chain, learned_chain, kappa);
    const Vector G_learned = feature_expectation(fs, learned_chain.stationary);
    const std::uint64_t root = derive_seed(opt.seed, "gen-gap");

    GapExperiment out;
    out.nT_grid = nT_grid;
    std::vector<double> xs;
    for (std::size_t g = 0; g < nT_grid.size(); ++g) {
        const long long nT = nT_grid[g];
        const int T = static_cast<int>(std::min<long long>(opt.trajectory_length, nT));
        if (nT % T != 0) throw InvalidArgument("gen-gap: every nT must be a multiple of the trajectory length");
        const int n = static_cast<int>(nT / T);
        std::vector<double> gaps;
        for (int k = 0; k < n_seeds; ++k) {
            const std::uint64_t cell = derive_seed(root, static_cast<std::uint64_t>(g) * 1'000'003ULL + static_cast<std::uint64_t>(k));
            const TrajectoryBatch batch = rollout(mdp, expert_policy, n, T, cell, opt.burn_in);
            GapRow row;
            row.nT = nT;
            row.seed = k;
            row.empirical_d = kappa * (empirical_feature_expectation(batch, fs) - G_learned).norm();
            row.exact_d = exact;
            row.gap = std::abs(row.empirical_d - row.exact_d);
            gaps.push_back(row.gap);
            out.rows.push_back(row);
        }
        out.median_gap.push_back(median(gaps));
        xs.push_back(static_cast<double>(nT));
    }
    if (xs.size() >= 2) out.slope = loglog_slope(xs, out.median_gap);
    return out;
}

}  // namespace gail
