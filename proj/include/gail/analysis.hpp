#pragma once

// R-distance for the kernel ball class, independent blocks, Rademacher complexity and the
// generalization-bound calculators.

#include "gail/features.hpp"
#include "gail/linalg.hpp"
#include "gail/mdp.hpp"
#include "gail/sampling.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace gail {

/// sup over |theta| <= kappa of theta . (G(a) - G(b)) = kappa |G(a) - G(b)|.
double exact_r_distance(const FeatureSystem& fs, const PolicyChain& a, const PolicyChain& b, double kappa);

/// kappa |empirical feature expectation of the batch - G(chain)|.
double empirical_r_distance(const FeatureSystem& fs, const TrajectoryBatch& batch, const PolicyChain& chain, double kappa);

/// Block [begin, end) of a sequence.
using IndexRange = std::pair<long long, long long>;

/// 2m alternating blocks of size b tiling [0, 2bm). odd_blocks holds the 1st, 3rd, ...
/// blocks and even_blocks the 2nd, 4th, ...
struct BlockPartition {
    long long T = 0;
    long long b = 0;
    long long m = 0;
    std::vector<IndexRange> odd_blocks;
    std::vector<IndexRange> even_blocks;
    double zeta = 0.0;
};

/// b = ceil((log(4 beta0 T / delta) / beta1)^(1/alpha)) (at least 1), m = floor(T / 2b),
/// zeta = (log(beta0 T / delta) / beta1)^(1/alpha). Throws TrajectoryTooShort with the
/// smallest admissible T when 2b > T.
BlockPartition make_blocks(long long T, double delta, double beta0, double beta1, double alpha);

/// Block size alone, for the calculators.
long long block_size(long long T, double delta, double beta0, double beta1, double alpha);

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

/// E_sigma (B_theta / m) |sum_t sigma_t g(x_t)| estimated from n_sigma sign draws.
MeanSe kernel_rademacher(const FeatureSystem& fs, const std::vector<std::pair<int, int>>& block_heads, double B_theta,
                         int n_sigma, std::uint64_t seed);

/// Log covering number of the kernel reward class at sup-norm resolution eps:
/// q log(1 + 2 sqrt2 rho_g B_theta / eps).
double covering_bound_kernel(double B_theta, double rho_g, int q, double eps);

/// Log covering number of the ReLU network class: d^2 D log(1 + sqrt2 D sqrt(d) / eps).
double covering_bound_nn(int d, int D, double eps);

struct Theorem1Terms {
    double bound = 0.0;
    long long b = 0;
    double zeta = 0.0;
    double m = 0.0;  // nT / 2b
};

/// 32b/(nT) + 48 B_r / sqrt(nT/2b) sqrt(log N(1/sqrt(nT/2b))) + 12 B_r sqrt(log(4/delta') / (nT/b)) + eps_opt,
/// delta' = delta / 2, b from make_blocks at length nT.
Theorem1Terms theorem1_bound(double B_r, const std::function<double(double)>& log_covering, long long n, long long T,
                             double delta, double beta0, double beta1, double alpha, double epsilon_opt);

struct GapRow {
    long long nT = 0;
    int seed = 0;
    double gap = 0.0;
    double empirical_d = 0.0;
    double exact_d = 0.0;
};

struct GapExperiment {
    std::vector<GapRow> rows;
    std::vector<long long> nT_grid;
    std::vector<double> median_gap;
    double slope = 0.0;  // least-squares slope of log median gap against log nT
};

struct GapOptions {
    int trajectory_length = 200;
    int burn_in = 200;
    std::uint64_t seed = 0;
};

/// For every nT and seed: draws nT / T expert trajectories and records
/// |empirical_r_distance - exact_r_distance| against the learned policy.
GapExperiment generalization_gap_experiment(const TabularMDP& mdp, const FeatureSystem& fs, const Matrix& expert_policy,
                                            const PolicyChain& expert_chain, const PolicyChain& learned_chain,
                                            double kappa, const std::vector<long long>& nT_grid, int n_seeds,
                                            const GapOptions& options = {});

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> v);

}  // namespace gail
