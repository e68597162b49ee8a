#include "gail/analysis.hpp"
#include "gail/errors.hpp"
#include "gail/features.hpp"
#include "gail/mdp.hpp"
#include "gail/policy.hpp"
#include "gail/sampling.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace gail;

namespace {

struct Fixture {
    TabularMDP mdp = random_mdp(5, 3, 7);
    FeatureSystem fs;
    Fixture() {
        FeatureOptions fo;
        fo.seed = 8;
        fs = build_features(mdp, fo);
    }
    PolicyChain chain(std::uint64_t seed) const {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> n(0.0, 1.5);
        Vector w(15);
        for (Eigen::Index i = 0; i < 15; ++i) w[i] = n(rng);
        return induced_chain(mdp, SoftmaxPolicy(w, 3, 5), fs);
    }
};

double kernel_log_cover(double eps) { return covering_bound_kernel(1.0, 1.0, 16, eps); }

}  // namespace

TEST(RDistance, MatchesEigenOracleAndIsAPseudometric) {
    Fixture f;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const PolicyChain a = f.chain(seed), b = f.chain(seed + 100), c = f.chain(seed + 200);
        const Vector Ga = f.fs.table.transpose() * oracle::stationary_eig(oracle::pair_kernel(f.mdp, a.policy));
        const Vector Gb = f.fs.table.transpose() * oracle::stationary_eig(oracle::pair_kernel(f.mdp, b.policy));
        const double dab = exact_r_distance(f.fs, a, b, 2.0);
        ASSERT_NEAR(dab, 2.0 * (Ga - Gb).norm(), 1e-12);
        ASSERT_EQ(exact_r_distance(f.fs, a, a, 2.0), 0.0);
        ASSERT_EQ(dab, exact_r_distance(f.fs, b, a, 2.0));
        ASSERT_LE(dab, exact_r_distance(f.fs, a, c, 2.0) + exact_r_distance(f.fs, c, b, 2.0) + 1e-15);
    }
}

TEST(RDistance, DominatesEveryRewardInTheBall) {
    Fixture f;
    const PolicyChain a = f.chain(1), b = f.chain(2);
    const Vector diff = f.fs.table.transpose() * (a.stationary - b.stationary);
    const double d = exact_r_distance(f.fs, a, b, 1.0);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) ASSERT_LE(oracle::sphere(f.fs.q, u(rng), rng).dot(diff), d + 1e-15);
    EXPECT_NEAR(diff.normalized().dot(diff), d, 1e-15);
}

TEST(RDistance, EmpiricalMatchesDirectComputation) {
    Fixture f;
    const PolicyChain a = f.chain(4);
    const TrajectoryBatch batch = rollout(f.mdp, a.policy, 3, 50, 9);
    Vector mean = Vector::Zero(f.fs.q);
    for (std::size_t k = 0; k < batch.states.size(); ++k)
        mean += f.fs.table.row(batch.states[k] * 3 + batch.actions[k]).transpose();
    mean /= 150.0;
    const Vector G = f.fs.table.transpose() * a.stationary;
    EXPECT_NEAR(empirical_r_distance(f.fs, batch, a, 1.5), 1.5 * (mean - G).norm(), 1e-12);
}

TEST(Blocks, HandCase) {
    const BlockPartition p = make_blocks(1000, 0.05, 2.0, 0.5, 1.0);
    EXPECT_EQ(p.b, 24);  // ceil(2 log 160000) = ceil(23.97)
    EXPECT_EQ(p.m, 20);
    EXPECT_NEAR(p.zeta, 2.0 * std::log(40000.0), 1e-12);
    EXPECT_EQ(block_size(1000, 0.05, 2.0, 0.5, 1.0), 24);
}

TEST(Blocks, AlternatingTilingProperty) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<long long> T_dist(100, 100000);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        const long long T = T_dist(rng);
        const double delta = 0.01 + 0.2 * u(rng), beta0 = 0.5 + 2 * u(rng), beta1 = 0.2 + u(rng),
                     alpha = 0.5 + u(rng);
        BlockPartition p;
        try {
            p = make_blocks(T, delta, beta0, beta1, alpha);
        } catch (const TrajectoryTooShort&) {
            continue;
        }
        ASSERT_GE(p.b, 1);
        ASSERT_EQ(p.m, T / (2 * p.b));
        ASSERT_EQ(p.odd_blocks.size(), static_cast<std::size_t>(p.m));
        ASSERT_EQ(p.even_blocks.size(), static_cast<std::size_t>(p.m));
        long long pos = 0;
        for (long long j = 0; j < p.m; ++j) {
            ASSERT_EQ(p.odd_blocks[j], IndexRange(pos, pos + p.b));
            ASSERT_EQ(p.even_blocks[j], IndexRange(pos + p.b, pos + 2 * p.b));
            pos += 2 * p.b;
        }
        ASSERT_LE(pos, T);
    }
}

TEST(Blocks, TooShortReportsMinimalLength) {
    try {
        make_blocks(10, 0.05, 2.0, 0.5, 1.0);
        FAIL() << "expected TrajectoryTooShort";
    } catch (const TrajectoryTooShort& e) {
        const long long tmin = e.min_length();
        EXPECT_NO_THROW(make_blocks(tmin, 0.05, 2.0, 0.5, 1.0));
        EXPECT_THROW(make_blocks(tmin - 1, 0.05, 2.0, 0.5, 1.0), TrajectoryTooShort);
    }
}

TEST(Covering, HandValues) {
    EXPECT_NEAR(covering_bound_kernel(1.0, 1.0, 16, 0.1), 16.0 * std::log(1.0 + 20.0 * std::sqrt(2.0)), 1e-12);
    EXPECT_NEAR(covering_bound_kernel(2.0, 0.5, 4, 1.0), 4.0 * std::log(1.0 + 2.0 * std::sqrt(2.0)), 1e-12);
    EXPECT_NEAR(covering_bound_nn(4, 2, 0.5), 32.0 * std::log(1.0 + std::sqrt(2.0) * 2.0 * 2.0 / 0.5), 1e-12);
    EXPECT_GT(covering_bound_kernel(1.0, 1.0, 16, 0.01), covering_bound_kernel(1.0, 1.0, 16, 0.1));
}

TEST(Theorem1, HandRecheck) {
    const double B_r = std::sqrt(2.0);
    const long long n = 10, T = 1000;
    const Theorem1Terms t = theorem1_bound(B_r, kernel_log_cover, n, T, 0.05, 2.0, 0.5, 1.0, 0.01);
    // b for length nT = 10000: ceil(2 log(8 * 10000 / 0.05)) = ceil(2 log 1.6e6) = 29.
    EXPECT_EQ(t.b, 29);
    const double nT = 10000.0, m = nT / 58.0;
    const double expected = 32.0 * 29 / nT + 48.0 * B_r / std::sqrt(m) * std::sqrt(kernel_log_cover(1.0 / std::sqrt(m))) +
                            12.0 * B_r * std::sqrt(std::log(4.0 / 0.025) / (nT / 29.0)) + 0.01;
    EXPECT_NEAR(t.bound, expected, 1e-9 * expected);
    EXPECT_NEAR(t.m, m, 1e-9);
}

TEST(Theorem1, Monotonicity) {
    double prev = std::numeric_limits<double>::infinity();
    for (const long long n : {10LL, 100LL, 1000LL, 10000LL}) {
        const double b = theorem1_bound(1.0, kernel_log_cover, n, 200, 0.05, 2.0, 0.5, 1.0, 0.0).bound;
        ASSERT_LT(b, prev);
        prev = b;
    }
    const auto at = [](double B_r, double delta, double eps_opt) {
        return theorem1_bound(B_r, kernel_log_cover, 100, 200, delta, 2.0, 0.5, 1.0, eps_opt).bound;
    };
    EXPECT_LT(at(1.0, 0.05, 0.0), at(2.0, 0.05, 0.0));
    EXPECT_LT(at(1.0, 0.1, 0.0), at(1.0, 0.01, 0.0));
    EXPECT_NEAR(at(1.0, 0.05, 0.3) - at(1.0, 0.05, 0.0), 0.3, 1e-12);
}

TEST(Rademacher, SingleHeadIsExact) {
    Fixture f;
    const MeanSe r = kernel_rademacher(f.fs, {{2, 1}}, 1.7, 50, 3);
    EXPECT_NEAR(r.mean, 1.7 * reward_features(f.fs, 2, 1).norm(), 1e-14);
    EXPECT_NEAR(r.se, 0.0, 1e-14);
    EXPECT_EQ(kernel_rademacher(f.fs, {{0, 0}, {1, 2}, {3, 1}}, 0.0, 20, 3).mean, 0.0);
    EXPECT_THROW(kernel_rademacher(f.fs, {}, 1.0, 20, 3), InvalidArgument);
}

TEST(Rademacher, MatchesSignEnumeration) {
    Fixture f;
    const std::vector<std::pair<int, int>> heads{{0, 0}, {1, 2}, {2, 1}, {3, 0}, {4, 2}, {0, 1}};
    double exact = 0.0;
    for (int mask = 0; mask < 64; ++mask) {
        Vector acc = Vector::Zero(f.fs.q);
        for (int t = 0; t < 6; ++t)
            acc += ((mask >> t) & 1 ? 1.0 : -1.0) * reward_features(f.fs, heads[t].first, heads[t].second);
        exact += acc.norm() / 6.0;
    }
    exact /= 64.0;
    const MeanSe r = kernel_rademacher(f.fs, heads, 1.0, 20000, 11);
    EXPECT_LE(std::abs(r.mean - exact), 3.0 * r.se);
}

TEST(Helpers, MedianAndSlope) {
    EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
    EXPECT_NEAR(loglog_slope({1.0, 10.0, 100.0}, {5.0, 5.0 / std::sqrt(10.0), 0.5}), -0.5, 1e-12);
}

TEST(GapExperiment, ShapeAndDeterminism) {
    Fixture f;
    const PolicyChain expert = f.chain(1), learned = f.chain(2);
    GapOptions opt;
    opt.trajectory_length = 50;
    opt.burn_in = 10;
    opt.seed = 4;
    const GapExperiment a = generalization_gap_experiment(f.mdp, f.fs, expert.policy, expert, learned, 1.0, {100, 1000}, 3, opt);
    const GapExperiment b = generalization_gap_experiment(f.mdp, f.fs, expert.policy, expert, learned, 1.0, {100, 1000}, 3, opt);
    ASSERT_EQ(a.rows.size(), 6u);
    ASSERT_EQ(a.median_gap.size(), 2u);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_GE(a.rows[i].gap, 0.0);
        EXPECT_EQ(a.rows[i].gap, b.rows[i].gap);
        EXPECT_NEAR(a.rows[i].exact_d, exact_r_distance(f.fs, expert, learned, 1.0), 1e-15);
        EXPECT_NEAR(a.rows[i].gap, std::abs(a.rows[i].empirical_d - a.rows[i].exact_d), 1e-15);
    }
}
