#include "gail/errors.hpp"
#include "gail/features.hpp"
#include "gail/mdp.hpp"
#include "gail/policy.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

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
};

Vector random_omega(Eigen::Index dim, double scale, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, scale);
    Vector w(dim);
    for (Eigen::Index i = 0; i < dim; ++i) w[i] = n(rng);
    return w;
}

}  // namespace

TEST(Softmax, ProbabilitiesMatchDirectFormula) {
    Fixture f;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Vector w = random_omega(15, 2.0, seed);
        const double temp = 0.5 + 0.1 * static_cast<double>(seed);
        const SoftmaxPolicy p(w, 3, 5, temp);
        EXPECT_LE((p.probabilities(f.fs) - oracle::softmax_table(f.fs, w, temp)).cwiseAbs().maxCoeff(), 1e-14);
        EXPECT_LE((p.log_probabilities(f.fs).array().exp().matrix() - oracle::softmax_table(f.fs, w, temp))
                      .cwiseAbs()
                      .maxCoeff(),
                  1e-14);
    }
}

TEST(Softmax, ExtremeLogitsStayFinite) {
    Fixture f;
    const SoftmaxPolicy p(random_omega(15, 1e4, 1), 3, 5);
    EXPECT_TRUE(p.probabilities(f.fs).allFinite());
    EXPECT_TRUE(p.log_probabilities(f.fs).allFinite());
}

TEST(Score, UniformTwoActionBlocks) {
    const TabularMDP mdp = random_mdp(3, 2, 1);
    FeatureOptions fo;
    fo.seed = 2;
    const FeatureSystem fs = build_features(mdp, fo);
    const SoftmaxPolicy p(2, fs.d_state);
    for (int s = 0; s < 3; ++s) {
        const Vector g = log_prob_grad(p, fs, s, 1);
        const Vector psi = fs.psi_state.row(s).transpose();
        EXPECT_LE((g.segment(0, fs.d_state) + 0.5 * psi).norm(), 1e-15);
        EXPECT_LE((g.segment(fs.d_state, fs.d_state) - 0.5 * psi).norm(), 1e-15);
    }
}

TEST(Score, ZeroMeanPerStateProperty) {
    Fixture f;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const SoftmaxPolicy p(random_omega(15, 3.0, seed), 3, 5);
        const Matrix probs = p.probabilities(f.fs);
        for (int s = 0; s < 5; ++s) {
            Vector acc = Vector::Zero(15);
            for (int a = 0; a < 3; ++a) acc += probs(s, a) * log_prob_grad(p, f.fs, s, a);
            ASSERT_LE(acc.norm(), 1e-10);
        }
    }
}

TEST(Score, MatchesFiniteDifferencesOfLogProb) {
    Fixture f;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Vector w = random_omega(15, 1.5, seed + 7);
        for (int s = 0; s < 5; ++s)
            for (int a = 0; a < 3; ++a) {
                const auto logp = [&](const Vector& x) { return std::log(oracle::softmax_table(f.fs, x)(s, a)); };
                const Vector fd = oracle::central_diff(logp, w, 1e-5);
                const Vector g = log_prob_grad(SoftmaxPolicy(w, 3, 5), f.fs, s, a);
                ASSERT_LE((g - fd).norm(), 1e-6 * std::max(1.0, g.norm()));
            }
    }
}

TEST(Score, ScoreTableAgreesAndIsBounded) {
    Fixture f;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const SoftmaxPolicy p(random_omega(15, 4.0, seed), 3, 5);
        const Matrix table = score_table(p, f.fs);
        for (int s = 0; s < 5; ++s)
            for (int a = 0; a < 3; ++a) {
                const Vector g = log_prob_grad(p, f.fs, s, a);
                ASSERT_LE((table.row(s * 3 + a).transpose() - g).norm(), 1e-14);
                ASSERT_LE(g.norm(), std::numbers::sqrt2);
            }
    }
}

TEST(Entropy, UniformIsLogActions) {
    Fixture f;
    const SoftmaxPolicy p = SoftmaxPolicy::uniform(f.fs);
    EXPECT_NEAR(entropy(p, f.fs, induced_chain(f.mdp, p, f.fs)), std::log(3.0), 1e-14);
}

TEST(Entropy, NearDeterministicPolicyHasSmallEntropy) {
    Fixture f;
    const SoftmaxPolicy base = softened_deterministic_policy(f.fs, {0, 2, 1, 1, 0}, 1.0);
    const SoftmaxPolicy sharp = base.with_omega(base.omega() * 50.0);
    EXPECT_LE(entropy(sharp, f.fs, induced_chain(f.mdp, sharp, f.fs)), 0.01);
}

TEST(Entropy, InRangeForProbedPolicies) {
    Fixture f;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const SoftmaxPolicy p(random_omega(15, 3.0, seed + 300), 3, 5);
        const double h = entropy(p, f.fs, induced_chain(f.mdp, p, f.fs));
        ASSERT_GE(h, 0.0);
        ASSERT_LE(h, std::log(3.0) + 1e-12);
    }
}

TEST(Entropy, MatchesMonteCarlo) {
    Fixture f;
    const Vector w = random_omega(15, 1.0, 42);
    const SoftmaxPolicy p(w, 3, 5);
    const PolicyChain chain = induced_chain(f.mdp, p, f.fs);
    const double h = entropy(p, f.fs, chain);
    const Matrix probs = oracle::softmax_table(f.fs, w);
    std::mt19937_64 rng(5);
    std::discrete_distribution<int> pick(chain.stationary.data(), chain.stationary.data() + chain.stationary.size());
    const int n = 1000000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const int x = pick(rng);
        const double v = -std::log(probs(x / 3, x % 3));
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum_sq / n - mean * mean) / n);
    EXPECT_LE(std::abs(mean - h), 3.0 * se);
}

TEST(Entropy, RejectsChainOfAnotherPolicy) {
    Fixture f;
    const SoftmaxPolicy a(random_omega(15, 1.0, 1), 3, 5);
    const SoftmaxPolicy b(random_omega(15, 1.0, 2), 3, 5);
    EXPECT_THROW(entropy(a, f.fs, induced_chain(f.mdp, b, f.fs)), ChainMismatch);
}

TEST(Regularity, SingleActionDegenerates) {
    const TabularMDP mdp = random_mdp(4, 1, 3);
    FeatureOptions fo;
    fo.seed = 4;
    const FeatureSystem fs = build_features(mdp, fo);
    const RegularityConstants rc = estimate_regularity(fs, mdp, 100, 1);
    EXPECT_EQ(rc.B_omega, 0.0);
    EXPECT_EQ(rc.S_pi, 0.0);
    EXPECT_EQ(rc.B_H, 0.0);
}

TEST(Regularity, EntropyBoundAndReproducibility) {
    Fixture f;
    const RegularityConstants a = estimate_regularity(f.fs, f.mdp, 100, 17);
    const RegularityConstants b = estimate_regularity(f.fs, f.mdp, 100, 17);
    EXPECT_NEAR(a.B_H, 1.0986, 1e-4);
    EXPECT_EQ(a.S_pi, b.S_pi);
    EXPECT_EQ(a.L_rho, b.L_rho);
    EXPECT_EQ(a.L_Q, b.L_Q);
    EXPECT_EQ(a.S_H, b.S_H);
    EXPECT_EQ(a.chi, b.chi);
    EXPECT_EQ(a.upsilon, b.upsilon);
    EXPECT_THROW(estimate_regularity(f.fs, f.mdp, 99, 17), InvalidArgument);
}

TEST(Regularity, StationaryLipschitzHoldsOnFreshPairs) {
    Fixture f;
    const RegularityConstants rc = estimate_regularity(f.fs, f.mdp, 200, 1);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Vector w1 = oracle::sphere(15, 5.0 * std::pow(u(rng), 1.0 / 15), rng);
        const Vector w2 = i % 2 == 0 ? oracle::sphere(15, 5.0 * std::pow(u(rng), 1.0 / 15), rng)
                                     : Vector(w1 + oracle::sphere(15, 0.05 * u(rng) + 1e-4, rng));
        const Vector r1 = oracle::stationary_eig(oracle::pair_kernel(f.mdp, oracle::softmax_table(f.fs, w1)));
        const Vector r2 = oracle::stationary_eig(oracle::pair_kernel(f.mdp, oracle::softmax_table(f.fs, w2)));
        worst = std::max(worst, 0.5 * (r1 - r2).lpNorm<1>() / (w1 - w2).norm());
    }
    EXPECT_LE(worst, rc.L_rho);
}

TEST(Softened, PutsMassOnTheChosenActions) {
    Fixture f;
    const std::vector<int> acts{1, 2, 2, 1, 2};
    const Matrix p = softened_deterministic_policy(f.fs, acts, 5.0).probabilities(f.fs);
    for (int s = 0; s < 5; ++s) {
        Eigen::Index best;
        p.row(s).maxCoeff(&best);
        EXPECT_EQ(best, acts[s]);
    }
}

TEST(PolicyFile, RoundTripAndFingerprintCheck) {
    Fixture f;
    const SoftmaxPolicy p(random_omega(15, 1.0, 3), 3, 5, 0.7);
    std::istringstream in(policy_to_kv(p, f.fs).to_string());
    const SoftmaxPolicy back = policy_from_kv(KvDocument::parse(in), f.fs);
    EXPECT_EQ(back.omega(), p.omega());
    EXPECT_EQ(back.temperature(), 0.7);

    FeatureOptions fo;
    fo.seed = 9;
    const FeatureSystem other = build_features(f.mdp, fo);
    std::istringstream in2(policy_to_kv(p, f.fs).to_string());
    EXPECT_THROW(policy_from_kv(KvDocument::parse(in2), other), InvalidArgument);
}

TEST(ProbePair, DeterministicAndLocalForOddIndices) {
    const auto [a1, b1] = probe_pair(15, 5.0, 3, 7);
    const auto [a2, b2] = probe_pair(15, 5.0, 3, 7);
    EXPECT_EQ(a1, a2);
    EXPECT_EQ(b1, b2);
    EXPECT_LE((a1 - b1).norm(), 5.0 * 1e-2 * 1.05 + 1e-12);
    const auto [c, d] = probe_pair(15, 5.0, 3, 8);
    EXPECT_LE(c.norm(), 5.0);
    EXPECT_LE(d.norm(), 5.0);
}
