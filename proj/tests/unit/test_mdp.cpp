#include "gail/errors.hpp"
#include "gail/kv_text.hpp"
#include "gail/mdp.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace gail;

namespace {

Matrix uniform_policy(int nS, int nA) { return Matrix::Constant(nS, nA, 1.0 / nA); }

Matrix random_policy(int nS, int nA, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Matrix p(nS, nA);
    for (int s = 0; s < nS; ++s) {
        for (int a = 0; a < nA; ++a) p(s, a) = u(rng);
        p.row(s) /= p.row(s).sum();
    }
    return p;
}

// Birth-death chain on n states with up/down probabilities, one action.
TabularMDP birth_death(int n, double up, double down) {
    TabularMDP m;
    m.n_states = n;
    m.n_actions = 1;
    m.transition = Matrix::Zero(n, n);
    for (int s = 0; s < n; ++s) {
        if (s + 1 < n) m.transition(s, s + 1) = up;
        if (s > 0) m.transition(s, s - 1) = down;
        m.transition(s, s) = 1.0 - m.transition.row(s).sum();
    }
    m.initial_dist = Vector::Constant(n, 1.0 / n);
    return m;
}

}  // namespace

TEST(Mdp, RandomMdpIsValid) {
    const TabularMDP m = random_mdp(5, 3, 11);
    EXPECT_NO_THROW(m.validate());
    for (Eigen::Index r = 0; r < m.transition.rows(); ++r) EXPECT_NEAR(m.transition.row(r).sum(), 1.0, 1e-12);
    ASSERT_TRUE(m.eval_reward.has_value());
    EXPECT_GE(m.eval_reward->minCoeff(), 0.0);
    EXPECT_LT(m.eval_reward->maxCoeff(), 1.0);
}

TEST(Mdp, ValidateNamesTheBadRow) {
    TabularMDP m = random_mdp(3, 2, 1);
    m.transition(4, 0) += 0.5;
    try {
        m.validate();
        FAIL() << "expected InvalidArgument";
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("4"), std::string::npos) << e.what();
    }
}

TEST(Mdp, KvRoundTripIsExact) {
    const TabularMDP m = random_mdp(4, 2, 5);
    std::istringstream in(mdp_to_kv(m).to_string());
    const TabularMDP back = mdp_from_kv(KvDocument::parse(in));
    EXPECT_EQ(back.transition, m.transition);
    EXPECT_EQ(back.initial_dist, m.initial_dist);
    EXPECT_EQ(*back.eval_reward, *m.eval_reward);
}

TEST(Mdp, UnknownKeyInMdpFileIsAnError) {
    std::istringstream in(mdp_to_kv(random_mdp(2, 2, 5)).to_string() + "bogus = 1\n");
    EXPECT_THROW(mdp_from_kv(KvDocument::parse(in)), ParseError);
}

TEST(InducedChain, OneStateOneAction) {
    TabularMDP m;
    m.n_states = 1;
    m.n_actions = 1;
    m.transition = Matrix::Ones(1, 1);
    m.initial_dist = Vector::Ones(1);
    const PolicyChain c = induced_chain(m, Matrix::Ones(1, 1));
    ASSERT_EQ(c.stationary.size(), 1);
    EXPECT_DOUBLE_EQ(c.stationary[0], 1.0);
}

TEST(InducedChain, SymmetricTwoStateIsUniform) {
    const TabularMDP m = oracle::two_state(0.5, 0.5, 3);
    const PolicyChain c = induced_chain(m, uniform_policy(2, 3));
    for (Eigen::Index i = 0; i < c.stationary.size(); ++i) EXPECT_NEAR(c.stationary[i], 1.0 / 6.0, 1e-12);
}

TEST(InducedChain, KernelMatchesDefinition) {
    const TabularMDP m = random_mdp(4, 3, 2);
    const Matrix pol = random_policy(4, 3, 3);
    const PolicyChain c = induced_chain(m, pol);
    EXPECT_LE((c.kernel - oracle::pair_kernel(m, pol)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(InducedChain, MatchesEigensolverOnSeededMdp) {
    const TabularMDP m = random_mdp(5, 3, 7);
    const PolicyChain c = induced_chain(m, random_policy(5, 3, 8));
    const Vector ref = oracle::stationary_eig(c.kernel);
    EXPECT_LE((c.stationary - ref).lpNorm<Eigen::Infinity>(), 1e-8);
}

// Property: over 50 seeds, rows sum to one and the fixed-point residual is tiny.
TEST(InducedChain, PropertyRowsAndFixedPoint) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const int nS = 2 + static_cast<int>(seed % 5), nA = 1 + static_cast<int>(seed % 3);
        const TabularMDP m = random_mdp(nS, nA, seed, 0.5 + 0.1 * static_cast<double>(seed % 7));
        const PolicyChain c = induced_chain(m, random_policy(nS, nA, seed + 100));
        for (Eigen::Index r = 0; r < c.kernel.rows(); ++r) ASSERT_NEAR(c.kernel.row(r).sum(), 1.0, 1e-12);
        const Vector resid = c.kernel.transpose() * c.stationary - c.stationary;
        ASSERT_LE(resid.lpNorm<Eigen::Infinity>(), 1e-10) << "seed " << seed;
        ASSERT_NEAR(c.stationary.sum(), 1.0, 1e-12);
        ASSERT_GE(c.stationary.minCoeff(), 0.0);
    }
}

TEST(InducedChain, TwoAbsorbingStatesAreRejected) {
    TabularMDP m;
    m.n_states = 2;
    m.n_actions = 1;
    m.transition = Matrix::Identity(2, 2);
    m.initial_dist = Vector::Constant(2, 0.5);
    EXPECT_THROW(induced_chain(m, Matrix::Ones(2, 1)), NonErgodicChain);
}

TEST(FitMixing, OneStepMixingIsExact) {
    // Every row of the kernel already equals the stationary distribution.
    TabularMDP m;
    m.n_states = 3;
    m.n_actions = 1;
    m.transition = Matrix(3, 3);
    for (int r = 0; r < 3; ++r) m.transition.row(r) << 0.2, 0.3, 0.5;
    m.initial_dist = Vector::Constant(3, 1.0 / 3.0);
    const PolicyChain c = induced_chain(m, Matrix::Ones(3, 1));
    Vector rho0 = Vector::Zero(3);
    rho0[0] = 1.0;
    const MixingFit f = fit_mixing(c, rho0, 50);
    EXPECT_TRUE(f.exact);
    const BetaMixingCurve b = beta_mixing_curve(c, 20);
    EXPECT_TRUE(b.exact);
    for (double v : b.beta_hat) EXPECT_LE(v, 1e-15);
}

TEST(FitMixing, LazyTwoStateRateMatchesSpectrum) {
    const TabularMDP m = oracle::two_state(0.2, 0.2, 1);
    const PolicyChain c = induced_chain(m, Matrix::Ones(2, 1));
    ASSERT_NEAR(oracle::second_eigenvalue(c.kernel), 0.6, 1e-12);
    Vector rho0 = Vector::Zero(2);
    rho0[0] = 1.0;
    EXPECT_NEAR(fit_mixing(c, rho0, 100).upsilon, 0.6, 0.05);
    EXPECT_NEAR(fit_mixing_worst_case(c, 100).upsilon, 0.6, 0.05);
}

TEST(FitMixing, EnvelopeHoldsAboveNoiseFloor) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const TabularMDP m = random_mdp(5, 3, seed);
        const PolicyChain c = induced_chain(m, random_policy(5, 3, seed + 1));
        const Vector rho0 = c.initial_pair_dist(m);
        const MixingFit f = fit_mixing(c, rho0, 200);
        // Recompute the curve directly with dense matrix powers.
        Eigen::MatrixXd power = c.kernel;
        for (int t = 1; t <= 200; ++t) {
            const Vector dist = power.transpose() * rho0;
            const double d = 0.5 * (dist - c.stationary).lpNorm<1>();
            if (d > 1e-10) {
                ASSERT_LE(d, 1.05 * f.chi * std::pow(f.upsilon, t) * (1 + 1e-12)) << "seed " << seed << " t " << t;
            }
            power = power * Eigen::MatrixXd(c.kernel);
        }
        const MixingFit w = fit_mixing_worst_case(c, 200);
        power = Eigen::MatrixXd::Identity(15, 15);
        for (int t = 0; t <= 200; ++t) {
            double worst = 0.0;
            for (int x = 0; x < 15; ++x) worst = std::max(worst, 0.5 * (power.row(x).transpose() - c.stationary).lpNorm<1>());
            if (worst > 1e-10) {
                ASSERT_LE(worst, 1.05 * w.chi * std::pow(w.upsilon, t) * (1 + 1e-12));
            }
            power = power * Eigen::MatrixXd(c.kernel);
        }
        // The worst-case envelope also dominates the start-specific curve.
        ASSERT_GE(w.chi * std::pow(w.upsilon, 1), 0.5 * (c.kernel.transpose() * rho0 - c.stationary).lpNorm<1>() / 1.05);
    }
}

TEST(FitMixing, GeometricCurveRecoversParameters) {
    std::vector<double> curve;
    for (int t = 1; t <= 40; ++t) curve.push_back(3.0 * std::pow(0.7, t));
    const MixingFit f = fit_geometric_envelope(curve, 1, 1.05);
    EXPECT_NEAR(f.upsilon, 0.7, 1e-9);
    EXPECT_NEAR(f.chi, 3.0, 1e-6);
}

TEST(BetaMixing, TwoStateDecaysLikeSpectrum) {
    const PolicyChain c = induced_chain(oracle::two_state(0.2, 0.2, 1), Matrix::Ones(2, 1));
    const BetaMixingCurve b = beta_mixing_curve(c, 30);
    for (int k = 1; k <= 30; ++k) {
        const double ratio = b.beta_hat[k - 1] / (b.beta_hat[0] * std::pow(0.6, k - 1));
        EXPECT_GT(ratio, 0.5);
        EXPECT_LT(ratio, 2.0);
    }
}

TEST(BetaMixing, EnvelopeDominatesCurve) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const PolicyChain c = induced_chain(random_mdp(4, 2, seed), random_policy(4, 2, seed + 50));
        const BetaMixingCurve b = beta_mixing_curve(c, 100);
        for (int k = 1; k <= 100; ++k) {
            const double v = b.beta_hat[k - 1];
            if (v > 1e-10) {
                ASSERT_LE(v, b.beta0 * std::exp(-b.beta1 * k) * (1 + 1e-12)) << "seed " << seed << " k " << k;
            }
        }
    }
}

TEST(BetaMixing, MonotoneOnBirthDeathChains) {
    for (int n = 2; n <= 8; ++n) {
        const TabularMDP m = birth_death(n, 0.3, 0.2 + 0.02 * n);
        const BetaMixingCurve b = beta_mixing_curve(induced_chain(m, Matrix::Ones(n, 1)), 80);
        for (std::size_t k = 1; k < b.beta_hat.size(); ++k) ASSERT_LE(b.beta_hat[k], b.beta_hat[k - 1] + 1e-12);
    }
}

TEST(PolicyIteration, MatchesBruteForceOverDeterministicPolicies) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const TabularMDP m = random_mdp(4, 3, seed + 20);
        const PolicyIterationResult pi = average_reward_policy_iteration(m);
        double best = -1.0;
        std::vector<int> acts(4, 0);
        for (int code = 0; code < 81; ++code) {
            int c = code;
            Matrix pol = Matrix::Zero(4, 3);
            for (int s = 0; s < 4; ++s) {
                acts[s] = c % 3;
                c /= 3;
                pol(s, acts[s]) = 1.0;
            }
            const Vector rho = oracle::stationary_eig(oracle::pair_kernel(m, pol));
            const Vector r = Eigen::Map<const Vector>(m.eval_reward->data(), 12);
            best = std::max(best, rho.dot(r));
        }
        EXPECT_NEAR(pi.gain, best, 1e-9) << "seed " << seed;
    }
}

TEST(PolicyIteration, NeedsEvalReward) {
    TabularMDP m = random_mdp(3, 2, 1);
    m.eval_reward.reset();
    EXPECT_THROW(average_reward_policy_iteration(m), MissingExpert);
}
