#include "gail/errors.hpp"
#include "gail/features.hpp"
#include "gail/mdp.hpp"
#include "gail/oracles.hpp"
#include "gail/policy.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
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
};

Vector gaussian(Eigen::Index dim, double scale, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, scale);
    Vector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = n(rng);
    return v;
}

Vector flat(const Matrix& q) {
    Vector out(q.size());
    for (Eigen::Index s = 0; s < q.rows(); ++s)
        for (Eigen::Index a = 0; a < q.cols(); ++a) out[s * q.cols() + a] = q(s, a);
    return out;
}

// F(omega, theta) from the eigensolver stationary vector and the direct softmax.
double objective_ref(const Fixture& f, const Vector& omega, const Vector& theta, double lambda, double mu,
                     const Vector& demo) {
    const Matrix pol = oracle::softmax_table(f.fs, omega);
    const Vector rho = oracle::stationary_eig(oracle::pair_kernel(f.mdp, pol));
    const Vector G = f.fs.table.transpose() * rho;
    double h = 0.0;
    for (int x = 0; x < rho.size(); ++x) h -= rho[x] * std::log(pol(x / f.fs.n_actions, x % f.fs.n_actions));
    return theta.dot(G - demo) - lambda * h - 0.5 * mu * theta.squaredNorm();
}

}  // namespace

TEST(Poisson, ResidualIsSmallEverywhere) {
    Fixture f;
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 20; ++rep) {
        const SoftmaxPolicy p(gaussian(15, 2.0, rng), 3, 5);
        const PolicyChain chain = induced_chain(f.mdp, p, f.fs);
        const KernelReward r{oracle::sphere(f.fs.q, 1.0, rng), 1.0};
        const ExactEval ev = solve_poisson(chain, r, f.fs);
        const Vector q = flat(ev.q_function);
        const Vector rv = f.fs.table * r.theta;
        const Vector resid = q - (rv.array() - ev.avg_reward).matrix() - Vector(chain.kernel * q);
        ASSERT_LE(resid.lpNorm<Eigen::Infinity>(), 1e-8);
        ASSERT_NEAR(chain.stationary.dot(q), 0.0, 1e-12);
    }
}

TEST(Poisson, ConstantRewardGivesZeroQ) {
    Fixture f;
    FeatureSystem fs = f.fs;
    fs.table.col(0).setConstant(0.7);
    Vector theta = Vector::Zero(fs.q);
    theta[0] = 1.0;
    const PolicyChain chain = induced_chain(f.mdp, SoftmaxPolicy::uniform(fs), fs);
    const ExactEval ev = solve_poisson(chain, KernelReward{theta, 1.0}, fs);
    EXPECT_EQ(ev.avg_reward, 0.7);
    EXPECT_EQ(ev.q_function.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(exact_avg_reward(chain, KernelReward{Vector::Zero(fs.q), 1.0}, fs), 0.0);
}

TEST(Poisson, TwoStateClosedForm) {
    // Action-independent transitions, action-dependent rewards: Q(s,a) = r(s,a) - J + (P V)(s)
    // with V the state-level solution V0 = rho1 D, V1 = -rho0 D, D = (rbar0 - rbar1)/(p + q).
    const double p = 0.3, q = 0.45;
    const TabularMDP m = oracle::two_state(p, q, 2);
    Matrix pol(2, 2);
    pol << 0.25, 0.75, 0.6, 0.4;
    const PolicyChain chain = induced_chain(m, pol);
    Vector r(4);
    r << 1.0, -0.5, 0.3, 2.0;
    double gain = 0.0;
    const Vector Q = PoissonSolver(chain).solve(r, gain);

    const double rho0 = q / (p + q), rho1 = p / (p + q);
    const double rbar0 = pol(0, 0) * r[0] + pol(0, 1) * r[1];
    const double rbar1 = pol(1, 0) * r[2] + pol(1, 1) * r[3];
    const double J = rho0 * rbar0 + rho1 * rbar1;
    const double D = (rbar0 - rbar1) / (p + q);
    const double V0 = rho1 * D, V1 = -rho0 * D;
    const double PV0 = (1 - p) * V0 + p * V1, PV1 = q * V0 + (1 - q) * V1;
    EXPECT_NEAR(gain, J, 1e-12);
    EXPECT_NEAR(Q[0], r[0] - J + PV0, 1e-10);
    EXPECT_NEAR(Q[1], r[1] - J + PV0, 1e-10);
    EXPECT_NEAR(Q[2], r[2] - J + PV1, 1e-10);
    EXPECT_NEAR(Q[3], r[3] - J + PV1, 1e-10);
}

TEST(Poisson, TruncatedSeriesAgrees) {
    Fixture f;
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 10; ++rep) {
        const SoftmaxPolicy p(gaussian(15, 2.0, rng), 3, 5);
        const PolicyChain chain = induced_chain(f.mdp, p, f.fs);
        const KernelReward r{oracle::sphere(f.fs.q, 1.0, rng), 1.0};
        const ExactEval ev = solve_poisson(chain, r, f.fs);
        const Vector q = flat(ev.q_function);
        const Vector series = oracle::q_series(chain.kernel, chain.stationary, f.fs.table * r.theta, 200);
        ASSERT_LE((q - series).lpNorm<Eigen::Infinity>(), 1e-6);
    }
}

TEST(AvgReward, MatchesLongSimulation) {
    Fixture f;
    std::mt19937_64 rng(3);
    const SoftmaxPolicy p(gaussian(15, 1.0, rng), 3, 5);
    const PolicyChain chain = induced_chain(f.mdp, p, f.fs);
    const KernelReward r{oracle::sphere(f.fs.q, 1.0, rng), 1.0};
    const Vector rv = f.fs.table * r.theta;
    const std::vector<int> path = oracle::simulate_pairs(f.mdp, chain.policy, 1000000, 11);
    // Batch means absorb the serial correlation in the standard error.
    const int batches = 1000, len = 1000;
    double sum = 0.0, sum_sq = 0.0;
    for (int b = 0; b < batches; ++b) {
        double m = 0.0;
        for (int t = 0; t < len; ++t) m += rv[path[static_cast<std::size_t>(b * len + t)]];
        m /= len;
        sum += m;
        sum_sq += m * m;
    }
    const double mean = sum / batches;
    const double se = std::sqrt((sum_sq / batches - mean * mean) / (batches - 1));
    EXPECT_LE(std::abs(mean - exact_avg_reward(chain, r, f.fs)), 3.0 * se);
}

TEST(Objective, TrivialValues) {
    Fixture f;
    std::mt19937_64 rng(4);
    const SoftmaxPolicy p(gaussian(15, 1.0, rng), 3, 5);
    const Vector demo = gaussian(f.fs.q, 0.1, rng);
    EXPECT_EQ(exact_objective(f.mdp, f.fs, p, KernelReward{Vector::Zero(f.fs.q), 1.0}, 0.0, 0.3, demo), 0.0);

    const PolicyOracle o(f.mdp, f.fs, p);
    const Vector theta = oracle::sphere(f.fs.q, 0.8, rng);
    EXPECT_NEAR(o.objective(theta, 0.0, 0.3, o.feature_expectation()), -0.15 * theta.squaredNorm(), 1e-15);
    EXPECT_THROW(exact_objective(f.mdp, f.fs, p, KernelReward{oracle::sphere(f.fs.q, 1.1, rng), 1.0}, 0.0, 0.3, demo),
                 BallViolation);
}

TEST(Objective, StronglyConcaveInTheta) {
    Fixture f;
    std::mt19937_64 rng(5);
    const double mu = 0.3;
    for (int rep = 0; rep < 50; ++rep) {
        const PolicyOracle o(f.mdp, f.fs, SoftmaxPolicy(gaussian(15, 2.0, rng), 3, 5));
        const Vector demo = gaussian(f.fs.q, 0.1, rng);
        const Vector t1 = oracle::sphere(f.fs.q, 1.0, rng), t2 = oracle::sphere(f.fs.q, 0.5, rng);
        const double mid = o.objective(0.5 * (t1 + t2), 0.1, mu, demo);
        const double ends = 0.5 * (o.objective(t1, 0.1, mu, demo) + o.objective(t2, 0.1, mu, demo));
        ASSERT_GE(mid - ends, mu / 8.0 * (t1 - t2).squaredNorm() - 1e-12);
    }
}

TEST(Objective, AgreesWithReferenceEvaluation) {
    Fixture f;
    std::mt19937_64 rng(6);
    for (int rep = 0; rep < 10; ++rep) {
        const Vector w = gaussian(15, 2.0, rng);
        const Vector theta = oracle::sphere(f.fs.q, 0.9, rng);
        const Vector demo = gaussian(f.fs.q, 0.1, rng);
        const PolicyOracle o(f.mdp, f.fs, SoftmaxPolicy(w, 3, 5));
        ASSERT_NEAR(o.objective(theta, 0.2, 0.3, demo), objective_ref(f, w, theta, 0.2, 0.3, demo), 1e-12);
    }
}

TEST(GradOmega, MatchesFiniteDifferences) {
    Fixture f;
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        const Vector w = gaussian(15, 2.0, rng);
        const Vector theta = oracle::sphere(f.fs.q, 1.0, rng);
        const Vector demo = gaussian(f.fs.q, 0.1, rng);
        const double lambda = rep % 2 == 0 ? 0.0 : 0.3;
        const Vector g = PolicyOracle(f.mdp, f.fs, SoftmaxPolicy(w, 3, 5)).grad_omega(theta, lambda);
        const Vector fd = oracle::central_diff(
            [&](const Vector& x) { return objective_ref(f, x, theta, lambda, 0.3, demo); }, w, 1e-5);
        ASSERT_LE((g - fd).norm(), 1e-5 * fd.norm()) << "rep " << rep;
    }
    const PolicyOracle o(f.mdp, f.fs, SoftmaxPolicy(gaussian(15, 1.0, rng), 3, 5));
    EXPECT_EQ(o.grad_omega(Vector::Zero(f.fs.q), 0.0).norm(), 0.0);
}

TEST(GradTheta, FiniteDifferencesAndIdentities) {
    Fixture f;
    std::mt19937_64 rng(8);
    const double mu = 0.3;
    for (int rep = 0; rep < 20; ++rep) {
        const Vector w = gaussian(15, 2.0, rng);
        const Vector demo = gaussian(f.fs.q, 0.1, rng);
        const PolicyOracle o(f.mdp, f.fs, SoftmaxPolicy(w, 3, 5));
        const Vector theta = oracle::sphere(f.fs.q, 0.7, rng);
        const Vector fd = oracle::central_diff([&](const Vector& t) { return o.objective(t, 0.1, mu, demo); }, theta, 1e-4);
        const Vector g = o.grad_theta(theta, mu, demo);
        ASSERT_LE((g - fd).norm(), 1e-7 * fd.norm());

        const Vector t2 = oracle::sphere(f.fs.q, 0.3, rng);
        ASSERT_LE((o.grad_theta(theta, mu, demo) - o.grad_theta(t2, mu, demo) + mu * (theta - t2)).lpNorm<Eigen::Infinity>(),
                  1e-12);
        ASSERT_LE(o.grad_theta(o.theta_star(mu, demo), mu, demo).norm(), 1e-14);
    }
    const PolicyOracle o(f.mdp, f.fs, SoftmaxPolicy(gaussian(15, 1.0, rng), 3, 5));
    const Vector theta = oracle::sphere(f.fs.q, 0.5, rng);
    EXPECT_LE((o.grad_theta(theta, mu, o.feature_expectation()) + mu * theta).norm(), 1e-15);
    const Vector g = exact_grad_theta(f.mdp, f.fs, o.policy(), KernelReward{theta, 1.0}, mu, o.feature_expectation());
    EXPECT_LE((g + mu * theta).norm(), 1e-15);
}

TEST(Lipschitz, HandSubstitution) {
    RegularityConstants rc;
    rc.chi = 1.0;
    rc.upsilon = 0.5;
    SmoothnessConstants z = lipschitz_constants(rc, 1.0, 1.0, 4);
    EXPECT_EQ(z.L_omega, 0.0);
    EXPECT_EQ(z.S_omega, 0.0);

    rc.S_pi = 1.0;
    rc.B_omega = std::numbers::sqrt2;
    rc.L_rho = 1.0;
    rc.L_Q = 1.0;
    const SmoothnessConstants c = lipschitz_constants(rc, 1.0, 1.0, 4);
    EXPECT_NEAR(c.L_omega, 2.0 * std::sqrt(2.0) * (1.0 + 2.0 * std::sqrt(2.0)) * 2.0 + std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(c.S_omega, 2.0 * std::sqrt(8.0) * std::sqrt(2.0) * 2.0, 1e-12);

    const SmoothnessConstants d = lipschitz_constants(rc, 1.0, 2.0, 4);
    const double first = c.L_omega - std::sqrt(2.0);
    EXPECT_NEAR(d.L_omega - std::sqrt(2.0), 2.0 * first, 1e-12);
    EXPECT_NEAR(d.S_omega, 2.0 * c.S_omega, 1e-12);

    EXPECT_NEAR(q_function_bound(rc, 1.5, 2.0), 2.0 * std::sqrt(2.0) * 2.0 * 1.5 * 1.0 / 0.5, 1e-12);
    EXPECT_NEAR(objective_lower_bound(1.5, 2.0, 0.3, 0.1, std::log(3.0)),
                -(2.0 * std::sqrt(2.0) * 1.5 * 2.0 + 0.15 * 4.0 + 0.1 * std::log(3.0)), 1e-12);
    EXPECT_NEAR(greedy_objective_bound(1.5, 0.3, 0.1, std::log(3.0)), 12.0 * 2.25 / 0.3 + 0.1 * std::log(3.0), 1e-12);
}

TEST(Bounds, QAndObjectiveBoundsHoldOnProbes) {
    Fixture f;
    const RegularityConstants rc = estimate_regularity(f.fs, f.mdp, 100, 3);
    const double kappa = 1.0, mu = 0.3, lambda = 0.1;
    const double BQ = q_function_bound(rc, f.fs.rho_g, kappa);
    const double lower = objective_lower_bound(f.fs.rho_g, kappa, mu, lambda, rc.B_H);
    const double BF = greedy_objective_bound(f.fs.rho_g, mu, lambda, rc.B_H);
    std::mt19937_64 rng(9);
    const Vector demo = PolicyOracle(f.mdp, f.fs, SoftmaxPolicy::uniform(f.fs)).feature_expectation();
    for (int rep = 0; rep < 100; ++rep) {
        const PolicyOracle o(f.mdp, f.fs, SoftmaxPolicy(gaussian(15, 2.0, rng), 3, 5));
        const Vector theta = oracle::sphere(f.fs.q, kappa, rng);
        ASSERT_LE((o.feature_q() * theta).lpNorm<Eigen::Infinity>(), BQ);
        ASSERT_GE(o.objective(theta, lambda, mu, demo), lower);
        ASSERT_LE(std::abs(o.objective(o.theta_star(mu, demo), lambda, mu, demo)), BF);
        ASSERT_LE(o.theta_star(mu, demo).norm(), 2.0 * std::sqrt(2.0) * f.fs.rho_g / mu);
    }
}
