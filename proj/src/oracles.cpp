#include "gail/oracles.hpp"

#include "gail/errors.hpp"

#include <cmath>
#include <numbers>

namespace gail {

namespace {

Eigen::MatrixXd augmented_operator(const PolicyChain& chain) {
    const int n = chain.n_pairs();
    Eigen::MatrixXd a(n + 1, n);
    a.topRows(n) = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd(chain.kernel);
    a.row(n) = chain.stationary.transpose();
    return a;
}

}  // namespace

PoissonSolver::PoissonSolver(const PolicyChain& chain)
    : kernel_(chain.kernel), stationary_(chain.stationary), qr_(augmented_operator(chain)) {
    qr_.setThreshold(1e-10);
    // I - P has a one-dimensional null space (constants); the appended row removes it.
    if (qr_.rank() < chain.n_pairs())
        throw SingularSystem("Poisson system is rank-deficient (rank " + std::to_string(qr_.rank()) + " < " +
                             std::to_string(chain.n_pairs()) + "); chain is not ergodic");
}

Eigen::MatrixXd PoissonSolver::solve(const Eigen::MatrixXd& rewards, Eigen::VectorXd& gains) const {
    const auto n = stationary_.size();
    gains = rewards.transpose() * stationary_;
    Eigen::MatrixXd rhs(n + 1, rewards.cols());
    rhs.topRows(n) = rewards;
    rhs.topRows(n).rowwise() -= gains.transpose();
    rhs.row(n).setZero();
    Eigen::MatrixXd q = qr_.solve(rhs);
    // A constant reward has gain equal to the constant and Q identically zero; take that
    // exactly instead of the rounding left by the solve.
    for (Eigen::Index c = 0; c < rewards.cols(); ++c) {
        if (rewards.col(c).maxCoeff() == rewards.col(c).minCoeff()) {
            gains[c] = rewards(0, c);
            q.col(c).setZero();
        }
    }
    return q;
}

Vector PoissonSolver::solve(const Vector& reward, double& gain) const {
    Eigen::VectorXd gains;
    const Eigen::MatrixXd q = solve(Eigen::MatrixXd(reward), gains);
    gain = gains[0];
    return q.col(0);
}

double PoissonSolver::residual(const Vector& q, const Vector& reward, double gain) const {
    const Vector expected = reward.array() - gain + (kernel_ * q).array();
    return (q - expected).lpNorm<Eigen::Infinity>();
}

double exact_avg_reward(const PolicyChain& chain, const KernelReward& reward, const FeatureSystem& fs) {
    return chain.stationary.dot(reward.values(fs));
}

ExactEval solve_poisson(const PolicyChain& chain, const KernelReward& reward, const FeatureSystem& fs) {
    const PoissonSolver solver(chain);
    ExactEval out;
    const Vector q = solver.solve(reward.values(fs), out.avg_reward);
    out.q_function = Eigen::Map<const Matrix>(q.data(), chain.n_states, chain.n_actions);
    return out;
}

PolicyOracle::PolicyOracle(const TabularMDP& mdp, const FeatureSystem& fs, const SoftmaxPolicy& policy)
    : policy_(policy),
      chain_(induced_chain(mdp, policy, fs)),
      log_probs_(policy.log_probabilities(fs)),
      scores_(score_table(policy, fs)) {
    const Vector& rho = chain_.stationary;
    G_ = fs.table.transpose() * rho;

    const int n = chain_.n_pairs();
    Eigen::MatrixXd rewards(n, fs.q + 1);
    rewards.leftCols(fs.q) = fs.table;
    rewards.col(fs.q) = -Eigen::Map<const Vector>(log_probs_.data(), n);
    const PoissonSolver solver(chain_);
    Eigen::VectorXd gains;
    const Eigen::MatrixXd q = solver.solve(rewards, gains);
    q_features_ = q.leftCols(fs.q);
    q_entropy_ = q.col(fs.q);
    entropy_ = gains[fs.q];

    // Policy gradient theorem: d/d omega E_rho[r] = sum rho(x) score(x) Q_r(x).
    const Eigen::MatrixXd weighted_scores = scores_.transpose() * rho.asDiagonal();  // dim x pairs
    jac_t_ = weighted_scores * q_features_;
    entropy_grad_ = weighted_scores * q_entropy_;
}

double PolicyOracle::avg_reward_table(const Matrix& reward) const {
    return chain_.stationary.dot(Eigen::Map<const Vector>(reward.data(), reward.size()));
}

double PolicyOracle::objective(const Vector& theta, double lambda, double mu, const Vector& demo_fe) const {
    return theta.dot(G_ - demo_fe) - lambda * entropy_ - 0.5 * mu * theta.squaredNorm();
}

Vector PolicyOracle::grad_omega(const Vector& theta, double lambda) const {
    return jac_t_ * theta - lambda * entropy_grad_;
}

Vector PolicyOracle::grad_theta(const Vector& theta, double mu, const Vector& demo_fe) const {
    return G_ - demo_fe - mu * theta;
}

Vector PolicyOracle::theta_star(double mu, const Vector& demo_fe) const { return (G_ - demo_fe) / mu; }

Vector PolicyOracle::combined_q(const Vector& theta, double lambda) const {
    return q_features_ * theta - lambda * q_entropy_;
}

double exact_objective(const TabularMDP& mdp, const FeatureSystem& fs, const SoftmaxPolicy& policy,
                       const KernelReward& reward, double lambda, double mu, const Vector& demo_fe) {
    if (reward.theta.norm() > reward.kappa + 1e-9)
        throw BallViolation("exact_objective: |theta| = " + std::to_string(reward.theta.norm()) + " exceeds kappa");
    return PolicyOracle(mdp, fs, policy).objective(reward.theta, lambda, mu, demo_fe);
}

Vector exact_grad_omega(const TabularMDP& mdp, const FeatureSystem& fs, const SoftmaxPolicy& policy,
                        const KernelReward& reward, double lambda) {
    return PolicyOracle(mdp, fs, policy).grad_omega(reward.theta, lambda);
}

Vector exact_grad_theta(const TabularMDP& mdp, const FeatureSystem& fs, const SoftmaxPolicy& policy,
                        const KernelReward& reward, double mu, const Vector& demo_fe) {
    const PolicyChain chain = induced_chain(mdp, policy, fs);
    return feature_expectation(fs, chain.stationary) - demo_fe - mu * reward.theta;
}

SmoothnessConstants lipschitz_constants(const RegularityConstants& rc, double rho_g, double kappa, int q) {
    const double mix = rc.chi / (1.0 - rc.upsilon);
    SmoothnessConstants out;
    out.L_omega = 2.0 * std::numbers::sqrt2 * (rc.S_pi + 2.0 * rc.B_omega * rc.L_rho) * kappa * rho_g * mix +
                  rc.B_omega * rc.L_Q;
    out.S_omega = 2.0 * std::sqrt(2.0 * q) * kappa * rho_g * mix * rc.B_omega;
    return out;
}

SmoothnessConstants lipschitz_constants(const RegularityConstants& rc, const FeatureSystem& fs, double kappa, int q) {
    return lipschitz_constants(rc, fs.rho_g, kappa, q);
}

double q_function_bound(const RegularityConstants& rc, double rho_g, double kappa) {
    return 2.0 * std::numbers::sqrt2 * kappa * rho_g * rc.chi / (1.0 - rc.upsilon);
}

double objective_lower_bound(double rho_g, double kappa, double mu, double lambda, double B_H) {
    return -(2.0 * std::numbers::sqrt2 * rho_g * kappa + 0.5 * mu * kappa * kappa + lambda * B_H);
}

double greedy_objective_bound(double rho_g, double mu, double lambda, double B_H) {
    return 12.0 * rho_g * rho_g / mu + lambda * B_H;
}

}  // namespace gail
