#pragma once

// Exact tabular evaluation: average reward, Poisson-equation Q functions, the regularized
// objective F(omega, theta) = theta . (G(pi) - G_demo) - lambda H(pi) - mu/2 |theta|^2,
// and its exact gradients. These are the ground truth for every stochastic estimator.

#include "gail/features.hpp"
#include "gail/linalg.hpp"
#include "gail/mdp.hpp"
#include "gail/policy.hpp"

namespace gail {

/// Reward r(s,a) = theta . g(psi_s, psi_a) with theta constrained to the kappa ball.
struct KernelReward {
    Vector theta;
    double kappa = 1.0;

    /// r for every pair, flat pair index.
    Vector values(const FeatureSystem& fs) const { return fs.table * theta; }
};

struct ExactEval {
    double avg_reward = 0.0;
    Matrix q_function;  // n_states x n_actions
    double F_value = 0.0;
    Vector grad_omega;
    Vector grad_theta;
};

/// Solves (I - P_pi) Q = r - J 1 together with rho^T Q = 0 on state-action space.
/// The factorization is reused across right-hand sides.
class PoissonSolver {
public:
    explicit PoissonSolver(const PolicyChain& chain);

    /// Columns of `rewards` are independent reward vectors. Returns Q with matching columns
    /// and writes the average rewards to `gains`.
    Eigen::MatrixXd solve(const Eigen::MatrixXd& rewards, Eigen::VectorXd& gains) const;
    Vector solve(const Vector& reward, double& gain) const;

    /// max |Q - (r - J + P_pi Q)| over pairs.
    double residual(const Vector& q, const Vector& reward, double gain) const;

private:
    Matrix kernel_;
    Vector stationary_;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr_;
};

double exact_avg_reward(const PolicyChain& chain, const KernelReward& reward, const FeatureSystem& fs);

/// Fills avg_reward and q_function. Throws SingularSystem on a rank-deficient system.
ExactEval solve_poisson(const PolicyChain& chain, const KernelReward& reward, const FeatureSystem& fs);

/// Everything exact about one policy, reused across reward parameters.
class PolicyOracle {
public:
    PolicyOracle(const TabularMDP& mdp, const FeatureSystem& fs, const SoftmaxPolicy& policy);

    const SoftmaxPolicy& policy() const { return policy_; }
    const PolicyChain& chain() const { return chain_; }
    const Matrix& log_probs() const { return log_probs_; }
    const Matrix& scores() const { return scores_; }
    /// G(pi) = E_rho g.
    const Vector& feature_expectation() const { return G_; }
    /// Q for each reward feature channel, pairs x q.
    const Eigen::MatrixXd& feature_q() const { return q_features_; }
    /// Q for the pseudo-reward -log pi.
    const Vector& entropy_q() const { return q_entropy_; }
    double entropy() const { return entropy_; }
    /// d G / d omega, transposed: dim(omega) x q.
    const Eigen::MatrixXd& feature_jacobian_t() const { return jac_t_; }
    const Vector& entropy_grad() const { return entropy_grad_; }

    double avg_reward(const Vector& theta) const { return G_.dot(theta); }
    /// True-reward average for an explicit reward table (n_states x n_actions).
    double avg_reward_table(const Matrix& reward) const;

    double objective(const Vector& theta, double lambda, double mu, const Vector& demo_fe) const;
    Vector grad_omega(const Vector& theta, double lambda) const;
    Vector grad_theta(const Vector& theta, double mu, const Vector& demo_fe) const;
    /// Unconstrained inner maximizer (G(pi) - G_demo) / mu.
    Vector theta_star(double mu, const Vector& demo_fe) const;
    /// Q for reward theta . g minus lambda times Q for -log pi, flat pairs.
    Vector combined_q(const Vector& theta, double lambda) const;

private:
    SoftmaxPolicy policy_;
    PolicyChain chain_;
    Matrix log_probs_;
    Matrix scores_;
    Vector G_;
    Eigen::MatrixXd q_features_;
    Vector q_entropy_;
    double entropy_ = 0.0;
    Eigen::MatrixXd jac_t_;
    Vector entropy_grad_;
};

/// F(omega, theta). Throws BallViolation if |theta| > kappa + 1e-9.
double exact_objective(const TabularMDP& mdp, const FeatureSystem& fs, const SoftmaxPolicy& policy,
                       const KernelReward& reward, double lambda, double mu, const Vector& demo_fe);

Vector exact_grad_omega(const TabularMDP& mdp, const FeatureSystem& fs, const SoftmaxPolicy& policy,
                        const KernelReward& reward, double lambda);

/// G(pi) - demo_fe - mu theta.
Vector exact_grad_theta(const TabularMDP& mdp, const FeatureSystem& fs, const SoftmaxPolicy& policy,
                        const KernelReward& reward, double mu, const Vector& demo_fe);

struct SmoothnessConstants {
    double L_omega = 0.0;
    double S_omega = 0.0;
};

/// L_omega = 2 sqrt2 (S_pi + 2 B_omega L_rho) kappa rho_g chi / (1 - upsilon) + B_omega L_Q,
/// S_omega = 2 sqrt(2q) kappa rho_g chi B_omega / (1 - upsilon).
SmoothnessConstants lipschitz_constants(const RegularityConstants& rc, const FeatureSystem& fs, double kappa, int q);
SmoothnessConstants lipschitz_constants(const RegularityConstants& rc, double rho_g, double kappa, int q);

/// B_Q = 2 sqrt2 kappa rho_g chi / (1 - upsilon).
double q_function_bound(const RegularityConstants& rc, double rho_g, double kappa);

/// F >= -(2 sqrt2 rho_g kappa + mu/2 kappa^2 + lambda B_H).
double objective_lower_bound(double rho_g, double kappa, double mu, double lambda, double B_H);

/// |F(omega, theta*(omega))| < B_F = 12 rho_g^2 / mu + lambda B_H.
double greedy_objective_bound(double rho_g, double mu, double lambda, double B_H);

}  // namespace gail
