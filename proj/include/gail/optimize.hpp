#pragma once

// Alternating mini-batch SGD and greedy SGD for
//   min_omega max_{|theta| <= kappa} F(omega, theta),
// with step-size schedules, sub-stationarity metrics and the potential monitor.

#include "gail/features.hpp"
#include "gail/kv_text.hpp"
#include "gail/linalg.hpp"
#include "gail/mdp.hpp"
#include "gail/oracles.hpp"
#include "gail/sampling.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace gail {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Euclidean projection onto the ball of radius kappa.
Vector project_ball(const Vector& v, double kappa);

enum class DemoMode { population, sample };

struct AltSgdConfig {
    double eta_theta = 0.1;
    double eta_omega = 5.0;
    long long q_theta = 8192;
    long long q_omega = 8192;
    double kappa = 1.0;
    double mu = 0.3;
    double lambda = 0.0;
    long long max_iters = 2000;
    DemoMode mode = DemoMode::sample;
    int reward_updates = 1;
    bool strict_theory = false;
    /// Use exact gradients in place of the stochastic estimators.
    bool exact_gradients = false;
    /// Batch for theta-hat in the greedy algorithm.
    long long greedy_theta_batch = 8192;
    double temperature = 1.0;
    EstimatorOptions estimator;
    std::uint64_t seed = 0;
};

/// Smoothness constants and noise moments the schedules are built from.
struct TheoryConstants {
    double L_omega = 0.0;  // includes lambda S_H when lambda > 0
    double S_omega = 0.0;
    double mu = 0.3;
    double kappa = 1.0;
    double lambda = 0.0;
    double rho_g = 0.0;
    double B_H = 0.0;
    double M_theta = 0.0;
    double M_omega = 0.0;
    double M_G = 0.0;
};

struct StepSizeCaps {
    double eta_omega = 0.0;  // min{L/(S(8L+2)), 1/(2L)}
    double eta_theta = 0.0;  // min{1/(150 mu), (7L+1)/(150 S^2), 1/(100(2 mu + S))}
    double ratio = 0.0;      // mu / (30 L + 5)
};
StepSizeCaps theorem2_caps(double L_omega, double S_omega, double mu);

/// Empty when the step sizes satisfy the alternating-SGD conditions; otherwise one message
/// per violated inequality.
std::vector<std::string> theorem2_violations(const AltSgdConfig& cfg, const TheoryConstants& c);

/// Throws InvalidArgument naming the offending field. With strict_theory set and constants
/// supplied, also throws on theorem2_violations; without strict_theory they are returned
/// as warnings.
std::vector<std::string> validate(const AltSgdConfig& cfg, const std::optional<TheoryConstants>& constants = {});

/// Coefficients of
///   E(t) = F(omega_t, theta_t) + s [ a |omega_t - omega_{t-1}|^2 + b |theta_{t+1} - theta_t|^2
///                                    + c |theta_t - theta_{t-1}|^2 ].
struct PotentialCoefficients {
    double s = 0.0;
    double omega_diff = 0.0;  // (1 + 2 eta_omega L) / 2
    double theta_lead = 0.0;  // eta_omega / (2 eta_theta) - mu eta_omega / 4 + 3 eta_omega eta_theta mu^2 / 2
    double theta_lag = 0.0;   // mu eta_omega / 8
};
PotentialCoefficients potential_coefficients(double eta_omega, double eta_theta, double L_omega, double mu);

struct TrainerState;

struct Theorem2Schedule {
    double eta_omega = 0.0;
    double eta_theta = 0.0;
    double s = 0.0;
    double k1 = 0.0, k2 = 0.0, k3 = 0.0, k4 = 0.0, k5 = 0.0;
    double k = 0.0;
    double phi = 0.0;
    double nu = 0.0;
    /// Unrounded theory values; they can exceed every integer type.
    double q_theta = 0.0;
    double q_omega = 0.0;
    double N = 0.0;
};

/// Largest step sizes meeting the conditions with a 0.99 margin (eta_omega shrunk further
/// if the ratio condition binds), then k, phi, nu, batch sizes and N for accuracy epsilon.
/// c0 is the initialization constant, 2 E(1). Throws InfeasibleConstants.
Theorem2Schedule theorem2_schedule(const TheoryConstants& c, double epsilon, double c0);

/// 2 E(1) at the starting iterate (omega_0 = omega_1, theta_0 = theta_1), with theta_2 the
/// expected ascent step.
double initial_potential_constant(const TabularMDP& mdp, const FeatureSystem& fs, const Vector& demo_fe,
                                  const TrainerState& state, const Theorem2Schedule& sched, const TheoryConstants& c,
                                  double temperature = 1.0);

/// Step sizes only; they do not depend on epsilon or c0.
Theorem2Schedule theorem2_step_sizes(const TheoryConstants& c);

/// Config carrying the schedule; batch sizes and iterations are clamped to the caps.
AltSgdConfig schedule_config(const Theorem2Schedule& sched, const TheoryConstants& c, long long batch_cap,
                             long long iter_cap);

/// Greedy step size eps / ((L + S^2/mu) M_G) and the bound 2 sqrt(B_F (L + S^2/mu) M_G / N).
double greedy_step_size(const TheoryConstants& c, double epsilon);
double greedy_bound(const TheoryConstants& c, double B_F, double N);

/// Recent iterates needed by the potential.
struct PotentialState {
    PotentialCoefficients coef;
    std::deque<Vector> omegas;  // omega_{t-1}, omega_t
    std::deque<Vector> thetas;  // theta_{t-1}, theta_t, theta_{t+1}
    double value = kNaN;

    /// Starts with omega_0 = omega_1 and theta_0 = theta_1.
    static PotentialState start(const PotentialCoefficients& coef, const Vector& omega1, const Vector& theta1);
    /// Records theta_{t+1} (completing E(t)) or omega_{t+1} (advancing t).
    void push_theta(const Vector& theta);
    void push_omega(const Vector& omega);
};

/// E(t) from F(omega_t, theta_t). Throws InsufficientHistory without theta_{t+1}.
double potential_eval(const PotentialState& ps, double F_t);

struct TrainerState {
    Vector omega;
    Vector theta;
    long long iteration = 1;
    double J_running = std::numeric_limits<double>::infinity();
    double I_running = std::numeric_limits<double>::infinity();
    std::optional<PotentialState> potential;
};

TrainerState initial_state(const FeatureSystem& fs, const AltSgdConfig& cfg);

/// Exact quantities at iterate t. J and the potential need theta_{t+1} and are filled by
/// the step that produces it.
struct MetricsRow {
    long long iter = 0;
    double F_exact = kNaN;
    double J_running = kNaN;
    double I_running = kNaN;
    double potential = kNaN;
    double grad_omega_norm = kNaN;
    double proj_residual = kNaN;
    double theta_norm = kNaN;
    double avg_true_reward = kNaN;
};

std::string metrics_header();
std::string format_metrics_row(const MetricsRow& row);

/// |theta - Pi(theta + grad_theta F(omega, theta))|^2.
double projection_residual(const PolicyOracle& oracle, const Vector& theta, const Vector& demo_fe, double mu,
                           double kappa);

/// J term at t: projection residual at (omega_t, theta_t) plus |grad_omega F(omega_t, theta_{t+1})|^2.
double stationarity_J_term(const PolicyOracle& oracle, const Vector& theta_t, const Vector& theta_next,
                           const Vector& demo_fe, const AltSgdConfig& cfg);

/// |grad_omega F(omega, theta*(omega))|^2 with the closed-form inner maximizer.
double stationarity_I_term(const PolicyOracle& oracle, const Vector& demo_fe, const AltSgdConfig& cfg);

/// Running minima, given the previous state; both are non-increasing by construction.
double substationarity_J(const TrainerState& state, const PolicyOracle& oracle, const Vector& theta_next,
                         const Vector& demo_fe, const AltSgdConfig& cfg);
double substationarity_I(const TrainerState& state, const PolicyOracle& oracle, const Vector& demo_fe,
                         const AltSgdConfig& cfg);

/// One alternating iteration: reward_updates projected theta ascent steps at omega_t, then
/// one omega descent step at (omega_t, theta_{t+1}). `row` receives the completed metrics
/// of iterate t.
TrainerState alt_sgd_step(const TrainerState& state, const AltSgdConfig& cfg, const TabularMDP& mdp,
                          const FeatureSystem& fs, const Vector& demo_fe, MetricsRow* row = nullptr);

/// One greedy iteration with the theta-hat estimator.
TrainerState greedy_sgd_step(const TrainerState& state, const AltSgdConfig& cfg, const TabularMDP& mdp,
                             const FeatureSystem& fs, const Vector& demo_fe, MetricsRow* row = nullptr);

enum class Algorithm { alt, greedy };

struct TrainResult {
    TrainerState final_state;
    std::vector<MetricsRow> rows;  // iterates 1 .. iterations + 1
};

/// Runs `iterations` steps. Throws BallViolation or InvalidArgument (non-finite iterate)
/// naming the first bad iteration. `on_iteration` sees the state after every step.
TrainResult train(Algorithm algo, const AltSgdConfig& cfg, const TabularMDP& mdp, const FeatureSystem& fs,
                  const Vector& demo_fe, long long iterations, TrainerState state,
                  const std::function<void(const TrainerState&)>& on_iteration = {});

/// Average eval_reward under the policy with parameter omega, NaN without eval_reward.
double average_true_reward(const TabularMDP& mdp, const PolicyChain& chain);

KvDocument checkpoint_to_kv(const TrainerState& state, const FeatureSystem& fs, const AltSgdConfig& cfg);

}  // namespace gail
