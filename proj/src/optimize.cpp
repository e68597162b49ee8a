#include "gail/optimize.hpp"

#include "gail/errors.hpp"
#include "gail/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace gail {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// a / b with a / 0 = +inf for a > 0.
double ratio_or_inf(double a, double b) { return b > 0.0 ? a / b : kInf; }

Vector theta_step(const TabularMDP& mdp, const FeatureSystem& fs, const PolicyOracle& oracle, const Vector& theta,
                  const Vector& demo_fe, const AltSgdConfig& cfg, std::uint64_t seed) {
    const Vector grad = cfg.exact_gradients
                            ? oracle.grad_theta(theta, cfg.mu, demo_fe)
                            : stoch_grad_theta(mdp, fs, oracle, theta, cfg.mu, demo_fe, cfg.q_theta, seed, cfg.estimator).value;
    return project_ball(theta + cfg.eta_theta * grad, cfg.kappa);
}

Vector omega_direction(const TabularMDP& mdp, const FeatureSystem& fs, const PolicyOracle& oracle, const Vector& theta,
                       const AltSgdConfig& cfg, std::uint64_t seed) {
    if (cfg.exact_gradients) return oracle.grad_omega(theta, cfg.lambda);
    return stoch_grad_omega(mdp, fs, oracle, theta, cfg.lambda, cfg.q_omega, seed, cfg.estimator).value;
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    return format_double(v);
}

void check_finite(const Vector& v, const char* what, long long iteration) {
    if (!v.allFinite())
        throw InvalidArgument(std::string("non-finite ") + what + " at iteration " + std::to_string(iteration));
}

}  // namespace

Vector project_ball(const Vector& v, double kappa) {
    const double norm = v.norm();
    if (norm <= kappa) return v;
    return v * (kappa / norm);
}

StepSizeCaps theorem2_caps(double L, double S, double mu) {
    StepSizeCaps caps;
    caps.eta_omega = std::min(ratio_or_inf(L, S * (8.0 * L + 2.0)), ratio_or_inf(1.0, 2.0 * L));
    caps.eta_theta = std::min({ratio_or_inf(1.0, 150.0 * mu), ratio_or_inf(7.0 * L + 1.0, 150.0 * S * S),
                               ratio_or_inf(1.0, 100.0 * (2.0 * mu + S))});
    caps.ratio = mu / (30.0 * L + 5.0);
    return caps;
}

std::vector<std::string> theorem2_violations(const AltSgdConfig& cfg, const TheoryConstants& c) {
    const StepSizeCaps caps = theorem2_caps(c.L_omega, c.S_omega, cfg.mu);
    const double slack = 1.0 + 1e-12;
    std::vector<std::string> out;
    if (cfg.eta_omega > caps.eta_omega * slack)
        out.push_back("eta_omega " + format_double(cfg.eta_omega) + " exceeds " + format_double(caps.eta_omega));
    if (cfg.eta_theta > caps.eta_theta * slack)
        out.push_back("eta_theta " + format_double(cfg.eta_theta) + " exceeds " + format_double(caps.eta_theta));
    if (cfg.eta_omega > caps.ratio * cfg.eta_theta * slack)
        out.push_back("eta_omega / eta_theta exceeds mu / (30 L_omega + 5) = " + format_double(caps.ratio));
    return out;
}

std::vector<std::string> validate(const AltSgdConfig& cfg, const std::optional<TheoryConstants>& constants) {
    auto require = [](bool ok, const std::string& key, const std::string& rule) {
        if (!ok) throw InvalidArgument("config key `" + key + "` " + rule);
    };
    require(std::isfinite(cfg.eta_theta) && cfg.eta_theta >= 0.0, "eta_theta", "must be a nonnegative number");
    require(std::isfinite(cfg.eta_omega) && cfg.eta_omega >= 0.0, "eta_omega", "must be a nonnegative number");
    require(cfg.q_theta >= 1, "q_theta", "must be at least 1");
    require(cfg.q_omega >= 1, "q_omega", "must be at least 1");
    require(std::isfinite(cfg.kappa) && cfg.kappa > 0.0, "kappa", "must be positive");
    require(std::isfinite(cfg.mu) && cfg.mu >= 0.0, "mu", "must be nonnegative");
    require(std::isfinite(cfg.lambda) && cfg.lambda >= 0.0, "lambda", "must be nonnegative");
    require(cfg.max_iters >= 0, "iters", "must be nonnegative");
    require(cfg.reward_updates >= 1, "reward_updates", "must be at least 1");
    require(cfg.greedy_theta_batch >= 1, "greedy_theta_batch", "must be at least 1");
    require(std::isfinite(cfg.temperature) && cfg.temperature > 0.0, "temperature", "must be positive");
    require(cfg.estimator.burn_in >= 0, "burn_in", "must be nonnegative");
    require(cfg.estimator.rollout_horizon >= 1, "rollout_horizon", "must be at least 1");

    std::vector<std::string> warnings;
    if (!constants) return warnings;
    warnings = theorem2_violations(cfg, *constants);
    if (cfg.strict_theory && !warnings.empty()) throw InvalidArgument("strict_theory: " + warnings.front());
    if (cfg.mu > 0.0 && cfg.kappa < 2.0 * std::numbers::sqrt2 * constants->rho_g / cfg.mu)
        warnings.push_back("kappa is below 2 sqrt2 rho_g / mu; the greedy theta-hat is not projected and may leave the ball");
    return warnings;
}

PotentialCoefficients potential_coefficients(double eta_omega, double eta_theta, double L, double mu) {
    PotentialCoefficients c;
    c.s = 8.0 / (eta_omega * eta_omega * (58.0 * L + 9.0));
    c.omega_diff = (1.0 + 2.0 * eta_omega * L) / 2.0;
    c.theta_lead = eta_omega / (2.0 * eta_theta) - mu * eta_omega / 4.0 + 1.5 * eta_omega * eta_theta * mu * mu;
    c.theta_lag = mu * eta_omega / 8.0;
    return c;
}

Theorem2Schedule theorem2_step_sizes(const TheoryConstants& c) {
    if (!(c.mu > 0.0)) throw InfeasibleConstants("theorem2_schedule: mu must be positive");
    if (!(c.L_omega >= 0.0) || !(c.S_omega >= 0.0)) throw InfeasibleConstants("theorem2_schedule: negative constants");
    const StepSizeCaps caps = theorem2_caps(c.L_omega, c.S_omega, c.mu);
    Theorem2Schedule out;
    out.eta_theta = 0.99 * caps.eta_theta;
    out.eta_omega = 0.99 * std::min(caps.eta_omega, caps.ratio * out.eta_theta);
    if (!std::isfinite(out.eta_omega) || !(out.eta_omega > 0.0) || !std::isfinite(out.eta_theta) || !(out.eta_theta > 0.0))
        throw InfeasibleConstants("theorem2_schedule: step-size caps are not finite and positive");

    const double L = c.L_omega, S = c.S_omega, mu = c.mu;
    const double ew = out.eta_omega, et = out.eta_theta;
    out.s = 8.0 / (ew * ew * (58.0 * L + 9.0));
    out.k1 = 1.0 / (2.0 * ew) - out.s * (ew * (7.0 * L + 1.0) / 2.0 + 1.5 * ew * et * S * S);
    out.k2 = out.s * ew * L / 2.0 - S / 2.0;
    out.k3 = out.s * (ew * mu / 4.0 - 1.5 * ew * et * mu * mu);
    out.k4 = out.s * mu * ew / 8.0 - (1.0 / (2.0 * et) + (S + 2.0 * mu) / 2.0);
    out.k5 = out.s * mu * ew / 8.0 - (1.0 / (2.0 * et) + mu / 2.0);
    const double kmin = std::min(out.k1, out.k4);
    if (!(kmin > 0.0)) throw InfeasibleConstants("theorem2_schedule: min(k1, k4) = " + format_double(kmin) + " is not positive");
    out.k = 1.0 / kmin;
    out.phi = std::max({1.0, 1.0 / (et * et), 1.0 / (ew * ew)});
    out.nu = std::max(2.0 * std::max(ew + out.s * ew * ew + out.s * ew / (2.0 * mu), out.s * ew / 2.0),
                      3.0 * std::max(1.0 / (2.0 * mu), 1.5 * ew * et));
    return out;
}

Theorem2Schedule theorem2_schedule(const TheoryConstants& c, double epsilon, double c0) {
    if (!(epsilon > 0.0)) throw InfeasibleConstants("theorem2_schedule: epsilon must be positive");
    Theorem2Schedule out = theorem2_step_sizes(c);
    const double kphi = out.k * out.phi;
    out.q_theta = std::ceil(4.0 * kphi * out.nu * c.M_theta / epsilon);
    out.q_omega = std::ceil(4.0 * kphi * out.nu * c.M_omega / epsilon);
    const double offset = c0 + 4.0 * std::numbers::sqrt2 * c.rho_g * c.kappa + c.mu * c.kappa * c.kappa + 2.0 * c.lambda * c.B_H;
    if (!(offset > 0.0)) throw InfeasibleConstants("theorem2_schedule: iteration numerator is not positive");
    out.N = kphi * offset / epsilon;
    return out;
}

AltSgdConfig schedule_config(const Theorem2Schedule& sched, const TheoryConstants& c, long long batch_cap, long long iter_cap) {
    auto clamp_count = [](double v, long long cap) {
        if (!(v < static_cast<double>(cap))) return cap;
        return std::max(1LL, static_cast<long long>(v));
    };
    AltSgdConfig cfg;
    cfg.eta_omega = sched.eta_omega;
    cfg.eta_theta = sched.eta_theta;
    cfg.q_theta = clamp_count(sched.q_theta, batch_cap);
    cfg.q_omega = clamp_count(sched.q_omega, batch_cap);
    cfg.max_iters = clamp_count(std::ceil(sched.N), iter_cap);
    cfg.kappa = c.kappa;
    cfg.mu = c.mu;
    cfg.lambda = c.lambda;
    cfg.strict_theory = true;
    return cfg;
}

double greedy_step_size(const TheoryConstants& c, double epsilon) {
    const double denom = (c.L_omega + c.S_omega * c.S_omega / c.mu) * c.M_G;
    if (!(denom > 0.0) || !(epsilon > 0.0)) throw InfeasibleConstants("greedy step size: nonpositive denominator");
    return epsilon / denom;
}

double greedy_bound(const TheoryConstants& c, double B_F, double N) {
    return 2.0 * std::sqrt(B_F * (c.L_omega + c.S_omega * c.S_omega / c.mu) * c.M_G / N);
}

PotentialState PotentialState::start(const PotentialCoefficients& coef, const Vector& omega1, const Vector& theta1) {
    PotentialState ps;
    ps.coef = coef;
    ps.omegas = {omega1, omega1};
    ps.thetas = {theta1, theta1};
    return ps;
}

void PotentialState::push_theta(const Vector& theta) {
    thetas.push_back(theta);
    while (thetas.size() > 3) thetas.pop_front();
}

void PotentialState::push_omega(const Vector& omega) {
    omegas.push_back(omega);
    while (omegas.size() > 2) omegas.pop_front();
    while (thetas.size() > 2) thetas.pop_front();
}

double potential_eval(const PotentialState& ps, double F_t) {
    if (ps.omegas.size() < 2 || ps.thetas.size() < 3)
        throw InsufficientHistory("potential needs omega_{t-1}, omega_t and theta_{t-1}, theta_t, theta_{t+1}");
    const double dw = (ps.omegas[1] - ps.omegas[0]).squaredNorm();
    const double lead = (ps.thetas[2] - ps.thetas[1]).squaredNorm();
    const double lag = (ps.thetas[1] - ps.thetas[0]).squaredNorm();
    return F_t + ps.coef.s * (ps.coef.omega_diff * dw + ps.coef.theta_lead * lead + ps.coef.theta_lag * lag);
}

TrainerState initial_state(const FeatureSystem& fs, const AltSgdConfig&) {
    TrainerState st;
    st.omega = Vector::Zero(static_cast<Eigen::Index>(fs.n_actions) * fs.d_state);
    st.theta = Vector::Zero(fs.q);
    return st;
}

std::string metrics_header() {
    return "iter,F_exact,J_running,I_running,potential,grad_omega_norm,proj_residual,theta_norm,avg_true_reward";
}

std::string format_metrics_row(const MetricsRow& r) {
    std::ostringstream out;
    out << r.iter << ',' << fmt(r.F_exact) << ',' << fmt(r.J_running) << ',' << fmt(r.I_running) << ','
        << fmt(r.potential) << ',' << fmt(r.grad_omega_norm) << ',' << fmt(r.proj_residual) << ','
        << fmt(r.theta_norm) << ',' << fmt(r.avg_true_reward);
    return out.str();
}

double projection_residual(const PolicyOracle& oracle, const Vector& theta, const Vector& demo_fe, double mu, double kappa) {
    return (theta - project_ball(theta + oracle.grad_theta(theta, mu, demo_fe), kappa)).squaredNorm();
}

double stationarity_J_term(const PolicyOracle& oracle, const Vector& theta_t, const Vector& theta_next,
                           const Vector& demo_fe, const AltSgdConfig& cfg) {
    return projection_residual(oracle, theta_t, demo_fe, cfg.mu, cfg.kappa) +
           oracle.grad_omega(theta_next, cfg.lambda).squaredNorm();
}

double stationarity_I_term(const PolicyOracle& oracle, const Vector& demo_fe, const AltSgdConfig& cfg) {
    return oracle.grad_omega(oracle.theta_star(cfg.mu, demo_fe), cfg.lambda).squaredNorm();
}

double substationarity_J(const TrainerState& state, const PolicyOracle& oracle, const Vector& theta_next,
                         const Vector& demo_fe, const AltSgdConfig& cfg) {
    return std::min(state.J_running, stationarity_J_term(oracle, state.theta, theta_next, demo_fe, cfg));
}

double substationarity_I(const TrainerState& state, const PolicyOracle& oracle, const Vector& demo_fe,
                         const AltSgdConfig& cfg) {
    return std::min(state.I_running, stationarity_I_term(oracle, demo_fe, cfg));
}

double average_true_reward(const TabularMDP& mdp, const PolicyChain& chain) {
    if (!mdp.eval_reward) return kNaN;
    return chain.stationary.dot(Eigen::Map<const Vector>(mdp.eval_reward->data(), mdp.eval_reward->size()));
}

TrainerState alt_sgd_step(const TrainerState& state, const AltSgdConfig& cfg, const TabularMDP& mdp,
                          const FeatureSystem& fs, const Vector& demo_fe, MetricsRow* row) {
    const PolicyOracle oracle(mdp, fs, SoftmaxPolicy(state.omega, fs.n_actions, fs.d_state, cfg.temperature));
    const auto t = static_cast<std::uint64_t>(state.iteration);
    const std::uint64_t theta_key = derive_seed(cfg.seed, "theta");
    const std::uint64_t omega_key = derive_seed(cfg.seed, "omega");

    Vector theta = state.theta;
    for (int j = 0; j < cfg.reward_updates; ++j)
        theta = theta_step(mdp, fs, oracle, theta, demo_fe, cfg, derive_seed(theta_key, t * 1024 + static_cast<std::uint64_t>(j)));
    if (theta.norm() > cfg.kappa * (1.0 + 1e-12))
        throw BallViolation("theta left the kappa ball at iteration " + std::to_string(state.iteration));

    TrainerState next = state;
    next.theta = theta;
    next.omega = state.omega - cfg.eta_omega * omega_direction(mdp, fs, oracle, theta, cfg, derive_seed(omega_key, t));
    next.iteration = state.iteration + 1;
    next.J_running = substationarity_J(state, oracle, theta, demo_fe, cfg);
    next.I_running = substationarity_I(state, oracle, demo_fe, cfg);

    const double F_t = oracle.objective(state.theta, cfg.lambda, cfg.mu, demo_fe);
    double potential = kNaN;
    if (next.potential) {
        next.potential->push_theta(theta);
        potential = potential_eval(*next.potential, F_t);
        next.potential->value = potential;
        next.potential->push_omega(next.omega);
    }
    if (row) {
        row->iter = state.iteration;
        row->F_exact = F_t;
        row->J_running = next.J_running;
        row->I_running = next.I_running;
        row->potential = potential;
        row->grad_omega_norm = oracle.grad_omega(theta, cfg.lambda).norm();
        row->proj_residual = projection_residual(oracle, state.theta, demo_fe, cfg.mu, cfg.kappa);
        row->theta_norm = state.theta.norm();
        row->avg_true_reward = average_true_reward(mdp, oracle.chain());
    }
    return next;
}

TrainerState greedy_sgd_step(const TrainerState& state, const AltSgdConfig& cfg, const TabularMDP& mdp,
                             const FeatureSystem& fs, const Vector& demo_fe, MetricsRow* row) {
    if (!(cfg.mu > 0.0)) throw InvalidArgument("config key `mu` must be positive for the greedy algorithm");
    const PolicyOracle oracle(mdp, fs, SoftmaxPolicy(state.omega, fs.n_actions, fs.d_state, cfg.temperature));
    const auto t = static_cast<std::uint64_t>(state.iteration);
    const Vector theta_hat =
        cfg.exact_gradients
            ? oracle.theta_star(cfg.mu, demo_fe)
            : theta_star_estimator(mdp, fs, oracle, demo_fe, cfg.mu, cfg.greedy_theta_batch,
                                   derive_seed(derive_seed(cfg.seed, "theta_hat"), t), cfg.estimator)
                  .value;

    TrainerState next = state;
    next.theta = theta_hat;
    next.omega = state.omega - cfg.eta_omega * omega_direction(mdp, fs, oracle, theta_hat, cfg,
                                                               derive_seed(derive_seed(cfg.seed, "omega"), t));
    next.iteration = state.iteration + 1;
    next.I_running = substationarity_I(state, oracle, demo_fe, cfg);
    if (row) {
        const Vector theta_star = oracle.theta_star(cfg.mu, demo_fe);
        row->iter = state.iteration;
        row->F_exact = oracle.objective(theta_star, cfg.lambda, cfg.mu, demo_fe);
        row->I_running = next.I_running;
        row->grad_omega_norm = oracle.grad_omega(theta_star, cfg.lambda).norm();
        row->theta_norm = theta_hat.norm();
        row->avg_true_reward = average_true_reward(mdp, oracle.chain());
    }
    return next;
}

TrainResult train(Algorithm algo, const AltSgdConfig& cfg, const TabularMDP& mdp, const FeatureSystem& fs,
                  const Vector& demo_fe, long long iterations, TrainerState state,
                  const std::function<void(const TrainerState&)>& on_iteration) {
    TrainResult out;
    out.rows.reserve(static_cast<std::size_t>(iterations + 1));
    for (long long i = 0; i < iterations; ++i) {
        MetricsRow row;
        state = algo == Algorithm::alt ? alt_sgd_step(state, cfg, mdp, fs, demo_fe, &row)
                                       : greedy_sgd_step(state, cfg, mdp, fs, demo_fe, &row);
        check_finite(state.omega, "omega", row.iter);
        check_finite(state.theta, "theta", row.iter);
        out.rows.push_back(row);
        if (on_iteration) on_iteration(state);
    }

    // Final iterate: only quantities that do not need a further step.
    const PolicyOracle oracle(mdp, fs, SoftmaxPolicy(state.omega, fs.n_actions, fs.d_state, cfg.temperature));
    MetricsRow last;
    last.iter = state.iteration;
    const Vector theta = algo == Algorithm::alt ? state.theta : oracle.theta_star(cfg.mu, demo_fe);
    last.F_exact = oracle.objective(theta, cfg.lambda, cfg.mu, demo_fe);
    if (algo == Algorithm::alt) {
        if (std::isfinite(state.J_running)) last.J_running = state.J_running;
        last.proj_residual = projection_residual(oracle, state.theta, demo_fe, cfg.mu, cfg.kappa);
        last.theta_norm = state.theta.norm();
    } else if (iterations > 0) {
        last.theta_norm = state.theta.norm();
    }
    state.I_running = substationarity_I(state, oracle, demo_fe, cfg);
    last.I_running = state.I_running;
    last.grad_omega_norm = oracle.grad_omega(theta, cfg.lambda).norm();
    last.avg_true_reward = average_true_reward(mdp, oracle.chain());
    out.rows.push_back(last);
    out.final_state = std::move(state);
    return out;
}

KvDocument checkpoint_to_kv(const TrainerState& state, const FeatureSystem& fs, const AltSgdConfig& cfg) {
    KvDocument doc;
    doc.set("iteration", state.iteration);
    doc.set("n_actions", static_cast<long long>(fs.n_actions));
    doc.set("d_state", static_cast<long long>(fs.d_state));
    doc.set("temperature", cfg.temperature);
    doc.set("omega", state.omega);
    doc.set("theta", state.theta);
    doc.set("feature_fingerprint", std::to_string(fs.fingerprint()));
    return doc;
}

}  // namespace gail

namespace gail {

double initial_potential_constant(const TabularMDP& mdp, const FeatureSystem& fs, const Vector& demo_fe,
                                  const TrainerState& state, const Theorem2Schedule& sched, const TheoryConstants& c,
                                  double temperature) {
    const PolicyOracle oracle(mdp, fs, SoftmaxPolicy(state.omega, fs.n_actions, fs.d_state, temperature));
    const PotentialCoefficients coef = potential_coefficients(sched.eta_omega, sched.eta_theta, c.L_omega, c.mu);
    const Vector next =
        project_ball(state.theta + sched.eta_theta * oracle.grad_theta(state.theta, c.mu, demo_fe), c.kappa);
    const double e1 = oracle.objective(state.theta, c.lambda, c.mu, demo_fe) +
                      coef.s * coef.theta_lead * (next - state.theta).squaredNorm();
    return 2.0 * e1;
}

}  // namespace gail
