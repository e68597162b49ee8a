#include "gail/audit.hpp"

#include "gail/errors.hpp"
#include "gail/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace gail {
namespace {

constexpr double kCurveFloor = 1e-10;
constexpr double kEnvelopeSlack = 1.05;

// max over point-mass starts of TV(P^t(x, .), rho), t = 0..horizon.
std::vector<double> worst_case_curve(const PolicyChain& chain, int horizon) {
    const Eigen::Index n = chain.n_pairs();
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd kernel = chain.kernel;
    std::vector<double> curve;
    curve.reserve(static_cast<std::size_t>(horizon) + 1);
    for (int t = 0; t <= horizon; ++t) {
        double worst = 0.0;
        for (Eigen::Index x = 0; x < n; ++x)
            worst = std::max(worst, 0.5 * (power.row(x).transpose() - chain.stationary).lpNorm<1>());
        curve.push_back(worst);
        power = power * kernel;
    }
    return curve;
}

Vector sphere_point(Eigen::Index dim, double radius, CounterRng& rng) {
    std::normal_distribution<double> normal;
    Vector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = normal(rng);
    return v * (radius / v.norm());
}

NoiseMomentOptions moment_options(const AuditOptions& opt) {
    NoiseMomentOptions m;
    m.kappa = opt.regularity.kappa;
    m.lambda = opt.lambda;
    m.mu = opt.mu;
    m.greedy_theta_batch = opt.greedy_theta_batch;
    m.greedy_omega_batch = opt.greedy_omega_batch;
    return m;
}

void check_options(const AuditOptions& opt) {
    if (opt.n_probe < 100) throw InvalidArgument("config key `n_probe` must be at least 100");
    if (opt.audit_pairs < 1) throw InvalidArgument("config key `audit_pairs` must be positive");
    if (opt.noise_probes < 1) throw InvalidArgument("config key `noise_probes` must be positive");
    if (opt.mc_draws < 2) throw InvalidArgument("config key `mc_draws` must be at least 2");
    if (!(opt.mu > 0.0)) throw InvalidArgument("config key `mu` must be positive");
    if (!(opt.lambda >= 0.0)) throw InvalidArgument("config key `lambda` must be nonnegative");
    if (!(opt.regularity.kappa > 0.0)) throw InvalidArgument("config key `kappa` must be positive");
    if (!(opt.moment_safety >= 1.0)) throw InvalidArgument("moment safety factor must be at least 1");
}

struct Estimates {
    RegularityConstants rc;
    SmoothnessConstants sc;
    NoiseMoments noise;
    TheoryConstants theory;
};

Estimates estimate(const TabularMDP& mdp, const FeatureSystem& fs, const Vector& demo_fe, const AuditOptions& opt) {
    check_options(opt);
    Estimates e;
    e.rc = estimate_regularity(fs, mdp, opt.n_probe, derive_seed(opt.seed, "regularity"), opt.regularity);
    e.sc = lipschitz_constants(e.rc, fs, opt.regularity.kappa, fs.q);
    e.noise = measure_noise_moments(mdp, fs, demo_fe, opt.noise_probes, opt.regularity.radius,
                                    derive_seed(opt.seed, "noise"), moment_options(opt));
    e.noise.M_theta *= opt.moment_safety;
    e.noise.M_omega *= opt.moment_safety;
    e.noise.M_G *= opt.moment_safety;

    TheoryConstants& c = e.theory;
    c.L_omega = e.sc.L_omega + opt.lambda * e.rc.S_H;
    c.S_omega = e.sc.S_omega;
    c.mu = opt.mu;
    c.kappa = opt.regularity.kappa;
    c.lambda = opt.lambda;
    c.rho_g = fs.rho_g;
    c.B_H = e.rc.B_H;
    c.M_theta = e.noise.M_theta;
    c.M_omega = e.noise.M_omega;
    c.M_G = e.noise.M_G;
    return e;
}

}  // namespace

bool AuditReport::all_ok() const {
    return std::all_of(rows.begin(), rows.end(), [](const AuditRow& r) { return r.ok; });
}

const AuditRow& AuditReport::row(const std::string& name) const {
    for (const AuditRow& r : rows)
        if (r.name == name) return r;
    throw InvalidArgument("audit report has no row `" + name + "`");
}

TheoryConstants estimate_theory_constants(const TabularMDP& mdp, const FeatureSystem& fs, const Vector& demo_fe,
                                          const AuditOptions& opt) {
    return estimate(mdp, fs, demo_fe, opt).theory;
}

AuditReport run_audit(const TabularMDP& mdp, const FeatureSystem& fs, const Vector& demo_fe, const AuditOptions& opt) {
    const Estimates e = estimate(mdp, fs, demo_fe, opt);
    AuditReport rep;
    rep.regularity = e.rc;
    rep.smoothness = e.sc;
    rep.noise = e.noise;
    rep.theory = e.theory;
    rep.rho_g = fs.rho_g;
    const double kappa = opt.regularity.kappa;
    const double lambda = opt.lambda;
    const double mu = opt.mu;
    rep.B_Q = q_function_bound(e.rc, fs.rho_g, kappa);
    rep.F_lower = objective_lower_bound(fs.rho_g, kappa, mu, lambda, e.rc.B_H);
    rep.B_F = greedy_objective_bound(fs.rho_g, mu, lambda, e.rc.B_H);

    const Eigen::Index dim = static_cast<Eigen::Index>(fs.n_actions) * fs.d_state;
    const double temp = opt.regularity.temperature;
    const std::uint64_t pair_seed = derive_seed(opt.seed, "audit-pairs");

    double b_omega = 0, s_pi = 0, l_rho = 0, l_q = 0, s_h = 0, l_omega = 0, s_omega = 0, affinity = 0;
    double b_q = 0, b_h = 0, f_low = 0, b_f = 0, chi_needed = 0, upsilon_seen = 0;

    auto per_policy = [&](const PolicyOracle& o) {
        b_omega = std::max(b_omega, o.scores().rowwise().norm().maxCoeff());
        b_q = std::max(b_q, kappa * o.feature_q().rowwise().norm().maxCoeff());
        b_h = std::max(b_h, o.entropy());
        const Vector d = o.feature_expectation() - demo_fe;
        // min over the ball of theta . d - lambda H - mu/2 |theta|^2 sits at theta = -kappa d/|d|.
        f_low = std::max(f_low, kappa * d.norm() + 0.5 * mu * kappa * kappa + lambda * o.entropy());
        b_f = std::max(b_f, std::abs(o.objective(o.theta_star(mu, demo_fe), lambda, mu, demo_fe)));

        // Each half of the envelope d_t <= slack chi upsilon^t is checked with the other held fixed:
        // the smallest chi that works at the fitted upsilon, and the smallest upsilon at the fitted chi.
        const std::vector<double> curve = worst_case_curve(o.chain(), opt.regularity.mixing_horizon);
        for (std::size_t t = 0; t < curve.size(); ++t) {
            if (curve[t] <= kCurveFloor) continue;
            const double td = static_cast<double>(t);
            chi_needed = std::max(chi_needed, curve[t] / (kEnvelopeSlack * std::pow(e.rc.upsilon, td)));
            if (t > 0) upsilon_seen = std::max(upsilon_seen, std::pow(curve[t] / (kEnvelopeSlack * e.rc.chi), 1.0 / td));
        }
    };

    for (int i = 0; i < opt.audit_pairs; ++i) {
        const auto [w1, w2] = probe_pair(dim, opt.regularity.radius, pair_seed, static_cast<std::uint64_t>(i));
        const double dw = (w1 - w2).norm();
        if (dw == 0.0) continue;
        const PolicyOracle a(mdp, fs, SoftmaxPolicy(w1, fs.n_actions, fs.d_state, temp));
        const PolicyOracle b(mdp, fs, SoftmaxPolicy(w2, fs.n_actions, fs.d_state, temp));
        per_policy(a);
        per_policy(b);

        s_pi = std::max(s_pi, (a.scores() - b.scores()).rowwise().norm().maxCoeff() / dw);
        l_rho = std::max(l_rho, tv_distance(a.chain().stationary, b.chain().stationary) / dw);
        l_q = std::max(l_q, kappa * (a.feature_q() - b.feature_q()).rowwise().norm().maxCoeff() / dw);
        const Vector dh = a.entropy_grad() - b.entropy_grad();
        s_h = std::max(s_h, dh.norm() / dw);

        // sup over the ball of |dJ theta - lambda dh| is at most kappa |dJ|_2 + lambda |dh|.
        const Eigen::MatrixXd dj = a.feature_jacobian_t() - b.feature_jacobian_t();
        const double dj_norm = Eigen::JacobiSVD<Eigen::MatrixXd>(dj).singularValues()(0);
        l_omega = std::max(l_omega, (kappa * dj_norm + lambda * dh.norm()) / dw);
        s_omega = std::max(s_omega, (a.feature_expectation() - b.feature_expectation()).norm() / dw);

        CounterRng rng(derive_seed(pair_seed, "theta"), static_cast<std::uint64_t>(i));
        const Vector t1 = sphere_point(fs.q, kappa * rng.uniform(), rng);
        const Vector t2 = sphere_point(fs.q, kappa * rng.uniform(), rng);
        const Vector slope_gap = a.grad_theta(t1, mu, demo_fe) - a.grad_theta(t2, mu, demo_fe) + mu * (t1 - t2);
        if ((t1 - t2).norm() > 0.0) affinity = std::max(affinity, slope_gap.norm() / (t1 - t2).norm());
    }

    // Noise moments on fresh policies, by plain Monte Carlo over the estimators themselves.
    double m_theta = 0, m_omega = 0, m_g = 0;
    const std::uint64_t noise_seed = derive_seed(opt.seed, "audit-noise");
    const double n_draws = static_cast<double>(opt.mc_draws);
    for (int i = 0; i < opt.noise_probes; ++i) {
        const Vector w = probe_pair(dim, opt.regularity.radius, noise_seed, static_cast<std::uint64_t>(i)).first;
        const PolicyOracle o(mdp, fs, SoftmaxPolicy(w, fs.n_actions, fs.d_state, temp));
        CounterRng rng(noise_seed, static_cast<std::uint64_t>(i) + 0x10000);
        const Vector theta = sphere_point(fs.q, kappa, rng);
        const Vector zero = Vector::Zero(fs.q);
        const Vector exact_theta = o.grad_theta(zero, mu, demo_fe);
        const Vector exact_omega = o.grad_omega(theta, lambda);
        double st = 0, so = 0, sg = 0;
        for (int r = 0; r < opt.mc_draws; ++r) {
            const std::uint64_t s = derive_seed(derive_seed(noise_seed, static_cast<std::uint64_t>(i)), static_cast<std::uint64_t>(r));
            st += (stoch_grad_theta(mdp, fs, o, zero, mu, demo_fe, 1, derive_seed(s, "theta")).value - exact_theta).squaredNorm();
            so += (stoch_grad_omega(mdp, fs, o, theta, lambda, 1, derive_seed(s, "omega")).value - exact_omega).squaredNorm();
            const Vector th = theta_star_estimator(mdp, fs, o, demo_fe, mu, opt.greedy_theta_batch, derive_seed(s, "hat")).value;
            sg += stoch_grad_omega(mdp, fs, o, th, lambda, opt.greedy_omega_batch, derive_seed(s, "greedy")).value.squaredNorm();
        }
        m_theta = std::max(m_theta, st / n_draws);
        m_omega = std::max(m_omega, so / n_draws);
        m_g = std::max(m_g, sg / n_draws);
    }

    auto add = [&](const std::string& name, double bound, double observed) {
        rep.rows.push_back(AuditRow{name, bound, observed, observed <= bound});
    };
    add("B_omega", e.rc.B_omega, b_omega);
    add("S_pi", e.rc.S_pi, s_pi);
    add("L_rho", e.rc.L_rho, l_rho);
    add("L_Q", e.rc.L_Q, l_q);
    add("B_H", e.rc.B_H, b_h);
    add("S_H", e.rc.S_H, s_h);
    add("chi", e.rc.chi, chi_needed);
    add("upsilon", e.rc.upsilon, upsilon_seen);
    add("L_omega", e.theory.L_omega, l_omega);
    add("S_omega", e.sc.S_omega, s_omega);
    add("theta_affinity", 1e-12, affinity);
    add("B_Q", rep.B_Q, b_q);
    add("F_lower", -rep.F_lower, f_low);
    add("B_F", rep.B_F, b_f);
    add("M_theta", e.noise.M_theta, m_theta);
    add("M_omega", e.noise.M_omega, m_omega);
    add("M_G", e.noise.M_G, m_g);
    return rep;
}

std::string audit_csv(const AuditReport& rep) {
    std::ostringstream out;
    out << "constant,bound,observed,ok\n";
    for (const AuditRow& r : rep.rows)
        out << r.name << ',' << format_double(r.bound) << ',' << format_double(r.observed) << ','
            << (r.ok ? "true" : "false") << '\n';
    return out.str();
}

KvDocument constants_to_kv(const AuditReport& rep) {
    KvDocument doc;
    const RegularityConstants& rc = rep.regularity;
    doc.set("B_omega", rc.B_omega);
    doc.set("S_pi", rc.S_pi);
    doc.set("L_rho", rc.L_rho);
    doc.set("L_Q", rc.L_Q);
    doc.set("B_H", rc.B_H);
    doc.set("S_H", rc.S_H);
    doc.set("chi", rc.chi);
    doc.set("upsilon", rc.upsilon);
    doc.set("rho_g", rep.rho_g);
    doc.set("L_omega", rep.theory.L_omega);
    doc.set("S_omega", rep.theory.S_omega);
    doc.set("B_Q", rep.B_Q);
    doc.set("F_lower", rep.F_lower);
    doc.set("B_F", rep.B_F);
    doc.set("M_theta", rep.noise.M_theta);
    doc.set("M_omega", rep.noise.M_omega);
    doc.set("M_G", rep.noise.M_G);
    doc.set("mu", rep.theory.mu);
    doc.set("kappa", rep.theory.kappa);
    doc.set("lambda", rep.theory.lambda);
    return doc;
}

}  // namespace gail
