#include "gail/errors.hpp"
#include "gail/oracles.hpp"
#include "gail/policy.hpp"
#include "gail/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace gail {

std::pair<Vector, Vector> probe_pair(Eigen::Index dim, double radius, std::uint64_t seed, std::uint64_t index) {
    CounterRng rng(seed, index);
    std::normal_distribution<double> normal;
    auto in_ball = [&] {
        Vector v(dim);
        for (Eigen::Index i = 0; i < dim; ++i) v[i] = normal(rng);
        const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
        return Vector(v * (r / v.norm()));
    };
    Vector first = in_ball();
    Vector second;
    if (index % 2 == 0) {
        second = in_ball();
    } else {
        Vector dir(dim);
        for (Eigen::Index i = 0; i < dim; ++i) dir[i] = normal(rng);
        const double step = radius * 1e-2 * (0.05 + rng.uniform());
        second = first + dir * (step / dir.norm());
    }
    return {std::move(first), std::move(second)};
}

RegularityConstants estimate_regularity(const FeatureSystem& fs, const TabularMDP& mdp, int n_probe,
                                        std::uint64_t seed, const RegularityOptions& opt) {
    if (n_probe < 100) throw InvalidArgument("estimate_regularity: n_probe must be at least 100");
    RegularityConstants rc;
    double max_psi = 0.0;
    for (int s = 0; s < fs.n_states; ++s) max_psi = std::max(max_psi, fs.psi_state.row(s).norm());
    rc.B_omega = fs.n_actions == 1 ? 0.0 : std::numbers::sqrt2 * max_psi / opt.temperature;
    rc.B_H = std::log(static_cast<double>(fs.n_actions));

    const Eigen::Index dim = static_cast<Eigen::Index>(fs.n_actions) * fs.d_state;
    double s_pi = 0, l_rho = 0, l_q = 0, s_h = 0, chi = 0, upsilon = 0;
    bool any_mixing = false;
    auto absorb_mixing = [&](const PolicyChain& chain) {
        const MixingFit fit = fit_mixing_worst_case(chain, opt.mixing_horizon);
        chi = std::max(chi, fit.chi);
        upsilon = std::max(upsilon, fit.upsilon);
        any_mixing = true;
    };

    for (int i = 0; i < n_probe; ++i) {
        const auto [w1, w2] = probe_pair(dim, opt.radius, seed, static_cast<std::uint64_t>(i));
        const double dw = (w1 - w2).norm();
        if (dw == 0.0) continue;
        const PolicyOracle a(mdp, fs, SoftmaxPolicy(w1, fs.n_actions, fs.d_state, opt.temperature));
        const PolicyOracle b(mdp, fs, SoftmaxPolicy(w2, fs.n_actions, fs.d_state, opt.temperature));

        double score_gap = 0.0;
        for (Eigen::Index x = 0; x < a.scores().rows(); ++x)
            score_gap = std::max(score_gap, (a.scores().row(x) - b.scores().row(x)).norm());
        s_pi = std::max(s_pi, score_gap / dw);
        l_rho = std::max(l_rho, tv_distance(a.chain().stationary, b.chain().stationary) / dw);
        // sup over |theta| <= kappa of |theta . (Q_g - Q_g')(x)| is kappa |(Q_g - Q_g')(x)|.
        const Eigen::MatrixXd dq = a.feature_q() - b.feature_q();
        l_q = std::max(l_q, opt.kappa * dq.rowwise().norm().maxCoeff() / dw);
        s_h = std::max(s_h, (a.entropy_grad() - b.entropy_grad()).norm() / dw);
        absorb_mixing(a.chain());
        absorb_mixing(b.chain());
    }
    rc.S_pi = opt.safety * s_pi;
    rc.L_rho = opt.safety * l_rho;
    rc.L_Q = opt.safety * l_q;
    rc.S_H = opt.safety * s_h;
    if (any_mixing) {
        rc.chi = chi;
        rc.upsilon = std::min(upsilon, 1.0 - 1e-9);
    }
    return rc;
}

}  // namespace gail
