#pragma once

// Estimates every regularity and noise constant, then re-measures each one on held-out
// probes and reports the bound next to the worst value seen.

#include "gail/features.hpp"
#include "gail/kv_text.hpp"
#include "gail/linalg.hpp"
#include "gail/mdp.hpp"
#include "gail/optimize.hpp"
#include "gail/oracles.hpp"
#include "gail/policy.hpp"
#include "gail/sampling.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gail {

struct AuditOptions {
    int n_probe = 200;        // pairs used to estimate the constants
    int audit_pairs = 1000;   // held-out pairs used to check them
    int noise_probes = 16;    // policies for the noise-moment estimates
    int mc_draws = 200;       // Monte Carlo draws per policy when checking the moments
    RegularityOptions regularity;
    double mu = 0.3;
    double lambda = 0.0;
    long long greedy_theta_batch = 8192;
    long long greedy_omega_batch = 8192;
    /// Inflation applied to the measured noise moments, as for the regularity constants.
    double moment_safety = 1.5;
    std::uint64_t seed = 0;
};

struct AuditRow {
    std::string name;
    double bound = 0.0;
    double observed = 0.0;
    bool ok = false;  // observed <= bound
};

struct AuditReport {
    RegularityConstants regularity;
    SmoothnessConstants smoothness;
    NoiseMoments noise;  // inflated by moment_safety
    double rho_g = 0.0;
    double B_Q = 0.0;
    double F_lower = 0.0;
    double B_F = 0.0;
    TheoryConstants theory;
    std::vector<AuditRow> rows;

    bool all_ok() const;
    const AuditRow& row(const std::string& name) const;
};

/// Constants only, without the held-out checks.
TheoryConstants estimate_theory_constants(const TabularMDP& mdp, const FeatureSystem& fs, const Vector& demo_fe,
                                          const AuditOptions& options);

AuditReport run_audit(const TabularMDP& mdp, const FeatureSystem& fs, const Vector& demo_fe,
                      const AuditOptions& options);

/// `constant,bound,observed,ok`.
std::string audit_csv(const AuditReport& report);

KvDocument constants_to_kv(const AuditReport& report);

}  // namespace gail
