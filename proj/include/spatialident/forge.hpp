#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <variant>

#include "spatialident/models.hpp"

namespace spatialident {

using ModelSpec =
    std::variant<CarSPParams, LerouxParams, LmcParams, BivariateParams, ParsMaternParams>;

inline double spec_beta(const ModelSpec& s) {
    return std::visit([](const auto& p) { return p.beta; }, s);
}

/// A pair of parameterizations claimed to induce the same observable law.
/// `max_moment_discrepancy` is the largest entrywise absolute difference
/// across the Var(Z), Cov(Y,Z), Var(Y) blocks; `valid` records that the
/// alternative stayed inside the positive-definite region and matched.
/// A certificate of non-identifiability additionally needs a visible beta
/// gap.
struct EquivalenceCertificate {
    ModelSpec original;
    ModelSpec alternative;
    std::string construction;
    double beta_gap = 0.0;
    double max_moment_discrepancy = 0.0;
    bool valid = false;

    bool certifies() const { return valid && beta_gap > 1e-6; }
};

inline double abs_moment_discrepancy(const ObservedMoments& a, const ObservedMoments& b) {
    return std::max({(a.var_z - b.var_z).cwiseAbs().maxCoeff(),
                     (a.cov_yz - b.cov_yz).cwiseAbs().maxCoeff(),
                     (a.var_y - b.var_y).cwiseAbs().maxCoeff()});
}

/// Default visible-gap target for the constructions' free parameters.
inline double default_gap_target(double beta) { return 0.5 * std::fabs(beta) + 0.1; }

namespace detail {

inline EquivalenceCertificate finish(EquivalenceCertificate cert, const ObservedMoments& orig,
                                     const ObservedMoments& alt) {
    cert.beta_gap = std::fabs(spec_beta(cert.alternative) - spec_beta(cert.original));
    cert.max_moment_discrepancy = abs_moment_discrepancy(orig, alt);
    cert.valid = cert.max_moment_discrepancy <= 1e-8;
    return cert;
}

} // namespace detail

/// Alternative CAR parameterization available whenever phi_u = 0: scale the
/// treatment precision by delta > 1 - rho^2 and compensate through rho and
/// the intercept. With no delta given, one is derived from the visible-gap
/// target.
inline EquivalenceCertificate car_phi0_alternative(const CarSPParams& p,
                                                   const ProximityMatrix& w,
                                                   std::optional<double> delta = std::nullopt,
                                                   int zeta = 0) {
    p.validate();
    if (std::fabs(p.phi_u) > 1e-10)
        throw CaseNotApplicableError("construction requires phi_u = 0");
    const double rho2 = p.rho * p.rho;
    if (zeta == 0) zeta = (p.rho >= 0.0) ? -1 : 1;
    if (zeta != 1 && zeta != -1) throw DomainError("zeta must be +1 or -1");
    if (!delta) {
        const double s = default_gap_target(p.beta) * std::sqrt(p.tau_u / p.tau_z);
        delta = 1.0 - rho2 + s * s;
    }
    if (!(*delta > 1.0 - rho2))
        throw InvalidRegionError("delta must exceed 1 - rho^2");

    CarSPParams alt = p;
    alt.tau_z = *delta * p.tau_z;
    alt.phi_z = p.phi_z / *delta;
    alt.rho = zeta * std::sqrt((*delta - (1.0 - rho2)) / *delta);
    alt.beta = p.beta + (p.rho - std::sqrt(*delta) * alt.rho) * std::sqrt(p.tau_z / p.tau_u);
    if (!(std::fabs(alt.phi_z) < 1.0))
        throw InvalidRegionError("delta pushes phi_z outside (-1, 1)");

    const DegreeMatrix d = degree_matrix(w);
    EquivalenceCertificate cert{p, alt, "car_phi0_alternative"};
    ObservedMoments mo = car_observed_moments(p, w, d);
    ObservedMoments ma;
    try {
        ma = car_observed_moments(alt, w, d);
    } catch (const NotPositiveDefiniteError&) {
        throw InvalidRegionError("alternative CAR parameters are not positive definite");
    }
    return detail::finish(std::move(cert), mo, ma);
}

namespace detail {

inline CarSPParams car_fullyconnected_map(const CarSPParams& p, double b, int n) {
    const double pu = p.phi_u;
    const double num = 1.0 / (1.0 + pu / (n - 1)) - 1.0 / (1.0 - pu);
    const double den = 1.0 / (1.0 + b * pu / (n - 1)) - 1.0 / (1.0 - b * pu);
    if (den == 0.0) throw InvalidRegionError("r(b) is singular at this b");
    const double r = num / den;
    if (!(r > 0.0)) throw InvalidRegionError("r(b) must stay positive");
    const double r2 = p.rho * p.rho;
    const double b1 = p.tau_z + p.tau_z * p.phi_z / (n - 1) -
                      r2 * p.tau_z / (1.0 + pu / (n - 1)) +
                      r * r2 * p.tau_z / (1.0 + b * pu / (n - 1));
    const double b2 = p.tau_z - p.tau_z * p.phi_z - r2 * p.tau_z / (1.0 - pu) +
                      r * r2 * p.tau_z / (1.0 - b * pu);
    CarSPParams alt = p;
    alt.phi_u = b * pu;
    alt.tau_u = p.tau_u / r;
    alt.sigma2_eps =
        p.sigma2_eps +
        (1.0 / (n - 1)) * (1.0 / p.tau_u) * (1.0 / (1.0 - pu) - r / (1.0 - b * pu));
    alt.beta = p.beta + p.rho * std::sqrt(p.tau_z / p.tau_u) *
                            (1.0 / (1.0 - pu) - r / (1.0 - b * pu));
    alt.phi_z = (b1 - b2) / (b2 / (n - 1) + b1);
    alt.tau_z = ((n - 1) * b1 + b2) / n;
    alt.rho = p.rho * std::sqrt(r * p.tau_z / alt.tau_z);
    if (!(std::fabs(alt.phi_u) < 1.0 && std::fabs(alt.phi_z) < 1.0))
        throw InvalidRegionError("b pushes an autocorrelation parameter outside (-1, 1)");
    if (!(alt.tau_u > 0.0 && alt.tau_z > 0.0 && alt.sigma2_eps > 0.0))
        throw InvalidRegionError("b pushes a scale parameter outside its domain");
    if (!(std::fabs(alt.rho) < 1.0))
        throw InvalidRegionError("b pushes the cross correlation outside (-1, 1)");
    return alt;
}

} // namespace detail

/// One-parameter equivalent CAR family on a fully connected binary graph
/// with phi_u != 0 and rho != 0. If b is omitted, it is searched near 1 for
/// the visible-gap target; b = 1 reproduces the original exactly.
inline EquivalenceCertificate car_fullyconnected_alternative(
    const CarSPParams& p, const ProximityMatrix& w,
    std::optional<double> b = std::nullopt) {
    p.validate();
    const int n = w.size();
    bool fully = is_binary(w) && n >= 3;
    if (fully)
        for (int i = 0; i < n && fully; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j && w.w(i, j) != 1.0) {
                    fully = false;
                    break;
                }
    if (!fully) throw CaseNotApplicableError("construction requires a fully connected binary graph");
    if (std::fabs(p.phi_u) <= 1e-10 || std::fabs(p.rho) <= 1e-10)
        throw CaseNotApplicableError("construction requires phi_u != 0 and rho != 0");

    const DegreeMatrix d = degree_matrix(w);
    const ObservedMoments mo = car_observed_moments(p, w, d);
    const auto attempt = [&](double bv) {
        const CarSPParams alt = detail::car_fullyconnected_map(p, bv, n);
        EquivalenceCertificate cert{p, alt, "car_fullyconnected_alternative"};
        return detail::finish(std::move(cert), mo, car_observed_moments(alt, w, d));
    };
    if (b) return attempt(*b);

    const double target = default_gap_target(p.beta);
    std::optional<EquivalenceCertificate> best;
    for (int k = 1; k <= 400; ++k)
        for (const double sign : {1.0, -1.0}) {
            const double bv = 1.0 + sign * 0.005 * k;
            if (std::fabs(bv * p.phi_u) >= 1.0 || bv == 0.0) continue;
            try {
                EquivalenceCertificate c = attempt(bv);
                if (!c.valid) continue;
                if (!best || c.beta_gap > best->beta_gap) best = std::move(c);
                if (best->beta_gap >= target) return *best;
            } catch (const InvalidRegionError&) {
            } catch (const NotPositiveDefiniteError&) {
            }
        }
    if (!best) throw InvalidRegionError("no admissible b found near 1");
    return *best;
}

/// Sign-flip alternative for the flexible-cross Leroux model when
/// lambda_uz = lambda_z and rho != 0: negate rho and shift the intercept by
/// 2 rho sigma_u / sigma_z.
inline EquivalenceCertificate leroux_flex_equal_lambda_alternative(const LerouxParams& p,
                                                                  const ProximityMatrix& w) {
    p.validate();
    if (p.cross != LerouxCross::NonParsimonious)
        throw CaseNotApplicableError("construction requires the flexible cross structure");
    if (std::fabs(p.rho) <= 1e-10) throw CaseNotApplicableError("construction requires rho != 0");
    if (std::fabs(p.lambda_uz - p.lambda_z) > 1e-12)
        throw CaseNotApplicableError("construction requires lambda_uz = lambda_z");
    LerouxParams alt = p;
    alt.rho = -p.rho;
    alt.beta = p.beta + 2.0 * p.rho * std::sqrt(p.sigma2_u / p.sigma2_z);
    const DegreeMatrix d = degree_matrix(w);
    EquivalenceCertificate cert{p, alt, "leroux_flex_equal_lambda_alternative"};
    return detail::finish(std::move(cert), leroux_observed_moments(p, w, d),
                          leroux_observed_moments(alt, w, d));
}

/// Case-by-case alternative for the flexible-cross Leroux model with rho = 0
/// and (lambda_u, lambda_z, 0) not mutually distinct. The free parameter of
/// whichever case applies is chosen to hit the visible-gap target. Precedence
/// when cases overlap: lambda_u = lambda_z, then lambda_z = 0, then
/// lambda_u = 0.
inline EquivalenceCertificate leroux_rho0_alternative(const LerouxParams& p,
                                                      const ProximityMatrix& w) {
    p.validate();
    if (p.cross != LerouxCross::NonParsimonious)
        throw CaseNotApplicableError("construction requires the flexible cross structure");
    if (std::fabs(p.rho) > 1e-10) throw CaseNotApplicableError("construction requires rho = 0");
    const double su = std::sqrt(p.sigma2_u);
    const double sz = std::sqrt(p.sigma2_z);
    const double g = default_gap_target(p.beta);

    LerouxParams alt = p;
    alt.lambda_uz = p.lambda_z;
    if (std::fabs(p.lambda_u - p.lambda_z) <= 1e-12) {
        // Keep sigma_eps; inflate sigma_u so (1 - rho~^2) sigma_u~^2 = sigma_u^2.
        const double t = g * sz / su;
        alt.rho = t / std::sqrt(1.0 + t * t);
        alt.sigma2_u = p.sigma2_u / (1.0 - alt.rho * alt.rho);
        alt.beta = p.beta - alt.rho * std::sqrt(alt.sigma2_u) / sz;
    } else if (std::fabs(p.lambda_z) <= 1e-12) {
        // Keep sigma_u; absorb the cross term into the noise. The constant
        // cross covariance must stay inside the per-frequency envelope, which
        // caps |rho~| at 1/sqrt(max_i (1 - lambda_u + lambda_u omega_i)).
        const DegreeMatrix dm = degree_matrix(w);
        const Vector omega = laplacian_spectrum(w, dm).values;
        double a_max = 0.0;
        for (int i = 0; i < omega.size(); ++i)
            a_max = std::max(a_max, 1.0 - p.lambda_u + p.lambda_u * omega(i));
        alt.rho = std::min(0.95 / std::sqrt(a_max), g * sz / su);
        alt.sigma2_eps = p.sigma2_eps + alt.rho * alt.rho * p.sigma2_u;
        alt.beta = p.beta - alt.rho * su / sz;
    } else if (std::fabs(p.lambda_u) <= 1e-12) {
        // Boundary correlation: the confounder variance becomes a free scale.
        alt.lambda_u = p.lambda_z;
        alt.rho = 1.0;
        alt.sigma2_eps = p.sigma2_u + p.sigma2_eps;
        alt.sigma2_u = g * g * p.sigma2_z;
        alt.beta = p.beta - alt.rho * std::sqrt(alt.sigma2_u) / sz;
    } else {
        throw CaseNotApplicableError("(lambda_u, lambda_z, 0) are mutually distinct");
    }
    const DegreeMatrix d = degree_matrix(w);
    EquivalenceCertificate cert{p, alt, "leroux_rho0_alternative"};
    return detail::finish(std::move(cert), leroux_observed_moments(p, w, d),
                          leroux_observed_moments(alt, w, d));
}

/// Alternative for the parsimonious-cross Leroux model in its two
/// non-identifiable regimes: lambda_u = lambda_z (solve the two-constraint
/// system with rho~ free), or lambda_u != lambda_z with rho = lambda_u = 0
/// (boundary correlation with lambda_u~ = lambda_z).
inline EquivalenceCertificate leroux_pars_alternative(const LerouxParams& p,
                                                      const ProximityMatrix& w) {
    p.validate();
    if (p.cross != LerouxCross::Parsimonious)
        throw CaseNotApplicableError("construction requires the parsimonious cross structure");
    const double su = std::sqrt(p.sigma2_u);
    const double sz = std::sqrt(p.sigma2_z);
    const double g = default_gap_target(p.beta);
    LerouxParams alt = p;
    if (std::fabs(p.lambda_u - p.lambda_z) <= 1e-12) {
        // beta + rho su/sz and (1 - rho^2) su^2 are the invariants; slide rho.
        const double h = p.rho * su + g * sz;
        const double t = h / (su * std::sqrt(1.0 - p.rho * p.rho));
        alt.rho = t / std::sqrt(1.0 + t * t);
        alt.sigma2_u = (1.0 - p.rho * p.rho) * p.sigma2_u / (1.0 - alt.rho * alt.rho);
        alt.beta = p.beta + p.rho * su / sz - alt.rho * std::sqrt(alt.sigma2_u) / sz;
    } else if (std::fabs(p.rho) <= 1e-10 && std::fabs(p.lambda_u) <= 1e-10) {
        alt.lambda_u = p.lambda_z;
        alt.rho = 1.0;
        alt.sigma2_eps = p.sigma2_u + p.sigma2_eps;
        alt.sigma2_u = g * g * p.sigma2_z;
        alt.beta = p.beta - alt.rho * std::sqrt(alt.sigma2_u) / sz;
    } else {
        throw CaseNotApplicableError("parameters lie in an identifiable parsimonious regime");
    }
    const DegreeMatrix d = degree_matrix(w);
    EquivalenceCertificate cert{p, alt, "leroux_pars_alternative"};
    return detail::finish(std::move(cert), leroux_observed_moments(p, w, d),
                          leroux_observed_moments(alt, w, d));
}

/// Shift construction for coregionalization models: beta~ = beta - delta with
/// b_t~ = b_t + delta a_t leaves every observable block algebraically
/// unchanged, for any delta != 0.
inline EquivalenceCertificate lmc_alternative(const LmcParams& p, const Matrix& dist,
                                              std::optional<double> delta = std::nullopt) {
    p.validate();
    if (!delta) delta = default_gap_target(p.beta);
    if (*delta == 0.0) throw DomainError("delta must be nonzero");
    LmcParams alt = p;
    alt.beta = p.beta - *delta;
    for (int t = 0; t < p.num_terms(); ++t) alt.b[t] = p.b[t] + *delta * p.a[t];
    EquivalenceCertificate cert{p, alt, "lmc_alternative"};
    return detail::finish(std::move(cert), lmc_joint_moments(p, dist),
                          lmc_joint_moments(alt, dist));
}

/// Alternative-intercept construction for the shared-range bivariate model
/// (psi_u = psi_z = psi_uz). For a candidate beta~ the matching confounder
/// scale and correlation are
///   sigma_u~^2 = sigma_u^2 + (beta~ - beta) sigma_z [(beta~ - beta) sigma_z
///                - 2 rho sigma_u],
///   rho~ = -[(beta~ - beta) sigma_z - rho sigma_u] / sigma_u~,
/// which solve the Cov(Y,Z) and Var(Y) matching equations exactly. beta~ is
/// searched on the grid beta +/- 0.1 k, k = 1..50, accepting the first
/// candidate with sigma_u~^2 > 0, |rho~| <= 1 and a positive definite
/// alternative.
inline EquivalenceCertificate bivariate_rho0_alternative(
    const BivariateParams& p, const Matrix& dist,
    std::optional<double> beta_alt = std::nullopt) {
    p.validate();
    if (std::fabs(p.psi_u - p.psi_z) > 1e-12 * std::max(p.psi_u, p.psi_z) ||
        std::fabs(p.psi_uz - p.psi_z) > 1e-12 * std::max(p.psi_uz, p.psi_z))
        throw CaseNotApplicableError("construction requires a single shared range");
    const double su = std::sqrt(p.sigma2_u);
    const double sz = std::sqrt(p.sigma2_z);
    const ObservedMoments mo = bivariate_joint_moments(p, dist);

    const auto attempt = [&](double bt) -> std::optional<EquivalenceCertificate> {
        const double dlt = (bt - p.beta) * sz;
        const double su2_alt = p.sigma2_u + dlt * (dlt - 2.0 * p.rho * su);
        if (!(su2_alt > 0.0)) return std::nullopt;
        const double rho_alt = -(dlt - p.rho * su) / std::sqrt(su2_alt);
        if (std::fabs(rho_alt) > 1.0) return std::nullopt;
        BivariateParams alt = p;
        alt.beta = bt;
        alt.sigma2_u = su2_alt;
        alt.rho = rho_alt;
        const BivariateBlocks blocks = bivariate_blocks(alt, dist);
        if (!pd_check(blocks.szz, blocks.suz, blocks.suu).pd) return std::nullopt;
        EquivalenceCertificate cert{p, alt, "bivariate_rho0_alternative"};
        return detail::finish(std::move(cert), mo, bivariate_joint_moments(alt, dist));
    };
    if (beta_alt) {
        auto c = attempt(*beta_alt);
        if (!c) throw NoValidBetaFoundError("requested beta has no admissible completion");
        return *c;
    }
    for (int k = 1; k <= 50; ++k)
        for (const double sign : {1.0, -1.0}) {
            auto c = attempt(p.beta + sign * 0.1 * k);
            if (c && c->valid) return *c;
        }
    throw NoValidBetaFoundError("no admissible beta found on the search grid");
}

} // namespace spatialident
