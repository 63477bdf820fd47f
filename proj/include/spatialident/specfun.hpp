#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "spatialident/errors.hpp"

namespace spatialident {

namespace detail {

// Reciprocal-gamma combinations used by the small-argument Bessel series:
//   gam1 = [1/Gamma(1-mu) - 1/Gamma(1+mu)] / (2 mu)
//   gam2 = [1/Gamma(1-mu) + 1/Gamma(1+mu)] / 2
// gam1 has a removable singularity at mu = 0; a short Taylor expansion avoids
// the catastrophic cancellation of the direct quotient for tiny mu.
inline void recip_gamma_pair(double mu, double& gam1, double& gam2,
                             double& inv_gamma_1p, double& inv_gamma_1m) {
    inv_gamma_1p = 1.0 / std::tgamma(1.0 + mu);
    inv_gamma_1m = 1.0 / std::tgamma(1.0 - mu);
    gam2 = 0.5 * (inv_gamma_1m + inv_gamma_1p);
    if (std::fabs(mu) < 1e-4) {
        // 1/Gamma(1+x) = 1 + a1 x + a2 x^2 + a3 x^3 + ... ; odd terms cancel
        // pairwise in the difference, leaving gam1 = -(a1 + a3 mu^2 + ...).
        constexpr double euler = 0.57721566490153286061;
        constexpr double zeta3 = 1.20205690315959429;
        constexpr double pi2 = 9.86960440108935862;
        const double a1 = euler;
        const double a3 = euler * euler * euler / 6.0 - euler * pi2 / 12.0 + zeta3 / 3.0;
        gam1 = -(a1 + a3 * mu * mu);
    } else {
        gam1 = (inv_gamma_1m - inv_gamma_1p) / (2.0 * mu);
    }
}

} // namespace detail

/// Modified Bessel function of the second kind K_nu(z) for nu >= 0, z > 0.
///
/// Small arguments (z < 2) use the Temme power series for the fractional
/// order mu in [-1/2, 1/2]; larger arguments use Steed's continued fraction
/// for K_mu and K_{mu+1}. Either seed pair is promoted to order nu by the
/// forward recurrence K_{m+1}(z) = (2m/z) K_m(z) + K_{m-1}(z), which is
/// stable for K. Relative accuracy is close to machine precision across
/// z in [1e-6, 700] whenever the value is representable; results beyond
/// the overflow threshold come back as +inf.
inline double bessel_k(double nu, double z) {
    if (!(z > 0.0)) throw DomainError("bessel_k requires z > 0");
    if (nu < 0.0) nu = -nu;  // K_{-nu} = K_nu
    constexpr double eps = std::numeric_limits<double>::epsilon();
    constexpr int max_iter = 10000;
    constexpr double pi = 3.14159265358979323846;

    const int nl = static_cast<int>(nu + 0.5);
    const double mu = nu - nl;  // in [-1/2, 1/2]
    const double mu2 = mu * mu;
    double k_mu, k_mu1;

    if (z < 2.0) {
        const double x2 = 0.5 * z;
        const double pimu = pi * mu;
        const double fact = (std::fabs(pimu) < eps) ? 1.0 : pimu / std::sin(pimu);
        double d = -std::log(x2);
        double e = mu * d;
        const double fact2 = (std::fabs(e) < eps) ? 1.0 : std::sinh(e) / e;
        double gam1, gam2, gampl, gammi;
        detail::recip_gamma_pair(mu, gam1, gam2, gampl, gammi);
        double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
        double sum = ff;
        e = std::exp(e);
        double p = 0.5 * e / gampl;
        double q = 0.5 / (e * gammi);
        double c = 1.0;
        d = z * z * 0.25;
        double sum1 = p;
        int i = 1;
        for (; i <= max_iter; ++i) {
            ff = (i * ff + p + q) / (i * i - mu2);
            c *= d / i;
            p /= (i - mu);
            q /= (i + mu);
            const double del = c * ff;
            sum += del;
            sum1 += c * (p - i * ff);
            if (std::fabs(del) < std::fabs(sum) * eps) break;
        }
        if (i > max_iter) throw ConvergenceError("bessel_k series did not converge");
        k_mu = sum;
        k_mu1 = sum1 * 2.0 / z;
    } else {
        double b = 2.0 * (1.0 + z);
        double d = 1.0 / b;
        double h = d, delh = d;
        double q1 = 0.0, q2 = 1.0;
        const double a1 = 0.25 - mu2;
        double q = a1, c = a1, a = -a1;
        double s = 1.0 + q * delh;
        int i = 2;
        for (; i <= max_iter; ++i) {
            a -= 2 * (i - 1);
            c = -a * c / i;
            const double qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            const double dels = q * delh;
            s += dels;
            if (std::fabs(dels / s) < eps) break;
        }
        if (i > max_iter) throw ConvergenceError("bessel_k continued fraction did not converge");
        h = a1 * h;
        k_mu = std::sqrt(pi / (2.0 * z)) * std::exp(-z) / s;
        k_mu1 = k_mu * (mu + z + 0.5 - h) / z;
    }

    for (int i = 1; i <= nl; ++i) {
        const double next = (mu + i) * (2.0 / z) * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = next;
    }
    return k_mu;
}

/// Matern correlation 2^{1-nu}/Gamma(nu) (w/phi)^nu K_nu(w/phi); equals 1 at
/// w = 0 and exp(-w/phi) at nu = 1/2.
inline double matern(double phi, double nu, double w) {
    if (!(phi > 0.0)) throw DomainError("matern requires phi > 0");
    if (!(nu > 0.0)) throw DomainError("matern requires nu > 0");
    if (w < 0.0) throw DomainError("matern requires w >= 0");
    if (w == 0.0) return 1.0;
    const double zarg = w / phi;
    return std::exp((1.0 - nu) * std::log(2.0) - std::lgamma(nu) + nu * std::log(zarg)) *
           bessel_k(nu, zarg);
}

/// Isotropic correlation families keyed by a single range parameter, with an
/// optional shape argument (the exponent for the powered exponential, the
/// smoothness for Matern).
enum class CovFamily { Exponential, Gaussian, PoweredExponential, Spherical, Wave, Matern };

inline std::string to_string(CovFamily f) {
    switch (f) {
        case CovFamily::Exponential: return "exponential";
        case CovFamily::Gaussian: return "gaussian";
        case CovFamily::PoweredExponential: return "powered_exponential";
        case CovFamily::Spherical: return "spherical";
        case CovFamily::Wave: return "wave";
        case CovFamily::Matern: return "matern";
    }
    throw DomainError("unknown covariance family");
}

inline CovFamily cov_family_from_string(const std::string& s) {
    if (s == "exponential") return CovFamily::Exponential;
    if (s == "gaussian") return CovFamily::Gaussian;
    if (s == "powered_exponential") return CovFamily::PoweredExponential;
    if (s == "spherical") return CovFamily::Spherical;
    if (s == "wave") return CovFamily::Wave;
    if (s == "matern") return CovFamily::Matern;
    throw DomainError("unknown covariance family: " + s);
}

/// Evaluates the correlation at distance w >= 0. `shape` is the powered
/// exponential's exponent c in (0, 2] or Matern's smoothness nu; it is
/// ignored by the other families.
inline double cov_eval(CovFamily f, double range, double w, double shape = 1.0) {
    if (!(range > 0.0)) throw DomainError("covariance range must be positive");
    if (w < 0.0) throw DomainError("distance must be nonnegative");
    switch (f) {
        case CovFamily::Exponential:
            return std::exp(-w / range);
        case CovFamily::Gaussian: {
            const double r = w / range;
            return std::exp(-r * r);
        }
        case CovFamily::PoweredExponential:
            if (!(shape > 0.0 && shape <= 2.0))
                throw DomainError("powered exponential needs exponent in (0, 2]");
            return std::exp(-std::pow(w / range, shape));
        case CovFamily::Spherical: {
            if (w > range) return 0.0;
            const double r = w / range;
            return 1.0 - 1.5 * r + 0.5 * r * r * r;
        }
        case CovFamily::Wave: {
            if (w == 0.0) return 1.0;
            const double r = w / range;
            return std::sin(r) / r;
        }
        case CovFamily::Matern:
            return matern(range, shape, w);
    }
    throw DomainError("unknown covariance family");
}

/// Outcome of the finite linear-independence probe: the |S| x K matrix
/// A_{st} = C(psi_t, w_s) and whether it has full column rank. The smallest
/// and largest singular values are reported; when rank deficient, a unit
/// null-space coefficient vector is attached.
struct LinIndepVerdict {
    bool independent = false;
    double sigma_min = 0.0;
    double sigma_max = 0.0;
    Eigen::VectorXd null_vector;  // empty when independent
};

/// Tests whether {w -> C(psi_t, w)}_{t=1..K} are linearly independent as
/// functions restricted to the distance set S. Full column rank is declared
/// when sigma_min > rank_tol * sigma_max.
inline LinIndepVerdict k_linear_independence(CovFamily f,
                                             const std::vector<double>& ranges,
                                             const std::vector<double>& distances,
                                             double shape = 1.0,
                                             double rank_tol = 1e-10) {
    const int k = static_cast<int>(ranges.size());
    const int m = static_cast<int>(distances.size());
    if (k < 1) throw DomainError("need at least one range parameter");
    if (m < 1) throw DomainError("need at least one distance");
    for (int a = 0; a < k; ++a)
        for (int b = a + 1; b < k; ++b)
            if (ranges[a] == ranges[b])
                throw DuplicateParameterError("range parameters must be distinct");
    Eigen::MatrixXd mat(m, k);
    for (int s = 0; s < m; ++s)
        for (int t = 0; t < k; ++t) mat(s, t) = cov_eval(f, ranges[t], distances[s], shape);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat, Eigen::ComputeFullV);
    LinIndepVerdict v;
    v.sigma_max = svd.singularValues()(0);
    v.sigma_min = (m >= k) ? svd.singularValues()(k - 1) : 0.0;
    v.independent = (m >= k) && v.sigma_min > rank_tol * v.sigma_max;
    if (!v.independent) v.null_vector = svd.matrixV().col(k - 1);
    return v;
}

/// Positive distances where two wave correlations with different ranges take
/// the same value, found by bracketing sign changes of
/// g(t) = sin(t) - sin(alpha t)/alpha with alpha = phi_max/phi_min and
/// bisecting to machine precision. The residual |C(phi1, w) - C(phi2, w)| is
/// returned alongside each crossing.
struct WaveCrossings {
    std::vector<double> distances;
    std::vector<double> residuals;
};

inline WaveCrossings wave_crossings(double phi1, double phi2, int count = 10) {
    if (!(phi1 > 0.0 && phi2 > 0.0)) throw DomainError("wave ranges must be positive");
    if (std::fabs(phi1 - phi2) <= 1e-12 * std::max(phi1, phi2))
        throw DuplicateParameterError("wave crossing search needs distinct ranges");
    if (count < 1) throw DomainError("crossing count must be positive");
    const double phi_max = std::max(phi1, phi2);
    const double phi_min = std::min(phi1, phi2);
    const double alpha = phi_max / phi_min;
    const auto g = [alpha](double t) { return std::sin(t) - std::sin(alpha * t) / alpha; };

    WaveCrossings out;
    const double step = 3.14159265358979323846 / (16.0 * alpha);
    double t_prev = step;
    double g_prev = g(t_prev);
    const int max_steps = 2000000;
    for (int s = 1; s < max_steps && static_cast<int>(out.distances.size()) < count; ++s) {
        const double t = t_prev + step;
        const double g_cur = g(t);
        if ((g_prev < 0.0 && g_cur > 0.0) || (g_prev > 0.0 && g_cur < 0.0)) {
            double lo = t_prev, hi = t;
            double glo = g_prev;
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double gmid = g(mid);
                if (gmid == 0.0) {
                    lo = hi = mid;
                    break;
                }
                if ((glo < 0.0) == (gmid < 0.0)) {
                    lo = mid;
                    glo = gmid;
                } else {
                    hi = mid;
                }
                if (hi - lo <= 1e-16 * hi) break;
            }
            const double root = 0.5 * (lo + hi);
            const double w = root * phi_max;
            const double resid =
                std::fabs(cov_eval(CovFamily::Wave, phi1, w) - cov_eval(CovFamily::Wave, phi2, w));
            out.distances.push_back(w);
            out.residuals.push_back(resid);
        }
        t_prev = t;
        g_prev = g_cur;
    }
    if (static_cast<int>(out.distances.size()) < count)
        throw ConvergenceError("wave crossing search ran out of scan range");
    return out;
}

} // namespace spatialident
