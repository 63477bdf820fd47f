#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "spatialident/errors.hpp"
#include "spatialident/graph.hpp"
#include "spatialident/specfun.hpp"

namespace spatialident {

/// Second moments of the observable pair (Y, Z): marginal covariance of Z,
/// cross covariance Cov(Y, Z), marginal covariance of Y, the regression
/// operator Cov(Y,Z) Var(Z)^{-1}, and the conditional covariance Var(Y | Z).
/// The joint and conditional constructors are the two algebraically
/// equivalent routes from model parameters to these matrices.
struct ObservedMoments {
    Matrix var_z;
    Matrix cov_yz;
    Matrix var_y;
    Matrix coef;
    Matrix var_y_given_z;

    int size() const { return static_cast<int>(var_z.rows()); }

    /// Covariance of the stacked vector (Y, Z), used for sampling and the
    /// Gaussian likelihood.
    Matrix joint_yz() const {
        const int n = size();
        Matrix j(2 * n, 2 * n);
        j.topLeftCorner(n, n) = var_y;
        j.topRightCorner(n, n) = cov_yz;
        j.bottomLeftCorner(n, n) = cov_yz.transpose();
        j.bottomRightCorner(n, n) = var_z;
        return j;
    }

    static ObservedMoments from_joint(const Matrix& sigma_zz, const Matrix& sigma_uz,
                                      const Matrix& sigma_uu, double beta,
                                      double sigma2_eps) {
        const int n = static_cast<int>(sigma_zz.rows());
        ObservedMoments m;
        m.var_z = sigma_zz;
        m.cov_yz = beta * sigma_zz + sigma_uz;
        m.var_y = beta * beta * sigma_zz + sigma_uu +
                  beta * (sigma_uz + sigma_uz.transpose()) +
                  sigma2_eps * Matrix::Identity(n, n);
        m.coef = sigma_zz.ldlt().solve(m.cov_yz.transpose()).transpose();
        m.var_y_given_z = m.var_y - m.coef * m.var_z * m.coef.transpose();
        return m;
    }

    static ObservedMoments from_conditional(const Matrix& var_z, const Matrix& coef,
                                            const Matrix& var_y_given_z) {
        ObservedMoments m;
        m.var_z = var_z;
        m.coef = coef;
        m.var_y_given_z = var_y_given_z;
        m.cov_yz = coef * var_z;
        m.var_y = var_y_given_z + coef * var_z * coef.transpose();
        return m;
    }
};

/// Largest entrywise relative discrepancy across the three observable blocks.
inline double moment_discrepancy(const ObservedMoments& a, const ObservedMoments& b) {
    const auto rel = [](const Matrix& x, const Matrix& y) {
        return (x - y).cwiseAbs().maxCoeff() / (1.0 + x.cwiseAbs().maxCoeff());
    };
    return std::max({rel(a.var_z, b.var_z), rel(a.cov_yz, b.cov_yz), rel(a.var_y, b.var_y)});
}

/// Positive-definiteness report for a symmetric matrix pair split as
/// [[UU, UZ], [UZ^T, ZZ]]; uses the Schur-complement characterization.
struct PdReport {
    bool pd = false;
    double min_eig_zz = 0.0;
    double min_eig_schur = 0.0;
    double condition_number = 0.0;  // of the full joint matrix
};

inline double min_eigenvalue(const Matrix& m) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (m + m.transpose()),
                                                 Eigen::EigenvaluesOnly)
        .eigenvalues()
        .minCoeff();
}

inline bool is_pd(const Matrix& m) { return min_eigenvalue(m) > 0.0; }

inline PdReport pd_check(const Matrix& sigma_zz, const Matrix& sigma_uz,
                         const Matrix& sigma_uu) {
    PdReport r;
    r.min_eig_zz = min_eigenvalue(sigma_zz);
    if (r.min_eig_zz > 0.0) {
        const Matrix schur =
            sigma_uu - sigma_uz * sigma_zz.ldlt().solve(sigma_uz.transpose());
        r.min_eig_schur = min_eigenvalue(schur);
    }
    r.pd = r.min_eig_zz > 0.0 && r.min_eig_schur > 0.0;
    const int n = static_cast<int>(sigma_zz.rows());
    Matrix joint(2 * n, 2 * n);
    joint.topLeftCorner(n, n) = sigma_uu;
    joint.topRightCorner(n, n) = sigma_uz;
    joint.bottomLeftCorner(n, n) = sigma_uz.transpose();
    joint.bottomRightCorner(n, n) = sigma_zz;
    const Vector ev =
        Eigen::SelfAdjointEigenSolver<Matrix>(joint, Eigen::EigenvaluesOnly).eigenvalues();
    r.condition_number = (ev.minCoeff() > 0.0) ? ev.maxCoeff() / ev.minCoeff()
                                               : std::numeric_limits<double>::infinity();
    return r;
}

// ---------------------------------------------------------------------------
// Proper-CAR confounder/treatment model on a weighted graph.

struct CarSPParams {
    double beta = 0.0;
    double tau_u = 1.0;
    double tau_z = 1.0;
    double phi_u = 0.0;
    double phi_z = 0.0;
    double rho = 0.0;
    double sigma2_eps = 1.0;

    void validate() const {
        if (!(tau_u > 0.0 && tau_z > 0.0)) throw DomainError("CAR precisions must be positive");
        if (!(std::fabs(phi_u) < 1.0 && std::fabs(phi_z) < 1.0))
            throw DomainError("CAR autocorrelation parameters must lie in (-1, 1)");
        if (!(std::fabs(rho) < 1.0)) throw DomainError("CAR cross correlation must lie in (-1, 1)");
        if (!(sigma2_eps > 0.0)) throw DomainError("noise variance must be positive");
    }
};

/// Joint precision of the latent pair (U, Z):
/// [[tau_u (D - phi_u W), -rho sqrt(tau_u tau_z) D],
///  [-rho sqrt(tau_u tau_z) D, tau_z (D - phi_z W)]].
inline Matrix car_joint_precision(const CarSPParams& p, const ProximityMatrix& w,
                                  const DegreeMatrix& d) {
    p.validate();
    const int n = w.size();
    const Matrix dd = d.dense();
    Matrix q(2 * n, 2 * n);
    q.topLeftCorner(n, n) = p.tau_u * (dd - p.phi_u * w.w);
    q.bottomRightCorner(n, n) = p.tau_z * (dd - p.phi_z * w.w);
    q.topRightCorner(n, n) = -p.rho * std::sqrt(p.tau_u * p.tau_z) * dd;
    q.bottomLeftCorner(n, n) = q.topRightCorner(n, n);
    return q;
}

/// Closed-form observable moments in the eigenbasis of D^{-1/2} W D^{-1/2}.
/// Throws NotPositiveDefiniteError when the parameters leave the joint
/// precision indefinite on this graph.
inline ObservedMoments car_observed_moments(const CarSPParams& p, const ProximityMatrix& w,
                                            const DegreeMatrix& d) {
    p.validate();
    const SpectralDecomposition sp = normalized_spectrum(w, d);
    const int n = w.size();
    Vector vz_inv(n), cond_var(n), coef_diag(n);
    for (int i = 0; i < n; ++i) {
        const double au = 1.0 - p.phi_u * sp.values(i);
        const double az = 1.0 - p.phi_z * sp.values(i);
        if (!(au > 0.0) || !(az * au > p.rho * p.rho))
            throw NotPositiveDefiniteError("CAR joint precision is not positive definite");
        vz_inv(i) = p.tau_z * (az - p.rho * p.rho / au);
        cond_var(i) = 1.0 / (p.tau_u * au);
        coef_diag(i) = p.beta + p.rho * std::sqrt(p.tau_z / p.tau_u) / au;
    }
    const Vector ds = d.sqrt();
    const Vector dis = d.inv_sqrt();
    const Matrix gi = dis.asDiagonal() * sp.vectors;  // D^{-1/2} Gamma
    const Matrix gs = ds.asDiagonal() * sp.vectors;   // D^{1/2} Gamma
    const Matrix var_z = gi * vz_inv.cwiseInverse().asDiagonal() * gi.transpose();
    const Matrix coef = gi * coef_diag.asDiagonal() * gs.transpose();
    const Matrix var_y_given_z =
        gi * cond_var.asDiagonal() * gi.transpose() + p.sigma2_eps * Matrix::Identity(n, n);
    return ObservedMoments::from_conditional(var_z, coef, var_y_given_z);
}

/// Reference route: invert the full 2n x 2n precision and assemble moments
/// from the latent covariance blocks. Slower, used to cross-check the
/// spectral closed forms.
inline ObservedMoments car_observed_moments_bruteforce(const CarSPParams& p,
                                                       const ProximityMatrix& w,
                                                       const DegreeMatrix& d) {
    const Matrix q = car_joint_precision(p, w, d);
    Eigen::LLT<Matrix> llt(q);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefiniteError("CAR joint precision is not positive definite");
    const int n = w.size();
    const Matrix sigma = llt.solve(Matrix::Identity(2 * n, 2 * n));
    return ObservedMoments::from_joint(sigma.bottomRightCorner(n, n),
                                       sigma.topRightCorner(n, n),
                                       sigma.topLeftCorner(n, n), p.beta, p.sigma2_eps);
}

// ---------------------------------------------------------------------------
// Leroux-family confounder/treatment model.

enum class LerouxCross { Parsimonious, NonParsimonious };

struct LerouxParams {
    double beta = 0.0;
    double sigma2_u = 1.0;
    double sigma2_z = 1.0;
    double lambda_u = 0.0;
    double lambda_z = 0.0;
    double rho = 0.0;
    double sigma2_eps = 1.0;
    LerouxCross cross = LerouxCross::Parsimonious;
    double lambda_uz = 0.0;  // used only by the non-parsimonious cross

    void validate() const {
        if (!(sigma2_u > 0.0 && sigma2_z > 0.0))
            throw DomainError("Leroux variances must be positive");
        const auto lambda_ok = [](double l) { return l >= 0.0 && l < 1.0; };
        if (!lambda_ok(lambda_u) || !lambda_ok(lambda_z))
            throw DomainError("Leroux mixing parameters must lie in [0, 1)");
        if (cross == LerouxCross::NonParsimonious && !lambda_ok(lambda_uz))
            throw DomainError("Leroux cross mixing parameter must lie in [0, 1)");
        if (!(std::fabs(rho) <= 1.0))
            throw DomainError("Leroux cross correlation must lie in [-1, 1]");
        if (!(sigma2_eps > 0.0)) throw DomainError("noise variance must be positive");
    }
};

/// Diagonal latent covariances in the Laplacian eigenbasis; omega are the
/// eigenvalues of D - W.
struct LerouxSpectralBlocks {
    Vector omega;
    Matrix basis;  // eigenvectors of D - W
    Vector suu, szz, suz;
};

inline LerouxSpectralBlocks leroux_spectral_blocks(const LerouxParams& p,
                                                   const ProximityMatrix& w,
                                                   const DegreeMatrix& d) {
    p.validate();
    const SpectralDecomposition sp = laplacian_spectrum(w, d);
    const int n = w.size();
    LerouxSpectralBlocks b;
    b.omega = sp.values;
    b.basis = sp.vectors;
    b.suu.resize(n);
    b.szz.resize(n);
    b.suz.resize(n);
    const auto denom = [](double lambda, double om) { return 1.0 - lambda + lambda * om; };
    for (int i = 0; i < n; ++i) {
        const double au = denom(p.lambda_u, b.omega(i));
        const double az = denom(p.lambda_z, b.omega(i));
        if (!(au > 0.0 && az > 0.0))
            throw NotPositiveDefiniteError("Leroux structure matrix is singular on this graph");
        b.suu(i) = p.sigma2_u / au;
        b.szz(i) = p.sigma2_z / az;
        if (p.cross == LerouxCross::NonParsimonious) {
            const double auz = denom(p.lambda_uz, b.omega(i));
            b.suz(i) = p.rho * std::sqrt(p.sigma2_u * p.sigma2_z) / auz;
        } else {
            b.suz(i) = p.rho * std::sqrt(b.suu(i) * b.szz(i));
        }
        if (b.suz(i) * b.suz(i) > b.suu(i) * b.szz(i) * (1.0 + 1e-12))
            throw NotPositiveDefiniteError(
                "Leroux cross covariance exceeds the marginal envelope at frequency " +
                std::to_string(i));
    }
    return b;
}

/// Observable moments in location coordinates, assembled from the spectral
/// closed forms and rotated back with the Laplacian eigenbasis.
inline ObservedMoments leroux_observed_moments(const LerouxParams& p, const ProximityMatrix& w,
                                               const DegreeMatrix& d) {
    const LerouxSpectralBlocks b = leroux_spectral_blocks(p, w, d);
    const int n = static_cast<int>(b.omega.size());
    Vector var_z(n), coef(n), cond(n);
    for (int i = 0; i < n; ++i) {
        var_z(i) = b.szz(i);
        coef(i) = p.beta + b.suz(i) / b.szz(i);
        cond(i) = b.suu(i) - b.suz(i) * b.suz(i) / b.szz(i) + p.sigma2_eps;
    }
    const Matrix& pb = b.basis;
    return ObservedMoments::from_conditional(pb * var_z.asDiagonal() * pb.transpose(),
                                             pb * coef.asDiagonal() * pb.transpose(),
                                             pb * cond.asDiagonal() * pb.transpose());
}

/// Reference route through the joint representation.
inline ObservedMoments leroux_observed_moments_joint(const LerouxParams& p,
                                                     const ProximityMatrix& w,
                                                     const DegreeMatrix& d) {
    const LerouxSpectralBlocks b = leroux_spectral_blocks(p, w, d);
    const Matrix& pb = b.basis;
    return ObservedMoments::from_joint(pb * b.szz.asDiagonal() * pb.transpose(),
                                       pb * b.suz.asDiagonal() * pb.transpose(),
                                       pb * b.suu.asDiagonal() * pb.transpose(), p.beta,
                                       p.sigma2_eps);
}

// ---------------------------------------------------------------------------
// Geostatistical models on a distance matrix.

inline void validate_distance_matrix(const Matrix& dist) {
    if (dist.rows() != dist.cols() || dist.rows() < 1)
        throw DomainError("distance matrix must be square and nonempty");
    for (int i = 0; i < dist.rows(); ++i) {
        if (dist(i, i) != 0.0) throw DomainError("distance matrix diagonal must be zero");
        for (int j = 0; j < dist.cols(); ++j) {
            if (dist(i, j) < 0.0) throw DomainError("distances must be nonnegative");
            if (dist(i, j) != dist(j, i)) throw DomainError("distance matrix must be symmetric");
        }
    }
}

inline Matrix correlation_matrix(CovFamily f, double range, const Matrix& dist,
                                 double shape = 1.0) {
    Matrix c(dist.rows(), dist.cols());
    for (int i = 0; i < dist.rows(); ++i)
        for (int j = 0; j < dist.cols(); ++j) c(i, j) = cov_eval(f, range, dist(i, j), shape);
    return c;
}

/// Linear model of coregionalization with T shared latent fields:
/// Z = sum_t a_t v_t, U = sum_t b_t v_t, v_t centered with correlation
/// C(phi_t, .).
struct LmcParams {
    double beta = 0.0;
    std::vector<double> a, b, phi;
    CovFamily family = CovFamily::Exponential;
    double shape = 1.0;
    double sigma2_eps = 1.0;

    int num_terms() const { return static_cast<int>(a.size()); }

    void validate() const {
        if (a.empty() || a.size() != b.size() || a.size() != phi.size())
            throw DomainError("LMC coefficient vectors must be nonempty and equal length");
        for (double v : phi)
            if (!(v > 0.0)) throw DomainError("LMC ranges must be positive");
        for (double v : a)
            if (v == 0.0) throw DomainError("LMC treatment loadings must be nonzero");
        if (!(sigma2_eps > 0.0)) throw DomainError("noise variance must be positive");
    }
};

inline ObservedMoments lmc_joint_moments(const LmcParams& p, const Matrix& dist) {
    p.validate();
    validate_distance_matrix(dist);
    const int n = static_cast<int>(dist.rows());
    Matrix szz = Matrix::Zero(n, n), suz = Matrix::Zero(n, n), suu = Matrix::Zero(n, n);
    for (int t = 0; t < p.num_terms(); ++t) {
        const Matrix c = correlation_matrix(p.family, p.phi[t], dist, p.shape);
        szz += p.a[t] * p.a[t] * c;
        suz += p.b[t] * p.a[t] * c;
        suu += p.b[t] * p.b[t] * c;
    }
    return ObservedMoments::from_joint(szz, suz, suu, p.beta, p.sigma2_eps);
}

/// Bivariate geostatistical model with separate ranges for the confounder,
/// treatment, and cross blocks, all drawn from one correlation family.
struct BivariateParams {
    double beta = 0.0;
    double sigma2_u = 1.0;
    double sigma2_z = 1.0;
    double rho = 0.0;
    double psi_u = 1.0;
    double psi_z = 1.0;
    double psi_uz = 1.0;
    CovFamily family = CovFamily::Exponential;
    double shape = 1.0;
    double sigma2_eps = 1.0;

    void validate() const {
        if (!(sigma2_u > 0.0 && sigma2_z > 0.0))
            throw DomainError("bivariate variances must be positive");
        if (!(psi_u > 0.0 && psi_z > 0.0 && psi_uz > 0.0))
            throw DomainError("bivariate ranges must be positive");
        if (!(std::fabs(rho) <= 1.0))
            throw DomainError("bivariate cross correlation must lie in [-1, 1]");
        if (!(sigma2_eps > 0.0)) throw DomainError("noise variance must be positive");
    }
};

struct BivariateBlocks {
    Matrix suu, szz, suz;
};

inline BivariateBlocks bivariate_blocks(const BivariateParams& p, const Matrix& dist) {
    p.validate();
    validate_distance_matrix(dist);
    BivariateBlocks b;
    b.suu = p.sigma2_u * correlation_matrix(p.family, p.psi_u, dist, p.shape);
    b.szz = p.sigma2_z * correlation_matrix(p.family, p.psi_z, dist, p.shape);
    b.suz = p.rho * std::sqrt(p.sigma2_u * p.sigma2_z) *
            correlation_matrix(p.family, p.psi_uz, dist, p.shape);
    return b;
}

inline ObservedMoments bivariate_joint_moments(const BivariateParams& p, const Matrix& dist) {
    const BivariateBlocks b = bivariate_blocks(p, dist);
    return ObservedMoments::from_joint(b.szz, b.suz, b.suu, p.beta, p.sigma2_eps);
}

/// Bivariate Matern with a shared range, per-process smoothness, and the
/// cross smoothness fixed at the average (nu_u + nu_z) / 2.
struct ParsMaternParams {
    double beta = 0.0;
    double sigma2_u = 1.0;
    double sigma2_z = 1.0;
    double rho = 0.0;
    double phi = 1.0;
    double nu_u = 0.5;
    double nu_z = 0.5;
    double sigma2_eps = 1.0;

    void validate() const {
        if (!(sigma2_u > 0.0 && sigma2_z > 0.0))
            throw DomainError("Matern variances must be positive");
        if (!(phi > 0.0)) throw DomainError("Matern range must be positive");
        if (!(nu_u > 0.0 && nu_z > 0.0)) throw DomainError("Matern smoothness must be positive");
        if (!(std::fabs(rho) <= 1.0))
            throw DomainError("Matern cross correlation must lie in [-1, 1]");
        if (!(sigma2_eps > 0.0)) throw DomainError("noise variance must be positive");
    }
};

inline BivariateBlocks pars_matern_blocks(const ParsMaternParams& p, const Matrix& dist) {
    p.validate();
    validate_distance_matrix(dist);
    BivariateBlocks b;
    b.suu = p.sigma2_u * correlation_matrix(CovFamily::Matern, p.phi, dist, p.nu_u);
    b.szz = p.sigma2_z * correlation_matrix(CovFamily::Matern, p.phi, dist, p.nu_z);
    b.suz = p.rho * std::sqrt(p.sigma2_u * p.sigma2_z) *
            correlation_matrix(CovFamily::Matern, p.phi, dist, 0.5 * (p.nu_u + p.nu_z));
    return b;
}

inline ObservedMoments pars_matern_joint_moments(const ParsMaternParams& p, const Matrix& dist) {
    const BivariateBlocks b = pars_matern_blocks(p, dist);
    return ObservedMoments::from_joint(b.szz, b.suz, b.suu, p.beta, p.sigma2_eps);
}

} // namespace spatialident
