#pragma once

#include <random>

#include "spatialident/forge.hpp"
#include "spatialident/models.hpp"

namespace testutil {

using namespace spatialident;

/// Connected weighted graph: a ring plus random chords.
inline ProximityMatrix random_graph(std::mt19937_64& rng, int n, bool binary = false) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Matrix w = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const int j = (i + 1) % n;
        w(i, j) = w(j, i) = binary ? 1.0 : 0.3 + unif(rng);
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 2; j < n; ++j)
            if (unif(rng) < 0.25) w(i, j) = w(j, i) = binary ? 1.0 : 0.3 + unif(rng);
    return make_proximity(w);
}

/// Euclidean distance matrix of random planar points.
inline Matrix random_distances(std::mt19937_64& rng, int n, double scale = 3.0) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Matrix pts(n, 2);
    for (int i = 0; i < n; ++i) {
        pts(i, 0) = scale * unif(rng);
        pts(i, 1) = scale * unif(rng);
    }
    Matrix d = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) d(i, j) = (pts.row(i) - pts.row(j)).norm();
    return d;
}

inline double unif_in(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline CarSPParams random_car(std::mt19937_64& rng) {
    CarSPParams p;
    p.beta = unif_in(rng, -2.0, 2.0);
    p.tau_u = unif_in(rng, 0.4, 3.0);
    p.tau_z = unif_in(rng, 0.4, 3.0);
    p.phi_u = unif_in(rng, -0.6, 0.6);
    p.phi_z = unif_in(rng, -0.6, 0.6);
    p.rho = unif_in(rng, -0.3, 0.3);
    p.sigma2_eps = unif_in(rng, 0.2, 2.0);
    return p;
}

/// Rejection-samples a Leroux spec whose cross covariance stays inside the
/// per-frequency envelope on the given graph.
inline LerouxParams random_leroux(std::mt19937_64& rng, LerouxCross cross,
                                  const ProximityMatrix& w) {
    const DegreeMatrix d = degree_matrix(w);
    for (int attempt = 0; attempt < 200; ++attempt) {
        LerouxParams p;
        p.cross = cross;
        p.beta = unif_in(rng, -2.0, 2.0);
        p.sigma2_u = unif_in(rng, 0.4, 2.0);
        p.sigma2_z = unif_in(rng, 0.4, 2.0);
        p.lambda_u = unif_in(rng, 0.05, 0.8);
        p.lambda_z = unif_in(rng, 0.05, 0.8);
        p.rho = unif_in(rng, -0.5, 0.5);
        p.sigma2_eps = unif_in(rng, 0.2, 2.0);
        if (cross == LerouxCross::NonParsimonious) p.lambda_uz = unif_in(rng, 0.05, 0.8);
        try {
            leroux_spectral_blocks(p, w, d);
            return p;
        } catch (const NotPositiveDefiniteError&) {
        }
    }
    throw std::runtime_error("could not sample a valid Leroux spec");
}

inline LmcParams random_lmc(std::mt19937_64& rng, int terms = 2) {
    LmcParams p;
    p.beta = unif_in(rng, -2.0, 2.0);
    for (int t = 0; t < terms; ++t) {
        p.a.push_back(unif_in(rng, 0.4, 1.5) * (unif_in(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0));
        p.b.push_back(unif_in(rng, -1.0, 1.0));
        p.phi.push_back(unif_in(rng, 0.5, 2.5));
    }
    p.family = CovFamily::Exponential;
    p.sigma2_eps = unif_in(rng, 0.2, 2.0);
    return p;
}

inline BivariateParams random_bivariate(std::mt19937_64& rng, const Matrix& dist) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        BivariateParams p;
        p.beta = unif_in(rng, -2.0, 2.0);
        p.sigma2_u = unif_in(rng, 0.4, 2.0);
        p.sigma2_z = unif_in(rng, 0.4, 2.0);
        p.rho = unif_in(rng, -0.5, 0.5);
        p.psi_u = unif_in(rng, 0.5, 2.5);
        p.psi_z = unif_in(rng, 0.5, 2.5);
        p.psi_uz = unif_in(rng, 0.5, 2.5);
        p.family = CovFamily::Exponential;
        p.sigma2_eps = unif_in(rng, 0.2, 2.0);
        const BivariateBlocks b = bivariate_blocks(p, dist);
        if (pd_check(b.szz, b.suz, b.suu).pd) return p;
    }
    throw std::runtime_error("could not sample a valid bivariate spec");
}

inline ParsMaternParams random_pars_matern(std::mt19937_64& rng, const Matrix& dist) {
    for (int attempt = 0; attempt < 200; ++attempt) {
        ParsMaternParams p;
        p.beta = unif_in(rng, -2.0, 2.0);
        p.sigma2_u = unif_in(rng, 0.4, 2.0);
        p.sigma2_z = unif_in(rng, 0.4, 2.0);
        p.rho = unif_in(rng, -0.5, 0.5);
        p.phi = unif_in(rng, 0.5, 2.0);
        p.nu_u = unif_in(rng, 0.3, 2.0);
        p.nu_z = unif_in(rng, 0.3, 2.0);
        p.sigma2_eps = unif_in(rng, 0.2, 2.0);
        const BivariateBlocks b = pars_matern_blocks(p, dist);
        if (pd_check(b.szz, b.suz, b.suu).pd) return p;
    }
    throw std::runtime_error("could not sample a valid Matern spec");
}

/// Latent covariance blocks plus (beta, sigma2_eps) for any spec, the raw
/// material of both observable-moment routes.
struct JointBlocks {
    Matrix szz, suz, suu;
    double beta = 0.0;
    double sigma2_eps = 0.0;
};

inline JointBlocks joint_blocks(const ModelSpec& spec, const Matrix& g) {
    return std::visit(
        [&](const auto& p) -> JointBlocks {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, CarSPParams>) {
                const ProximityMatrix w = make_proximity(g);
                const DegreeMatrix d = degree_matrix(w);
                const Matrix q = car_joint_precision(p, w, d);
                const int n = w.size();
                const Matrix sigma = q.llt().solve(Matrix::Identity(2 * n, 2 * n));
                return {sigma.bottomRightCorner(n, n), sigma.topRightCorner(n, n),
                        sigma.topLeftCorner(n, n), p.beta, p.sigma2_eps};
            } else if constexpr (std::is_same_v<T, LerouxParams>) {
                const ProximityMatrix w = make_proximity(g);
                const DegreeMatrix d = degree_matrix(w);
                const LerouxSpectralBlocks b = leroux_spectral_blocks(p, w, d);
                const Matrix& pb = b.basis;
                return {pb * b.szz.asDiagonal() * pb.transpose(),
                        pb * b.suz.asDiagonal() * pb.transpose(),
                        pb * b.suu.asDiagonal() * pb.transpose(), p.beta, p.sigma2_eps};
            } else if constexpr (std::is_same_v<T, LmcParams>) {
                const int n = static_cast<int>(g.rows());
                Matrix szz = Matrix::Zero(n, n), suz = Matrix::Zero(n, n),
                       suu = Matrix::Zero(n, n);
                for (int t = 0; t < p.num_terms(); ++t) {
                    const Matrix c = correlation_matrix(p.family, p.phi[t], g, p.shape);
                    szz += p.a[t] * p.a[t] * c;
                    suz += p.b[t] * p.a[t] * c;
                    suu += p.b[t] * p.b[t] * c;
                }
                return {szz, suz, suu, p.beta, p.sigma2_eps};
            } else if constexpr (std::is_same_v<T, BivariateParams>) {
                const BivariateBlocks b = bivariate_blocks(p, g);
                return {b.szz, b.suz, b.suu, p.beta, p.sigma2_eps};
            } else {
                const BivariateBlocks b = pars_matern_blocks(p, g);
                return {b.szz, b.suz, b.suu, p.beta, p.sigma2_eps};
            }
        },
        spec);
}

/// The two observable-moment routes from the same latent blocks.
inline ObservedMoments route_joint(const JointBlocks& b) {
    return ObservedMoments::from_joint(b.szz, b.suz, b.suu, b.beta, b.sigma2_eps);
}

inline ObservedMoments route_conditional(const JointBlocks& b) {
    const int n = static_cast<int>(b.szz.rows());
    const Matrix coef = b.beta * Matrix::Identity(n, n) +
                        b.szz.ldlt().solve(b.suz.transpose()).transpose();
    const Matrix cond = b.suu - b.suz * b.szz.ldlt().solve(b.suz.transpose()) +
                        b.sigma2_eps * Matrix::Identity(n, n);
    return ObservedMoments::from_conditional(b.szz, coef, cond);
}

} // namespace testutil
