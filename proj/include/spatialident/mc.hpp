#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "spatialident/forge.hpp"
#include "spatialident/models.hpp"

namespace spatialident {

/// Evaluates the observable moment map for any family. CAR and Leroux specs
/// interpret the matrix as a proximity matrix; the geostatistical families
/// interpret it as a distance matrix.
inline ObservedMoments observed_moments(const ModelSpec& spec, const Matrix& g) {
    return std::visit(
        [&](const auto& p) -> ObservedMoments {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, CarSPParams>) {
                const ProximityMatrix w = make_proximity(g);
                return car_observed_moments(p, w, degree_matrix(w));
            } else if constexpr (std::is_same_v<T, LerouxParams>) {
                const ProximityMatrix w = make_proximity(g);
                return leroux_observed_moments(p, w, degree_matrix(w));
            } else if constexpr (std::is_same_v<T, LmcParams>) {
                return lmc_joint_moments(p, g);
            } else if constexpr (std::is_same_v<T, BivariateParams>) {
                return bivariate_joint_moments(p, g);
            } else {
                return pars_matern_joint_moments(p, g);
            }
        },
        spec);
}

inline std::string family_name(const ModelSpec& spec) {
    return std::visit(
        [](const auto& p) -> std::string {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, CarSPParams>) return "car";
            else if constexpr (std::is_same_v<T, LerouxParams>) return "leroux";
            else if constexpr (std::is_same_v<T, LmcParams>) return "lmc";
            else if constexpr (std::is_same_v<T, BivariateParams>) return "bivariate";
            else return "pars_matern";
        },
        spec);
}

/// r independent replicates of the observable pair, one row per replicate.
struct Dataset {
    Matrix y;  // r x n
    Matrix z;  // r x n
    std::uint64_t seed = 0;

    int replicates() const { return static_cast<int>(y.rows()); }
    int size() const { return static_cast<int>(y.cols()); }
};

/// Draws (Y, Z) jointly from the model-implied 2n x 2n covariance via its
/// Cholesky factor; deterministic given the seed.
inline Dataset sample(const ModelSpec& spec, const Matrix& g, int r, std::uint64_t seed) {
    if (r < 1) throw DomainError("need at least one replicate");
    const ObservedMoments m = observed_moments(spec, g);
    const Matrix joint = m.joint_yz();
    Eigen::LLT<Matrix> llt(joint);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefiniteError("observable covariance is not positive definite");
    const Matrix l = llt.matrixL();
    const int n = m.size();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Dataset ds;
    ds.seed = seed;
    ds.y.resize(r, n);
    ds.z.resize(r, n);
    Vector eps(2 * n);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < 2 * n; ++j) eps(j) = gauss(rng);
        const Vector x = l * eps;
        ds.y.row(i) = x.head(n).transpose();
        ds.z.row(i) = x.tail(n).transpose();
    }
    return ds;
}

/// Exact Gaussian log-likelihood of the stacked observations under the
/// family's moment map.
inline double loglik(const ModelSpec& spec, const Matrix& g, const Dataset& data) {
    const ObservedMoments m = observed_moments(spec, g);
    const Matrix joint = m.joint_yz();
    Eigen::LLT<Matrix> llt(joint);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefiniteError("observable covariance is not positive definite");
    const int n = m.size();
    const int r = data.replicates();
    if (data.size() != n) throw DomainError("dataset dimension does not match the graph");
    double logdet = 0.0;
    const Matrix l = llt.matrixL();
    for (int i = 0; i < 2 * n; ++i) logdet += 2.0 * std::log(l(i, i));
    Matrix x(2 * n, r);
    x.topRows(n) = data.y.transpose();
    x.bottomRows(n) = data.z.transpose();
    const Matrix solved = llt.solve(x);
    const double quad = (x.array() * solved.array()).sum();
    constexpr double log2pi = 1.8378770664093454836;
    return -0.5 * (r * 2.0 * n * log2pi + r * logdet + quad);
}

namespace detail {

inline double logit_inv(double t) { return 1.0 / (1.0 + std::exp(-t)); }
inline double logit(double l) { return std::log(l / (1.0 - l)); }

// Transformed (unconstrained) coordinates per family. The returned codec
// freezes every structural field (graph family, LMC loadings and ranges,
// known Matern smoothness) at the prototype's values.
struct Codec {
    int dim = 0;
    std::function<Vector(const ModelSpec&)> pack;
    std::function<ModelSpec(const Vector&)> unpack;
};

inline double clamp_corr(double x) { return std::max(-0.999999, std::min(0.999999, x)); }
inline double clamp_unit(double x) { return std::max(1e-9, std::min(1.0 - 1e-9, x)); }

inline Codec make_codec(const ModelSpec& prototype) {
    Codec c;
    if (std::holds_alternative<CarSPParams>(prototype)) {
        c.dim = 7;
        c.pack = [](const ModelSpec& s) {
            const auto& p = std::get<CarSPParams>(s);
            Vector t(7);
            t << p.beta, std::log(p.tau_u), std::log(p.tau_z), std::atanh(clamp_corr(p.phi_u)),
                std::atanh(clamp_corr(p.phi_z)), std::atanh(clamp_corr(p.rho)),
                std::log(p.sigma2_eps);
            return t;
        };
        c.unpack = [prototype](const Vector& t) {
            CarSPParams p = std::get<CarSPParams>(prototype);
            p.beta = t(0);
            p.tau_u = std::exp(t(1));
            p.tau_z = std::exp(t(2));
            p.phi_u = std::tanh(t(3));
            p.phi_z = std::tanh(t(4));
            p.rho = std::tanh(t(5));
            p.sigma2_eps = std::exp(t(6));
            return ModelSpec(p);
        };
    } else if (std::holds_alternative<LerouxParams>(prototype)) {
        const bool flex =
            std::get<LerouxParams>(prototype).cross == LerouxCross::NonParsimonious;
        c.dim = flex ? 8 : 7;
        c.pack = [flex](const ModelSpec& s) {
            const auto& p = std::get<LerouxParams>(s);
            Vector t(flex ? 8 : 7);
            t.head(7) << p.beta, std::log(p.sigma2_u), std::log(p.sigma2_z),
                logit(clamp_unit(p.lambda_u)), logit(clamp_unit(p.lambda_z)),
                std::atanh(clamp_corr(p.rho)), std::log(p.sigma2_eps);
            if (flex) t(7) = logit(clamp_unit(p.lambda_uz));
            return t;
        };
        c.unpack = [prototype, flex](const Vector& t) {
            LerouxParams p = std::get<LerouxParams>(prototype);
            p.beta = t(0);
            p.sigma2_u = std::exp(t(1));
            p.sigma2_z = std::exp(t(2));
            p.lambda_u = logit_inv(t(3));
            p.lambda_z = logit_inv(t(4));
            p.rho = std::tanh(t(5));
            p.sigma2_eps = std::exp(t(6));
            if (flex) p.lambda_uz = logit_inv(t(7));
            return ModelSpec(p);
        };
    } else if (std::holds_alternative<LmcParams>(prototype)) {
        const int terms = std::get<LmcParams>(prototype).num_terms();
        c.dim = 1 + terms;
        c.pack = [terms](const ModelSpec& s) {
            const auto& p = std::get<LmcParams>(s);
            Vector t(1 + terms);
            t(0) = p.beta;
            for (int i = 0; i < terms; ++i) t(1 + i) = p.b[i];
            return t;
        };
        c.unpack = [prototype, terms](const Vector& t) {
            LmcParams p = std::get<LmcParams>(prototype);
            p.beta = t(0);
            for (int i = 0; i < terms; ++i) p.b[i] = t(1 + i);
            return ModelSpec(p);
        };
    } else if (std::holds_alternative<BivariateParams>(prototype)) {
        c.dim = 8;
        c.pack = [](const ModelSpec& s) {
            const auto& p = std::get<BivariateParams>(s);
            Vector t(8);
            t << p.beta, std::log(p.sigma2_u), std::log(p.sigma2_z),
                std::atanh(clamp_corr(p.rho)), std::log(p.psi_u), std::log(p.psi_z),
                std::log(p.psi_uz), std::log(p.sigma2_eps);
            return t;
        };
        c.unpack = [prototype](const Vector& t) {
            BivariateParams p = std::get<BivariateParams>(prototype);
            p.beta = t(0);
            p.sigma2_u = std::exp(t(1));
            p.sigma2_z = std::exp(t(2));
            p.rho = std::tanh(t(3));
            p.psi_u = std::exp(t(4));
            p.psi_z = std::exp(t(5));
            p.psi_uz = std::exp(t(6));
            p.sigma2_eps = std::exp(t(7));
            return ModelSpec(p);
        };
    } else {
        c.dim = 6;
        c.pack = [](const ModelSpec& s) {
            const auto& p = std::get<ParsMaternParams>(s);
            Vector t(6);
            t << p.beta, std::log(p.sigma2_u), std::log(p.sigma2_z),
                std::atanh(clamp_corr(p.rho)), std::log(p.phi), std::log(p.sigma2_eps);
            return t;
        };
        c.unpack = [prototype](const Vector& t) {
            ParsMaternParams p = std::get<ParsMaternParams>(prototype);
            p.beta = t(0);
            p.sigma2_u = std::exp(t(1));
            p.sigma2_z = std::exp(t(2));
            p.rho = std::tanh(t(3));
            p.phi = std::exp(t(4));
            p.sigma2_eps = std::exp(t(5));
            return ModelSpec(p);
        };
    }
    return c;
}

/// Nelder-Mead simplex minimization; returns the best point found. The
/// objective must be finite-valued (callers wrap failures into a penalty).
inline Vector nelder_mead(const std::function<double(const Vector&)>& f, Vector start,
                          double init_step, int max_iter, double tol, double* best_value) {
    const int n = static_cast<int>(start.size());
    std::vector<Vector> simplex(n + 1, start);
    std::vector<double> val(n + 1);
    for (int i = 0; i < n; ++i) simplex[i + 1](i) += init_step;
    for (int i = 0; i <= n; ++i) val[i] = f(simplex[i]);

    const auto order = [&] {
        std::vector<int> idx(n + 1);
        for (int i = 0; i <= n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return val[a] < val[b]; });
        std::vector<Vector> s2(n + 1);
        std::vector<double> v2(n + 1);
        for (int i = 0; i <= n; ++i) {
            s2[i] = simplex[idx[i]];
            v2[i] = val[idx[i]];
        }
        simplex.swap(s2);
        val.swap(v2);
    };
    order();
    for (int it = 0; it < max_iter; ++it) {
        if (std::fabs(val[n] - val[0]) <= tol * (1.0 + std::fabs(val[0]))) break;
        Vector centroid = Vector::Zero(n);
        for (int i = 0; i < n; ++i) centroid += simplex[i];
        centroid /= n;
        const Vector refl = centroid + (centroid - simplex[n]);
        const double fr = f(refl);
        if (fr < val[0]) {
            const Vector exp_pt = centroid + 2.0 * (centroid - simplex[n]);
            const double fe = f(exp_pt);
            if (fe < fr) {
                simplex[n] = exp_pt;
                val[n] = fe;
            } else {
                simplex[n] = refl;
                val[n] = fr;
            }
        } else if (fr < val[n - 1]) {
            simplex[n] = refl;
            val[n] = fr;
        } else {
            const Vector con = centroid + 0.5 * (simplex[n] - centroid);
            const double fc = f(con);
            if (fc < val[n]) {
                simplex[n] = con;
                val[n] = fc;
            } else {
                for (int i = 1; i <= n; ++i) {
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0]);
                    val[i] = f(simplex[i]);
                }
            }
        }
        order();
    }
    *best_value = val[0];
    return simplex[0];
}

inline int worker_cap() {
    if (const char* env = std::getenv("SPATIAL_IDENT_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

} // namespace detail

struct StartOutcome {
    ModelSpec estimate;
    double loglik = 0.0;
    bool converged = false;
};

/// Multi-start maximum-likelihood fit. Start 0 is the prototype itself;
/// subsequent starts perturb the transformed coordinates with a seeded RNG.
/// Structural fields are frozen at the prototype's values (for the
/// coregionalization family only the intercept and confounder loadings are
/// free, matching the regime where the flat ridge is the point of interest).
struct FitResult {
    std::string family;
    ModelSpec estimate;
    double loglik = 0.0;
    bool converged = false;
    int n_starts = 0;
    double start_dispersion = 0.0;  // max pairwise |beta| gap among converged starts
    double loglik_spread = 0.0;     // max - min loglik among converged starts
    std::vector<StartOutcome> starts;
};

inline FitResult fit_mle(const ModelSpec& prototype, const Matrix& g, const Dataset& data,
                         int n_starts, std::uint64_t seed, int max_iter = 500) {
    if (n_starts < 1) throw DomainError("need at least one optimizer start");
    const detail::Codec codec = detail::make_codec(prototype);
    const auto objective = [&](const Vector& t) -> double {
        try {
            const ModelSpec s = codec.unpack(t);
            const double ll = loglik(s, g, data);
            if (!std::isfinite(ll)) return 1e10;
            return -ll;
        } catch (const Error&) {
            return 1e10;
        }
    };

    const Vector base = codec.pack(prototype);
    std::vector<Vector> inits(n_starts, base);
    {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (int s = 1; s < n_starts; ++s) {
            // Best-of-k initialization: several candidate perturbations per
            // start, keeping the one with the best objective so the local
            // search rarely begins in a clearly inferior basin.
            double best_val = std::numeric_limits<double>::infinity();
            for (int cand = 0; cand < 8; ++cand) {
                Vector t = base;
                for (int i = 0; i < codec.dim; ++i) t(i) += unif(rng);
                t(0) += 1.5 * unif(rng);  // extra spread on the intercept
                // Pull an infeasible candidate back toward the prototype so
                // the optimizer never begins on the flat penalty plateau.
                for (int tries = 0; tries < 50 && objective(t) >= 1e9; ++tries)
                    t = base + 0.7 * (t - base);
                const double v = objective(t);
                if (v < best_val) {
                    best_val = v;
                    inits[s] = t;
                }
            }
        }
    }

    std::vector<StartOutcome> outcomes(n_starts);
    const auto run_start = [&](int s) {
        double v = 0.0;
        Vector t = inits[s];
        // Successive restarts with shrinking simplexes; each restart rebuilds
        // the simplex around the incumbent, escaping degenerate collapses.
        // The schedule runs twice because a collapse can survive one round.
        for (int round = 0; round < 2; ++round)
            for (const double step : {0.5, 0.25, 0.1, 0.05, 0.02})
                t = detail::nelder_mead(objective, t, step, max_iter, 1e-12, &v);
        // Escape probes: a wide simplex around the incumbent can step over a
        // shallow local basin; keep probing while it strictly improves.
        for (const double radius : {1.0, 2.0, 4.0}) {
            double pv = 0.0;
            const Vector cand = detail::nelder_mead(objective, t, radius, max_iter, 1e-12, &pv);
            if (pv >= v - 1e-8 * (1.0 + std::fabs(v))) continue;
            t = cand;
            for (const double step : {0.1, 0.02})
                t = detail::nelder_mead(objective, t, step, max_iter, 1e-12, &v);
        }
        StartOutcome out;
        out.converged = v < 1e9;
        out.loglik = -v;
        out.estimate = codec.unpack(t);
        outcomes[s] = out;
    };
    const int cap = std::min(detail::worker_cap(), n_starts);
    if (cap <= 1) {
        for (int s = 0; s < n_starts; ++s) run_start(s);
    } else {
        for (int chunk = 0; chunk < n_starts; chunk += cap) {
            std::vector<std::thread> pool;
            for (int s = chunk; s < std::min(chunk + cap, n_starts); ++s)
                pool.emplace_back(run_start, s);
            for (auto& th : pool) th.join();
        }
    }

    FitResult fr;
    fr.family = family_name(prototype);
    fr.n_starts = n_starts;
    fr.starts = outcomes;
    double best = -std::numeric_limits<double>::infinity();
    double worst_ll = std::numeric_limits<double>::infinity();
    bool any = false;
    std::vector<double> betas;
    for (const auto& out : outcomes) {
        if (!out.converged) continue;
        any = true;
        betas.push_back(spec_beta(out.estimate));
        worst_ll = std::min(worst_ll, out.loglik);
        if (out.loglik > best) {
            best = out.loglik;
            fr.estimate = out.estimate;
            fr.loglik = out.loglik;
        }
    }
    if (!any) throw AllStartsFailedError("no optimizer start converged");
    fr.converged = true;
    for (std::size_t i = 0; i < betas.size(); ++i)
        for (std::size_t j = i + 1; j < betas.size(); ++j)
            fr.start_dispersion = std::max(fr.start_dispersion, std::fabs(betas[i] - betas[j]));
    fr.loglik_spread = fr.loglik - worst_ll;
    return fr;
}

struct ProfilePoint {
    double beta = 0.0;
    double loglik = 0.0;
    bool converged = false;
};

/// Profile likelihood over the intercept: for each grid value the remaining
/// parameters are maximized, warm-starting each point at the previous
/// solution.
inline std::vector<ProfilePoint> profile_beta(const ModelSpec& prototype, const Matrix& g,
                                              const Dataset& data,
                                              const std::vector<double>& beta_grid,
                                              int max_iter = 500) {
    if (beta_grid.empty()) throw DomainError("profile grid must be nonempty");
    const detail::Codec codec = detail::make_codec(prototype);
    std::vector<ProfilePoint> out;
    Vector warm = codec.pack(prototype);
    for (const double beta : beta_grid) {
        const auto objective = [&](const Vector& t) -> double {
            Vector full = t;
            full(0) = beta;
            try {
                const double ll = loglik(codec.unpack(full), g, data);
                return std::isfinite(ll) ? -ll : 1e10;
            } catch (const Error&) {
                return 1e10;
            }
        };
        warm(0) = beta;
        double v = 0.0;
        for (const double step : {0.2, 0.05})
            warm = detail::nelder_mead(objective, warm, step, max_iter, 1e-12, &v);
        warm(0) = beta;
        out.push_back({beta, -v, v < 1e9});
    }
    return out;
}

} // namespace spatialident
