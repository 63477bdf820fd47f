// Acceptance gate: eight independently timed criteria, one pass/fail line
// each. Exit status is the number of failed criteria. Tolerances are pinned
// here on purpose; loosening them requires editing this file.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "spatialident/identify.hpp"
#include "spatialident/io.hpp"
#include "spatialident/mc.hpp"

using namespace spatialident;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int idx, const std::string& what, bool pass, double seconds,
            const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%.2fs%s%s)\n", pass ? "PASS" : "FAIL", idx,
                what.c_str(), seconds, detail.empty() ? "" : "; ", detail.c_str());
    if (!pass) ++failures;
}

void run_criterion(int idx, const std::string& what, double time_budget_s,
                   const std::function<bool(std::string&)>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool pass = false;
    try {
        pass = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > time_budget_s) {
        pass = false;
        detail += (detail.empty() ? "" : "; ") + std::string("time budget exceeded");
    }
    report(idx, what, pass, secs, detail);
}

double rel_diff(const Matrix& a, const Matrix& b) {
    return (a - b).cwiseAbs().maxCoeff() / (1.0 + a.cwiseAbs().maxCoeff());
}

double all_blocks_rel_diff(const ObservedMoments& a, const ObservedMoments& b) {
    return std::max({rel_diff(a.var_z, b.var_z), rel_diff(a.cov_yz, b.cov_yz),
                     rel_diff(a.var_y, b.var_y), rel_diff(a.coef, b.coef),
                     rel_diff(a.var_y_given_z, b.var_y_given_z)});
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(3);
    os << x;
    return os.str();
}

// Closed-form modified Bessel K at half-integer orders, the independent
// oracle for criterion 6.
double bessel_k_half_integer(double nu, double z) {
    const double base = std::sqrt(M_PI / (2.0 * z)) * std::exp(-z);
    if (nu == 0.5) return base;
    if (nu == 1.5) return base * (1.0 + 1.0 / z);
    if (nu == 2.5) return base * (1.0 + 3.0 / z + 3.0 / (z * z));
    throw DomainError("no closed form for this order");
}

bool criterion1(std::string& detail) {
    std::mt19937_64 rng(1001);
    double worst = 0.0;
    int count = 0;
    for (int n : {4, 6, 10}) {
        const ProximityMatrix w = random_graph(rng, n);
        const Matrix dist = random_distances(rng, n);
        for (int k = 0; k < 17; ++k) {
            std::vector<ModelSpec> specs{
                random_car(rng),
                random_leroux(rng, LerouxCross::Parsimonious, w),
                random_leroux(rng, LerouxCross::NonParsimonious, w),
                random_lmc(rng),
                random_bivariate(rng, dist),
                random_pars_matern(rng, dist),
            };
            for (const ModelSpec& s : specs) {
                const bool graph_family = std::holds_alternative<CarSPParams>(s) ||
                                          std::holds_alternative<LerouxParams>(s);
                const JointBlocks b = joint_blocks(s, graph_family ? w.w : dist);
                worst = std::max(worst, all_blocks_rel_diff(route_joint(b), route_conditional(b)));
                ++count;
            }
        }
    }
    detail = std::to_string(count) + " specs (51 per family), worst rel diff " + fmt(worst);
    return worst <= 1e-9;
}

bool criterion2(std::string& detail) {
    std::mt19937_64 rng(1002);
    double worst = 0.0;
    int count = 0;
    for (int n : {4, 6, 9, 12}) {
        for (int k = 0; k < 13; ++k) {
            const ProximityMatrix w = random_graph(rng, n, k % 2 == 0);
            const DegreeMatrix d = degree_matrix(w);
            const CarSPParams p = random_car(rng);
            worst = std::max(worst, all_blocks_rel_diff(car_observed_moments(p, w, d),
                                                        car_observed_moments_bruteforce(p, w, d)));
            ++count;
        }
    }
    detail = std::to_string(count) + " spec/graph pairs, worst rel diff " + fmt(worst);
    return worst <= 1e-8;
}

bool criterion3(std::string& detail) {
    std::mt19937_64 rng(1003);
    const ProximityMatrix ring = ring_graph(6);
    const ProximityMatrix k6 = complete_graph(6);
    const Matrix dist = random_distances(rng, 6);

    struct Case {
        std::string name;
        EquivalenceCertificate cert;
        Matrix g;
        double disc_tol;
    };
    std::vector<Case> cases;

    {
        CarSPParams p;
        p.beta = 0.5;
        p.tau_u = 1.2;
        p.tau_z = 0.9;
        p.phi_z = 0.3;
        p.rho = 0.35;
        p.sigma2_eps = 0.8;
        cases.push_back({"car_phi0", car_phi0_alternative(p, ring), ring.w, 1e-8});
    }
    {
        CarSPParams p;
        p.beta = 0.5;
        p.phi_u = 0.3;
        p.phi_z = 0.2;
        p.rho = 0.4;
        cases.push_back({"car_fullyconnected", car_fullyconnected_alternative(p, k6), k6.w, 1e-8});
    }
    {
        LerouxParams p;
        p.cross = LerouxCross::NonParsimonious;
        p.beta = 0.4;
        p.rho = 0.5;
        p.lambda_u = 0.4;
        p.lambda_z = p.lambda_uz = 0.3;
        cases.push_back(
            {"leroux_flex_equal_lambda", leroux_flex_equal_lambda_alternative(p, ring), ring.w, 1e-8});
    }
    {
        LerouxParams p;
        p.cross = LerouxCross::NonParsimonious;
        p.beta = 0.4;
        p.lambda_u = p.lambda_z = 0.4;
        cases.push_back({"leroux_rho0", leroux_rho0_alternative(p, ring), ring.w, 1e-8});
    }
    {
        LerouxParams p;
        p.cross = LerouxCross::Parsimonious;
        p.beta = 0.4;
        p.rho = 0.25;
        p.lambda_u = p.lambda_z = 0.3;
        cases.push_back({"leroux_pars", leroux_pars_alternative(p, ring), ring.w, 1e-8});
    }
    {
        LmcParams p;
        p.beta = 0.5;
        p.a = {1.0, -0.7};
        p.b = {0.4, 0.6};
        p.phi = {1.0, 2.0};
        cases.push_back({"lmc", lmc_alternative(p, dist), dist, 1e-12});
    }
    {
        BivariateParams p;
        p.beta = 0.6;
        cases.push_back({"bivariate_rho0", bivariate_rho0_alternative(p, dist), dist, 1e-8});
    }

    bool ok = true;
    std::ostringstream os;
    for (const Case& c : cases) {
        const Dataset ds = sample(c.cert.original, c.g, 100, 2024);
        const double dll =
            std::fabs(loglik(c.cert.original, c.g, ds) - loglik(c.cert.alternative, c.g, ds));
        const bool pass = c.cert.valid && c.cert.max_moment_discrepancy <= c.disc_tol &&
                          c.cert.beta_gap >= 0.1 - 1e-12 && dll <= 1e-6;
        if (!pass) {
            ok = false;
            os << c.name << " failed (disc " << c.cert.max_moment_discrepancy << ", gap "
               << c.cert.beta_gap << ", dll " << dll << "); ";
        }
    }
    detail = ok ? "7 constructions matched moments and likelihood with visible intercept gaps"
                : os.str();
    return ok;
}

bool criterion4(std::string& detail) {
    const fs::path out = fs::temp_directory_path() / "spatial_ident_acceptance_demo.csv";
    const std::string cmd = std::string(SPATIAL_IDENT_BIN) + " demo --out " + out.string();
    if (std::system(cmd.c_str()) != 0) {
        detail = "demo subcommand failed";
        return false;
    }
    std::ifstream in(out);
    std::string line;
    std::getline(in, line);  // header
    std::vector<std::pair<char, std::string>> expect{
        {'a', "violated"}, {'b', "violated"}, {'c', "satisfied"}, {'d', "satisfied"}};
    for (const auto& [label, want] : expect) {
        if (!std::getline(in, line) || line[0] != label ||
            line.find(want) == std::string::npos) {
            detail = std::string("unexpected row for graph ") + label + ": " + line;
            return false;
        }
    }
    detail = "a,b violated; c,d satisfied";
    return true;
}

bool criterion5(std::string& detail) {
    double worst = 0.0;
    for (int n = 4; n <= 12; ++n) {
        const ProximityMatrix w = complete_graph(n);
        const DegreeMatrix d = degree_matrix(w);
        const Vector ns = normalized_spectrum(w, d).values;  // ascending
        worst = std::max(worst, std::fabs(ns(n - 1) - 1.0));
        for (int i = 0; i < n - 1; ++i)
            worst = std::max(worst, std::fabs(ns(i) + 1.0 / (n - 1)));
        const SpectralDecomposition ls = laplacian_spectrum(w, d);
        worst = std::max(worst, std::fabs(ls.values(0)));
        const Vector v0 = ls.vectors.col(0);
        const Vector ones = Vector::Constant(n, 1.0 / std::sqrt(double(n)));
        worst = std::max(worst, std::min((v0 - ones).cwiseAbs().maxCoeff(),
                                         (v0 + ones).cwiseAbs().maxCoeff()));
    }
    detail = "complete graphs n=4..12, worst deviation " + fmt(worst);
    return worst <= 1e-10;
}

bool criterion6(std::string& detail) {
    double worst_rel = 0.0;
    for (double nu : {0.5, 1.5, 2.5}) {
        for (int i = 0; i <= 200; ++i) {
            const double z = 0.01 * std::pow(5000.0, i / 200.0);  // log-spaced [0.01, 50]
            const double ref = bessel_k_half_integer(nu, z);
            worst_rel = std::max(worst_rel, std::fabs(bessel_k(nu, z) - ref) / ref);
        }
    }
    if (worst_rel > 1e-10) {
        detail = "half-integer oracle rel error " + fmt(worst_rel);
        return false;
    }

    double worst_matern = 0.0;
    for (int i = 1; i <= 40; ++i) {
        const double w = 0.1 * i;
        worst_matern =
            std::max(worst_matern, std::fabs(matern(1.3, 0.5, w) - std::exp(-w / 1.3)));
    }
    if (worst_matern > 1e-10) {
        detail = "matern(nu=1/2) vs exponential diff " + fmt(worst_matern);
        return false;
    }

    // Structural identities on a 20x20 (order, argument) grid: positivity,
    // monotone growth in the order, and the three-term recurrence.
    for (int a = 1; a <= 20; ++a) {
        const double nu = 0.1 * a;
        for (int b = 1; b <= 20; ++b) {
            const double z = 0.25 * b;
            const double k0 = bessel_k(nu, z);
            const double k1 = bessel_k(nu + 1.0, z);
            const double km = bessel_k(std::fabs(nu - 1.0), z);
            if (!(k0 > 0.0) || !(k1 > k0)) {
                detail = "positivity/monotonicity failed at nu=" + fmt(nu) + ", z=" + fmt(z);
                return false;
            }
            const double recur = km + (2.0 * nu / z) * k0;
            if (std::fabs(k1 - recur) > 1e-8 * recur) {
                detail = "recurrence failed at nu=" + fmt(nu) + ", z=" + fmt(z);
                return false;
            }
        }
    }
    detail = "oracle rel " + fmt(worst_rel) + ", 400-point identity grid clean";
    return true;
}

bool criterion7(std::string& detail) {
    std::vector<double> distances;
    for (int j = 0; j < 9; ++j) distances.push_back(0.3 * (j + 1));
    double worst_ratio = 1.0;
    for (CovFamily f :
         {CovFamily::Exponential, CovFamily::Gaussian, CovFamily::PoweredExponential}) {
        const double shape = f == CovFamily::PoweredExponential ? 1.5 : 1.0;
        for (int kk = 2; kk <= 6; ++kk) {
            std::vector<double> ranges;
            for (int t = 0; t < kk; ++t) ranges.push_back(0.5 + 0.37 * t);
            const LinIndepVerdict v = k_linear_independence(f, ranges, distances, shape);
            worst_ratio = std::min(worst_ratio, v.sigma_min / v.sigma_max);
            if (!v.independent || v.sigma_min / v.sigma_max <= 1e-8) {
                detail = "smooth family lost full rank at K=" + std::to_string(kk);
                return false;
            }
        }
    }

    for (double alpha : {2.0, std::sqrt(2.0), M_PI / 2.0}) {
        const WaveCrossings wc = wave_crossings(alpha, 1.0, 10);
        if (wc.distances.size() < 10) {
            detail = "fewer than 10 wave crossings at alpha=" + fmt(alpha);
            return false;
        }
        for (double r : wc.residuals)
            if (std::fabs(r) > 1e-10) {
                detail = "wave crossing residual " + fmt(r) + " at alpha=" + fmt(alpha);
                return false;
            }
    }

    const LinIndepVerdict sph = k_linear_independence(
        CovFamily::Spherical, {4.0, 3.0, 2.0, 1.0}, {0.2, 0.4, 5.0, 6.0, 7.0});
    if (sph.independent) {
        detail = "spherical K=4 witness unexpectedly full rank";
        return false;
    }
    detail = "smooth designs full rank (worst sigma ratio " + fmt(worst_ratio) +
             "), 30 sign-change distances, spherical witness deficient";
    return true;
}

bool criterion8(std::string& detail) {
    CarSPParams truth;
    truth.beta = 0.5;
    truth.phi_u = 0.3;
    truth.phi_z = 0.2;
    truth.rho = 0.4;
    const Matrix g = ring_graph(6).w;
    const ModelSpec spec(truth);
    const Dataset ds = sample(spec, g, 200, 8008);
    const FitResult car = fit_mle(spec, g, ds, 8, 31, 2000);
    const double beta_hat = spec_beta(car.estimate);

    // Standard error from the profile-likelihood curvature at the optimum.
    const double h = 0.1;
    const std::vector<ProfilePoint> prof =
        profile_beta(car.estimate, g, ds, {beta_hat - h, beta_hat, beta_hat + h}, 2000);
    const double curv =
        -(prof[0].loglik - 2.0 * prof[1].loglik + prof[2].loglik) / (h * h);
    const double se = curv > 0.0 ? 1.0 / std::sqrt(curv) : 0.0;

    std::ostringstream os;
    os << "car dispersion " << fmt(car.start_dispersion) << ", |beta_hat - beta| "
       << fmt(std::fabs(beta_hat - truth.beta)) << ", se " << fmt(se);
    bool ok = true;
    if (car.start_dispersion > 0.05) ok = false;
    if (!(se > 0.0) || std::fabs(beta_hat - truth.beta) > 3.0 * se) ok = false;

    std::mt19937_64 rng(8009);
    const Matrix dist = random_distances(rng, 6);
    LmcParams lp;
    lp.beta = 0.5;
    lp.a = {1.0, -0.7};
    lp.b = {0.4, 0.6};
    lp.phi = {1.0, 2.0};
    const ModelSpec lspec(lp);
    const Dataset lds = sample(lspec, dist, 200, 8010);
    const FitResult lmc = fit_mle(lspec, dist, lds, 8, 37, 2000);
    os << "; lmc dispersion " << fmt(lmc.start_dispersion) << ", loglik spread "
       << fmt(lmc.loglik_spread);
    if (!(lmc.start_dispersion > 0.5)) ok = false;
    if (!(lmc.loglik_spread <= 1e-3)) ok = false;
    detail = os.str();
    return ok;
}

} // namespace

int main() {
    run_criterion(1, "joint and conditional moment routes agree to 1e-9", 30.0, criterion1);
    run_criterion(2, "CAR spectral moments match the brute-force inverse to 1e-8", 30.0,
                  criterion2);
    run_criterion(3, "all seven equivalence constructions certify with matching likelihoods",
                  120.0, criterion3);
    run_criterion(4, "demo table classifies the four reference graphs", 1.0, criterion4);
    run_criterion(5, "complete-graph spectra match closed forms to 1e-10", 10.0, criterion5);
    run_criterion(6, "Bessel K matches half-integer oracles and structural identities", 10.0,
                  criterion6);
    run_criterion(7, "linear-independence designs behave as predicted", 10.0, criterion7);
    run_criterion(8, "multi-start MLE: stable CAR intercept, scattered coregionalization ridge",
                  300.0, criterion8);
    if (failures == 0) std::printf("all 8 acceptance criteria passed\n");
    return failures;
}
