#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "spatialident/mc.hpp"
#include "spatialident/models.hpp"

using namespace spatialident;
using namespace testutil;

namespace {

double rel_diff(const Matrix& a, const Matrix& b) {
    return (a - b).cwiseAbs().maxCoeff() / (1.0 + a.cwiseAbs().maxCoeff());
}

double all_blocks_rel_diff(const ObservedMoments& a, const ObservedMoments& b) {
    return std::max({rel_diff(a.var_z, b.var_z), rel_diff(a.cov_yz, b.cov_yz),
                     rel_diff(a.var_y, b.var_y), rel_diff(a.coef, b.coef),
                     rel_diff(a.var_y_given_z, b.var_y_given_z)});
}

} // namespace

TEST_CASE("joint and conditional routes agree for every family") {
    std::mt19937_64 rng(20240801);
    for (int n : {4, 6, 10}) {
        const ProximityMatrix w = random_graph(rng, n);
        const Matrix dist = random_distances(rng, n);
        std::vector<ModelSpec> specs;
        for (int k = 0; k < 4; ++k) {
            specs.emplace_back(random_car(rng));
            specs.emplace_back(random_leroux(rng, LerouxCross::Parsimonious, w));
            specs.emplace_back(random_leroux(rng, LerouxCross::NonParsimonious, w));
            specs.emplace_back(random_lmc(rng));
            specs.emplace_back(random_bivariate(rng, dist));
            specs.emplace_back(random_pars_matern(rng, dist));
        }
        for (const ModelSpec& s : specs) {
            const bool graph_family = std::holds_alternative<CarSPParams>(s) ||
                                      std::holds_alternative<LerouxParams>(s);
            const JointBlocks b = joint_blocks(s, graph_family ? w.w : dist);
            const ObservedMoments mj = route_joint(b);
            const ObservedMoments mc = route_conditional(b);
            INFO("family " << family_name(s) << ", n = " << n);
            REQUIRE(all_blocks_rel_diff(mj, mc) <= 1e-9);
        }
    }
}

TEST_CASE("CAR spectral moments match the brute-force precision inverse") {
    std::mt19937_64 rng(7);
    for (int n : {4, 6, 9, 12}) {
        for (int k = 0; k < 6; ++k) {
            const ProximityMatrix w = random_graph(rng, n, k % 2 == 0);
            const DegreeMatrix d = degree_matrix(w);
            const CarSPParams p = random_car(rng);
            const ObservedMoments fast = car_observed_moments(p, w, d);
            const ObservedMoments slow = car_observed_moments_bruteforce(p, w, d);
            REQUIRE(all_blocks_rel_diff(fast, slow) <= 1e-8);
        }
    }
}

TEST_CASE("CAR regression operator collapses to beta I when rho = 0") {
    std::mt19937_64 rng(11);
    const ProximityMatrix w = ring_graph(6);
    CarSPParams p = random_car(rng);
    p.rho = 0.0;
    const ObservedMoments m = car_observed_moments(p, w, degree_matrix(w));
    REQUIRE((m.coef - p.beta * Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("CAR joint precision has the documented block structure") {
    const ProximityMatrix w = ring_graph(5);
    const DegreeMatrix d = degree_matrix(w);
    CarSPParams p;
    p.tau_u = 2.0;
    p.tau_z = 0.5;
    p.phi_u = 0.3;
    p.phi_z = -0.4;
    p.rho = 0.25;
    const Matrix q = car_joint_precision(p, w, d);
    REQUIRE((q - q.transpose()).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((q.topLeftCorner(5, 5) - p.tau_u * (d.dense() - p.phi_u * w.w))
                .cwiseAbs()
                .maxCoeff() < 1e-14);
    REQUIRE((q.topRightCorner(5, 5) + p.rho * std::sqrt(p.tau_u * p.tau_z) * d.dense())
                .cwiseAbs()
                .maxCoeff() < 1e-14);
    REQUIRE(min_eigenvalue(q) > 0.0);
}

TEST_CASE("CAR positive-definiteness boundary is detected") {
    const ProximityMatrix w = ring_graph(6);
    const DegreeMatrix d = degree_matrix(w);
    CarSPParams p;
    p.phi_u = 0.9;
    p.phi_z = 0.9;
    p.rho = 0.5;  // (1 - 0.9)^2 = 0.01 < rho^2 at the top eigenvalue
    REQUIRE_THROWS_AS(car_observed_moments(p, w, d), NotPositiveDefiniteError);
    REQUIRE_THROWS_AS(car_observed_moments_bruteforce(p, w, d), NotPositiveDefiniteError);
}

TEST_CASE("Leroux spectral route matches the joint route") {
    std::mt19937_64 rng(23);
    const ProximityMatrix w = random_graph(rng, 7);
    const DegreeMatrix d = degree_matrix(w);
    for (LerouxCross cross : {LerouxCross::Parsimonious, LerouxCross::NonParsimonious}) {
        for (int k = 0; k < 8; ++k) {
            const LerouxParams p = random_leroux(rng, cross, w);
            const ObservedMoments a = leroux_observed_moments(p, w, d);
            const ObservedMoments b = leroux_observed_moments_joint(p, w, d);
            REQUIRE(all_blocks_rel_diff(a, b) <= 1e-9);
        }
    }
}

TEST_CASE("Leroux cross covariance outside the marginal envelope is rejected") {
    const ProximityMatrix w = ring_graph(6);
    const DegreeMatrix d = degree_matrix(w);
    LerouxParams p;
    p.cross = LerouxCross::NonParsimonious;
    p.rho = 1.0;
    p.lambda_uz = 0.0;  // flat cross spectrum
    p.lambda_u = 0.9;   // decaying marginal spectrum
    p.lambda_z = 0.9;
    REQUIRE_THROWS_AS(leroux_spectral_blocks(p, w, d), NotPositiveDefiniteError);
}

TEST_CASE("shared-range Matern with exponential smoothness matches the bivariate family") {
    std::mt19937_64 rng(31);
    const Matrix dist = random_distances(rng, 6);
    ParsMaternParams pm;
    pm.beta = 0.7;
    pm.sigma2_u = 1.3;
    pm.sigma2_z = 0.8;
    pm.rho = 0.4;
    pm.phi = 1.1;
    pm.nu_u = 0.5;
    pm.nu_z = 0.5;
    pm.sigma2_eps = 0.6;
    BivariateParams bv;
    bv.beta = pm.beta;
    bv.sigma2_u = pm.sigma2_u;
    bv.sigma2_z = pm.sigma2_z;
    bv.rho = pm.rho;
    bv.psi_u = bv.psi_z = bv.psi_uz = pm.phi;
    bv.family = CovFamily::Exponential;
    bv.sigma2_eps = pm.sigma2_eps;
    const ObservedMoments a = pars_matern_joint_moments(pm, dist);
    const ObservedMoments b = bivariate_joint_moments(bv, dist);
    REQUIRE(all_blocks_rel_diff(a, b) <= 1e-10);
}

TEST_CASE("pd_check separates definite and indefinite block pairs") {
    std::mt19937_64 rng(41);
    const Matrix dist = random_distances(rng, 5);
    BivariateParams p = random_bivariate(rng, dist);
    const BivariateBlocks good = bivariate_blocks(p, dist);
    const PdReport ok = pd_check(good.szz, good.suz, good.suu);
    REQUIRE(ok.pd);
    REQUIRE(ok.min_eig_zz > 0.0);
    REQUIRE(ok.min_eig_schur > 0.0);
    REQUIRE(std::isfinite(ok.condition_number));

    // A cross block dominating the marginals breaks the Schur complement.
    const PdReport bad = pd_check(good.szz, 10.0 * good.szz, good.szz);
    REQUIRE_FALSE(bad.pd);
}

TEST_CASE("parameter validation rejects out-of-domain values") {
    CarSPParams car;
    car.tau_u = -1.0;
    REQUIRE_THROWS_AS(car.validate(), DomainError);
    car = CarSPParams{};
    car.phi_z = 1.0;
    REQUIRE_THROWS_AS(car.validate(), DomainError);

    LerouxParams lx;
    lx.lambda_u = 1.0;
    REQUIRE_THROWS_AS(lx.validate(), DomainError);
    lx = LerouxParams{};
    lx.rho = 1.5;
    REQUIRE_THROWS_AS(lx.validate(), DomainError);

    LmcParams lmc;
    REQUIRE_THROWS_AS(lmc.validate(), DomainError);  // empty loadings
    lmc.a = {1.0};
    lmc.b = {0.5};
    lmc.phi = {-1.0};
    REQUIRE_THROWS_AS(lmc.validate(), DomainError);
    lmc.phi = {1.0};
    lmc.a = {0.0};
    REQUIRE_THROWS_AS(lmc.validate(), DomainError);

    BivariateParams bv;
    bv.psi_uz = 0.0;
    REQUIRE_THROWS_AS(bv.validate(), DomainError);

    ParsMaternParams pm;
    pm.nu_u = 0.0;
    REQUIRE_THROWS_AS(pm.validate(), DomainError);
}

TEST_CASE("distance matrix validation") {
    Matrix d = Matrix::Zero(3, 3);
    d(0, 1) = d(1, 0) = 1.0;
    d(0, 2) = d(2, 0) = 2.0;
    d(1, 2) = d(2, 1) = 1.5;
    REQUIRE_NOTHROW(validate_distance_matrix(d));
    Matrix bad = d;
    bad(1, 1) = 0.3;
    REQUIRE_THROWS_AS(validate_distance_matrix(bad), DomainError);
    bad = d;
    bad(0, 1) = -1.0;
    REQUIRE_THROWS_AS(validate_distance_matrix(bad), DomainError);
    bad = d;
    bad(0, 1) = 3.0;  // asymmetric
    REQUIRE_THROWS_AS(validate_distance_matrix(bad), DomainError);
}

TEST_CASE("moment_discrepancy is zero on identical moments and positive otherwise") {
    std::mt19937_64 rng(53);
    const ProximityMatrix w = ring_graph(5);
    const CarSPParams p = random_car(rng);
    const ObservedMoments m = car_observed_moments(p, w, degree_matrix(w));
    REQUIRE(moment_discrepancy(m, m) == 0.0);
    CarSPParams q = p;
    q.sigma2_eps += 0.5;
    const ObservedMoments m2 = car_observed_moments(q, w, degree_matrix(w));
    REQUIRE(moment_discrepancy(m, m2) > 1e-3);
}
