#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "agediff/semigroup.hpp"
#include "agediff/spectral.hpp"
#include "oracles.hpp"

#include <cmath>
#include <random>

using namespace agediff;

TEST_CASE("offspring matrix values for the scalar model") {
    const Scenario s1 = build_scenario(oracles::scalar_config(1.0, 200));
    const PropagatorCache c1 = build_propagators(s1);
    CHECK(assemble_Q(s1, c1, 0.0)(0, 0) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(assemble_Q(s1, c1, 1.0)(0, 0) ==
          doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-5));

    const Scenario s2 = build_scenario(oracles::scalar_config(2.0, 400));
    const PropagatorCache c2 = build_propagators(s2);
    CHECK(assemble_Q(s2, c2, 0.0)(0, 0) ==
          doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("offspring matrix is entrywise nonnegative and fades with lambda") {
    const Scenario s = build_scenario(oracles::diffusion_config(8, 50));
    const PropagatorCache c = build_propagators(s);
    double prev = std::numeric_limits<double>::infinity();
    for (const double lam : {0.0, 0.5, 1.0, 2.0}) {
        const Matrix Q = assemble_Q(s, c, lam);
        CHECK(Q.minCoeff() >= 0.0);
        const double r = spectral_radius(s, Q);
        CHECK(r < prev - 1e-10);
        prev = r;
    }
}

TEST_CASE("discount overflow saturates to an infinite radius, never NaN") {
    const Scenario s = build_scenario(oracles::scalar_config(2.0, 400));
    const PropagatorCache c = build_propagators(s);
    const Matrix Q = assemble_Q(s, c, -5000.0);
    CHECK_FALSE(Q.hasNaN());
    CHECK(std::isinf(spectral_radius(s, Q)));
}

TEST_CASE("power iteration on explicit matrices") {
    const Scenario s1 = build_scenario(oracles::scalar_config(1.0, 10));
    const PerronPair scalar = perron_pair(s1, Matrix::Constant(1, 1, 3.0));
    CHECK(scalar.radius == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(scalar.vec[0] == doctest::Approx(1.0).epsilon(1e-12));

    ScenarioConfig cfg = oracles::scalar_config(1.0, 10);
    cfg.space.n_cells = 2;
    const Scenario s2 = build_scenario(cfg);
    const PerronPair pair = perron_pair(s2, Matrix::Constant(2, 2, 1.0));
    CHECK(pair.radius == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(pair.vec[0] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(pair.vec[1] == doctest::Approx(0.5).epsilon(1e-10));

    CHECK(spectral_radius(s1, Matrix::Zero(1, 1)) == 0.0);
    CHECK_THROWS_AS(perron_pair(s2, Matrix::Zero(3, 3)), Error);
}

TEST_CASE("dual functional is normalized against the primal profile") {
    ScenarioConfig cfg = oracles::scalar_config(1.0, 10);
    cfg.space.n_cells = 2;
    const Scenario s = build_scenario(cfg);
    Matrix Q(2, 2);
    Q << 1.0, 0.5, 0.5, 1.0;
    const PerronPair pair = perron_pair(s, Q);
    const Vector dual = dual_eigenfunctional(s, Q, pair.vec);
    CHECK(s.pairing(dual, pair.vec) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("growth rate of the balanced model is exactly zero") {
    const Scenario s = build_scenario(oracles::scalar_config(1.0, 200));
    const PropagatorCache c = build_propagators(s);
    CHECK(find_lambda0(s, c) == 0.0);
}

TEST_CASE("growth rate matches the characteristic root") {
    SUBCASE("supercritical") {
        const Scenario s = build_scenario(oracles::scalar_config(2.0, 400));
        const PropagatorCache c = build_propagators(s);
        const double oracle = oracles::characteristic_root(2.0, 1.0, 2.0);
        CHECK(std::abs(find_lambda0(s, c) - oracle) <= 1e-3);
    }
    SUBCASE("subcritical") {
        const Scenario s = build_scenario(oracles::scalar_config(0.5, 400));
        const PropagatorCache c = build_propagators(s);
        const double oracle = oracles::characteristic_root(0.5, -2.0, -0.5);
        CHECK(std::abs(find_lambda0(s, c) - oracle) <= 2e-3);
    }
    SUBCASE("tolerance must be positive") {
        const Scenario s = build_scenario(oracles::scalar_config(1.0, 10));
        const PropagatorCache c = build_propagators(s);
        CHECK_THROWS_AS(find_lambda0(s, c, -1.0), Error);
    }
}

TEST_CASE("offspring radius keeps falling far beyond the root") {
    const Scenario s = build_scenario(oracles::scalar_config(2.0, 400));
    const PropagatorCache c = build_propagators(s);
    const double lam0 = find_lambda0(s, c);
    double prev = spectral_radius(s, assemble_Q(s, c, lam0));
    CHECK(prev == doctest::Approx(1.0).epsilon(1e-9));
    for (const double shift : {5.0, 10.0, 20.0}) {
        const double r = spectral_radius(s, assemble_Q(s, c, lam0 + shift));
        CHECK(r < prev - 1e-10);
        prev = r;
    }
    // the tail then decays only algebraically: small, but nowhere near zero
    CHECK(prev <= 0.15);
    CHECK(prev >= 1e-3);
}

TEST_CASE("discounted birth aggregate against closed forms") {
    const Scenario s1 = build_scenario(oracles::scalar_config(1.0, 200));
    const PropagatorCache c1 = build_propagators(s1);
    const Vector h1 = apply_H(s1, c1, 1.0, AgeDensity::constant(s1, 1.0));
    CHECK(std::abs(h1[0] - std::exp(-1.0)) <= 5e-3);

    const Scenario s2 = build_scenario(oracles::scalar_config(2.0, 400));
    const PropagatorCache c2 = build_propagators(s2);
    const double lam = oracles::characteristic_root(2.0, 1.0, 2.0);
    const Vector h2 = apply_H(s2, c2, lam, AgeDensity::constant(s2, 1.0));
    CHECK(std::abs(h2[0] - oracles::discounted_births_of_one(2.0, lam)) <=
          5e-3);
}

TEST_CASE("resolvent of the balanced model at lambda 1 is the constant 1") {
    const Scenario s = build_scenario(oracles::scalar_config(1.0, 200));
    const PropagatorCache c = build_propagators(s);
    const AgeDensity psi = resolvent(s, c, 1.0, AgeDensity::constant(s, 1.0));
    CHECK(oracles::weighted_gap(s, psi, AgeDensity::constant(s, 1.0)) <= 5e-3);
    // the discrete boundary identity is exact regardless of the grid
    const Vector beta = birth_functional(s, psi);
    CHECK(std::abs(psi.v[0][0] - beta[0]) <= 1e-12);
}

TEST_CASE("resolvent refuses lambda on the point spectrum") {
    const Scenario s = build_scenario(oracles::scalar_config(1.0, 200));
    const PropagatorCache c = build_propagators(s);
    CHECK_THROWS_WITH_AS(resolvent(s, c, 0.0, AgeDensity::constant(s, 1.0)),
                         doctest::Contains("refused"), Error);
    const Scenario s2 = build_scenario(oracles::scalar_config(2.0, 400));
    const PropagatorCache c2 = build_propagators(s2);
    const double lam0 = find_lambda0(s2, c2);
    CHECK_THROWS_AS(resolvent(s2, c2, lam0, AgeDensity::constant(s2, 1.0)),
                    Error);
}

TEST_CASE("domain residuals vanish for true resolvents and flag tampering") {
    std::mt19937 rng(31u);
    const auto probe = [&rng](const Scenario& s, double lambda) {
        const PropagatorCache c = build_propagators(s);
        const AgeDensity phi = oracles::random_density(s, rng);
        AgeDensity psi = resolvent(s, c, lambda, phi);
        const DomainCheck good = check_generator_domain(s, c, lambda, phi, psi);
        CHECK(good.mild_residual <= 1e-10);
        CHECK(good.boundary_residual <= 1e-10);

        AgeDensity tampered = psi;
        tampered.v[0].array() += 0.01;
        const DomainCheck bad0 =
            check_generator_domain(s, c, lambda, phi, tampered);
        CHECK(bad0.boundary_residual > 1e-4);

        tampered = psi;
        tampered.v[psi.nodes() / 2].array() += 0.01;
        const DomainCheck badm =
            check_generator_domain(s, c, lambda, phi, tampered);
        CHECK(badm.mild_residual > 1e-6);
    };
    probe(build_scenario(oracles::scalar_config(1.0, 200)), 1.0);
    probe(build_scenario(oracles::diffusion_config(8, 100)), 2.0);
}

TEST_CASE("resolvent identity holds to first order in the grid") {
    const double la = 1.0, mu = 2.0;
    const auto gap_at = [&](int n_age) {
        const Scenario s = build_scenario(oracles::scalar_config(1.0, n_age));
        const PropagatorCache c = build_propagators(s);
        std::mt19937 local(33u);
        const AgeDensity phi = oracles::random_density(s, local);
        const AgeDensity ra = resolvent(s, c, la, phi);
        const AgeDensity rb = resolvent(s, c, mu, phi);
        const AgeDensity comp = resolvent(s, c, la, rb);
        double g = 0.0;
        for (int j = 1; j <= s.age.n_age; ++j) {
            const Vector lhs = ra.v[j] - rb.v[j];
            const Vector rhs = (mu - la) * comp.v[j];
            g += s.weights[j] * s.state_norm(lhs - rhs);
        }
        return g / (1.0 + density_norm(s, ra) + density_norm(s, rb));
    };
    const double coarse = gap_at(200);
    const double fine = gap_at(400);
    CHECK(coarse <= 5e-2);
    CHECK(fine / coarse == doctest::Approx(0.5).epsilon(0.2));
}

TEST_CASE("spectral data of the supercritical scalar model") {
    const Scenario s = build_scenario(oracles::scalar_config(2.0, 400));
    const PropagatorCache c = build_propagators(s);
    const SpectralData data = compute_spectral_data(s, c);
    const double lam = oracles::characteristic_root(2.0, 1.0, 2.0);
    CHECK(std::abs(data.lambda0 - lam) <= 1e-3);
    CHECK(data.r_of_Q0 == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(data.omega_hat == doctest::Approx(0.0).epsilon(1e-13));
    CHECK(data.zeta[0] == doctest::Approx(1.0).epsilon(1e-10));
    const double denom_exact = oracles::projection_denominator(2.0, lam);
    CHECK(std::abs(data.denom - denom_exact) / denom_exact <= 1e-2);
}

TEST_CASE("spectral data of the neutral diffusion model") {
    const Scenario s = build_scenario(oracles::diffusion_config(16, 100));
    const PropagatorCache c = build_propagators(s);
    const SpectralData data = compute_spectral_data(s, c);
    CHECK(data.lambda0 == 0.0);
    CHECK(data.r_of_Q0 == doctest::Approx(1.0).epsilon(1e-9));
    // uniform coefficients: the Perron profile and its dual are flat
    CHECK((data.zeta - Vector::Constant(16, 1.0)).cwiseAbs().maxCoeff() <=
          1e-6);
    CHECK((data.zeta_dual - Vector::Constant(16, 1.0)).cwiseAbs().maxCoeff() <=
          1e-6);
    CHECK(s.pairing(data.zeta_dual, data.zeta) ==
          doctest::Approx(1.0).epsilon(1e-10));
    // denominator reduces to the first age moment int_0^1 a da
    CHECK(data.denom == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("projection coefficient against the closed form") {
    const Scenario s = build_scenario(oracles::scalar_config(2.0, 400));
    const PropagatorCache c = build_propagators(s);
    const SpectralData data = compute_spectral_data(s, c);
    const double lam = oracles::characteristic_root(2.0, 1.0, 2.0);
    const double expected = oracles::discounted_births_of_one(2.0, lam) /
                            oracles::projection_denominator(2.0, lam);
    const double coeff =
        projection_coefficient(s, c, data, AgeDensity::constant(s, 1.0));
    CHECK(std::abs(coeff - expected) / expected <= 1e-2);
}

TEST_CASE("projection is linear, positive on the cone, and idempotent") {
    const Scenario s = build_scenario(oracles::scalar_config(2.0, 400));
    const PropagatorCache c = build_propagators(s);
    const SpectralData data = compute_spectral_data(s, c);
    std::mt19937 rng(34u);
    for (int trial = 0; trial < 10; ++trial) {
        const AgeDensity phi = oracles::random_density(s, rng);
        const double coeff = projection_coefficient(s, c, data, phi);
        CHECK(coeff >= 0.0);
        AgeDensity twice_phi = phi;
        for (Vector& x : twice_phi.v) x *= 2.0;
        CHECK(projection_coefficient(s, c, data, twice_phi) ==
              doctest::Approx(2.0 * coeff).epsilon(1e-12));
        const AgeDensity once = spectral_projection(s, c, data, phi);
        const AgeDensity again = spectral_projection(s, c, data, once);
        CHECK(oracles::weighted_gap(s, again, once) <=
              1e-8 * (1.0 + density_norm(s, once)));
    }
    // the eigenprofile is reproduced with coefficient one
    const AgeDensity star = eigen_profile(s, c, data);
    CHECK(projection_coefficient(s, c, data, star) ==
          doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("eigenpair residuals certify the root and reject impostors") {
    const Scenario s = build_scenario(oracles::scalar_config(2.0, 400));
    const PropagatorCache c = build_propagators(s);
    const SpectralData data = compute_spectral_data(s, c);
    CHECK(verify_eigenpair(s, c, data.lambda0, data.zeta) <= 1e-8);
    CHECK(verify_eigenpair(s, c, data.lambda0 + 1.0, data.zeta) >= 1e-1);

    const Scenario s1 = build_scenario(oracles::scalar_config(1.0, 200));
    const PropagatorCache c1 = build_propagators(s1);
    CHECK(verify_eigenpair(s1, c1, 0.0, Vector::Constant(1, 1.0)) <= 1e-12);
    CHECK_THROWS_AS(verify_eigenpair(s1, c1, 0.0, Vector::Zero(1)), Error);
}

TEST_CASE("stability trichotomy over the three regimes") {
    const auto classify = [](double b) {
        const Scenario s = build_scenario(oracles::scalar_config(b, 400));
        const PropagatorCache c = build_propagators(s);
        return classify_stability(s, c);
    };
    const TrichotomyVerdict sub = classify(0.5);
    CHECK(sub.verdict == Stability::stable_exponential);
    CHECK(sub.r_of_Q0 == doctest::Approx(0.5).epsilon(1e-9));
    REQUIRE(sub.lambda0.has_value());
    CHECK(std::abs(*sub.lambda0 -
                   oracles::characteristic_root(0.5, -2.0, -0.5)) <= 2e-3);

    const TrichotomyVerdict neutral = classify(1.0);
    CHECK(neutral.verdict == Stability::stable_neutral);
    REQUIRE(neutral.lambda0.has_value());
    CHECK(*neutral.lambda0 == 0.0);

    const TrichotomyVerdict super = classify(2.0);
    CHECK(super.verdict == Stability::unstable);
    REQUIRE(super.lambda0.has_value());
    CHECK(std::abs(*super.lambda0 -
                   oracles::characteristic_root(2.0, 1.0, 2.0)) <= 1e-3);

    CHECK(std::string(to_string(Stability::stable_exponential)) ==
          "stable_exponential");
    CHECK(std::string(to_string(Stability::stable_neutral)) ==
          "stable_neutral");
    CHECK(std::string(to_string(Stability::unstable)) == "unstable");
}

TEST_CASE("a wide neutral band swallows the supercritical case") {
    const Scenario s = build_scenario(oracles::scalar_config(2.0, 100));
    const PropagatorCache c = build_propagators(s);
    const TrichotomyVerdict v = classify_stability(s, c, 2.0);
    CHECK(v.verdict == Stability::stable_neutral);
    REQUIRE(v.lambda0.has_value());
    CHECK(*v.lambda0 == 0.0);
}

TEST_CASE("rescaled supercritical orbits collapse onto the projection") {
    const Scenario s = build_scenario(oracles::scalar_config(2.0, 400));
    const PropagatorCache c = build_propagators(s);
    const SpectralData data = compute_spectral_data(s, c);
    const AegReport rep =
        aeg_report(s, c, data, AgeDensity::constant(s, 1.0), 6.0, 200);
    REQUIRE(rep.times.size() >= 3);
    CHECK(rep.times.front() == 0.0);
    CHECK(rep.times.back() == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(rep.residuals.back() < 1e-6 * rep.residuals.front());
    CHECK(rep.passed);
    CHECK(rep.epsilon > 0.0);
    CHECK(rep.lambda0 == data.lambda0);
}

TEST_CASE("orbits started on the growth mode never leave it") {
    const Scenario s = build_scenario(oracles::scalar_config(2.0, 400));
    const PropagatorCache c = build_propagators(s);
    const SpectralData data = compute_spectral_data(s, c);
    const AgeDensity star = eigen_profile(s, c, data);
    const AegReport rep = aeg_report(s, c, data, star, 2.0, 100);
    for (const double r : rep.residuals) CHECK(r <= 1e-8);
    CHECK(rep.converged_early);
    CHECK(rep.passed);
}

TEST_CASE("the rest of the spectrum grows strictly slower") {
    const Scenario s = build_scenario(oracles::scalar_config(2.0, 400));
    const PropagatorCache c = build_propagators(s);
    const SpectralData data = compute_spectral_data(s, c);
    const double sub = subdominant_growth(s, c, data, 3000, 600);
    CHECK(sub < data.lambda0 - 0.1);
}

TEST_CASE("nonlinear projection with zero reaction is the linear one") {
    const Scenario s = build_scenario(oracles::scalar_config(2.0, 400));
    const PropagatorCache c = build_propagators(s);
    const SpectralData data = compute_spectral_data(s, c);
    std::mt19937 rng(35u);
    const AgeDensity phi = oracles::random_density(s, rng);
    const NonlinearProjection proj = nonlinear_projection(
        s, c, data, NonlinearMortality::constant(s, 0.0), phi, 4.0);
    const AgeDensity lin = spectral_projection(s, c, data, phi);
    CHECK(oracles::sup_gap(proj.value, lin) == 0.0);
    CHECK(proj.tail_estimate == 0.0);
}

TEST_CASE("constant extra mortality rescales the nonlinear projection") {
    const Scenario s = build_scenario(oracles::scalar_config(2.0, 400));
    const PropagatorCache c = build_propagators(s);
    const SpectralData data = compute_spectral_data(s, c);
    const AgeDensity phi = AgeDensity::constant(s, 1.0);
    const double rate = 0.5, T = 4.0;
    const NonlinearProjection proj = nonlinear_projection(
        s, c, data, NonlinearMortality::constant(s, rate), phi, T);
    const AgeDensity lin = spectral_projection(s, c, data, phi);
    // the discounted reaction integral collapses to e^{-rate T}
    CHECK(oracles::weighted_gap(s, lin, proj.value, std::exp(-rate * T)) <=
          1e-2);
    // tail ~ e^{-lambda0 T} ||rate * u(T)|| / lambda0 with u(T) ~ e^{(lambda0-rate)T}
    CHECK(proj.tail_estimate >= 1e-3);
    CHECK(proj.tail_estimate <= 1e-1);
    CHECK(proj.T_trunc == T);
}

TEST_CASE("nonlinear projection needs a growing population") {
    const Scenario s = build_scenario(oracles::scalar_config(1.0, 100));
    const PropagatorCache c = build_propagators(s);
    const SpectralData data = compute_spectral_data(s, c);
    CHECK_THROWS_AS(
        nonlinear_projection(s, c, data,
                             NonlinearMortality::constant(s, 0.1),
                             AgeDensity::constant(s, 1.0), 2.0),
        Error);
}
