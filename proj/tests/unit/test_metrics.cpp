#include "catch_amalgamated.hpp"
#include "helpers.hpp"

using namespace dqa;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

IsingProblem pair(double j) { return IsingProblem("pair", {"a", "b"}, {0.0, 0.0}, std::map<Edge, double>{{{0, 1}, j}}); }

} // namespace

TEST_CASE("ground-state spaces") {
    const auto fm = ground_state_space(pair(-1.0));
    CHECK(fm.basis_states == std::vector<std::uint64_t>{0b00, 0b11});
    CHECK(fm.energy == -1.0);
    const auto afm = ground_state_space(pair(1.0));
    CHECK(afm.basis_states == std::vector<std::uint64_t>{0b01, 0b10});
    const auto tri = ground_state_space(generate_triangle(1, 1, 1));
    CHECK(tri.degeneracy() == 6);
    CHECK(tri.energy == -1.0);
}

TEST_CASE("ground-state fidelity") {
    const auto gs = ground_state_space(generate_triangle(1, 1, 1));
    CHECK_THAT(fidelity_gs(DensityMatrix::maximally_mixed(3), gs), WithinAbs(6.0 / 8.0, 1e-15));
    Vector v = Vector::Zero(8);
    for (auto b : gs.basis_states) v[static_cast<Eigen::Index>(b)] = 1.0;
    v.normalize();
    CHECK_THAT(fidelity_gs(StateVector(v), gs), WithinAbs(1.0, 1e-14));
    CHECK_THAT(fidelity_gs(StateVector(3), gs), WithinAbs(0.0, 1e-15));
    CHECK_THROWS_AS(fidelity_gs(StateVector(2), gs), SemanticError);
}

TEST_CASE("energy error normalization") {
    CHECK(energy_error(-1.0, -1.0, 0.0) == 0.0);
    CHECK(energy_error(0.0, -1.0, 0.0) == 1.0);
    CHECK_THAT(energy_error(-0.5, -1.0, 0.0), WithinAbs(0.5, 1e-15));
    CHECK_THROWS_AS(energy_error(0.0, 1.0, 1.0), DomainError);
    // |-...-> has zero Z expectation, so fields-free problems have E_mix = 0
    CHECK_THAT(mixed_energy(generate_spin_chain(6, 3)), WithinAbs(0.0, 1e-12));
    CHECK_THAT(mixed_energy(generate_sparse_network(7, 3, 3, 2, 1)), WithinAbs(0.0, 1e-12));
}

TEST_CASE("diagonal energies match the dense Hamiltonian") {
    const auto prob = generate_sparse_network(7, 3, 3, 2, 4);
    const auto terms = build_problem_terms(prob);
    const auto e = diagonal_energies(terms, 7);
    const Matrix h = oracle::hamiltonian(terms, 7, 1.0);
    for (Eigen::Index b = 0; b < 128; ++b) CHECK_THAT(e[static_cast<std::size_t>(b)], WithinAbs(h(b, b).real(), 1e-12));
}

TEST_CASE("Lie norm conventions") {
    const TermList x{PauliTerm(1.0, Axis::X, {0}, ScheduleTag::Static)};
    CHECK(lie_norm(x, 1, 0.5, NormConvention::Spectral) == 1.0);
    CHECK(lie_norm(x, 1, 0.5, NormConvention::TwiceSpectral) == 2.0);
    CHECK(lie_norm(x, 1, 0.5, NormConvention::Frobenius) == 1.0);
    CHECK(norm_convention_from_string(to_string(NormConvention::TwiceSpectral)) == NormConvention::TwiceSpectral);
    CHECK_THROWS_AS(norm_convention_from_string("nuclear"), ConfigError);
}

TEST_CASE("spectral norm matches the dense singular value") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 6; ++trial) {
        const auto prob = generate_sparse_network(6, 3, 3, 2, static_cast<std::uint64_t>(trial));
        const auto p = split_edges(prob, std::vector<std::size_t>{0, 0, 0, 1, 1, 1});
        for (double s : {0.0, 0.3, 1.0}) {
            for (const TermList *terms : {&p.local_terms, &p.nonlocal_terms}) {
                const Matrix h = oracle::hamiltonian(*terms, p.size(), s);
                Eigen::JacobiSVD<Matrix> svd(h);
                const double ref = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
                CHECK_THAT(spectral_norm(*terms, p.size(), s), WithinAbs(ref, 1e-10));
            }
        }
    }
}

TEST_CASE("calibration picks the convention giving the reference step") {
    const auto cal = calibrate_lie_norm();
    CHECK(cal.matched);
    CHECK(cal.selected == NormConvention::Frobenius);
    const auto toy = split_edges(generate_spin_chain(4, 2), std::vector<std::size_t>{0, 0, 1, 1});
    CHECK_THAT(convergence_step(toy, 40, default_norm_convention()), WithinRel(0.5, 0.05));
}

TEST_CASE("Trotter bound series") {
    const auto toy = split_edges(generate_spin_chain(4, 2), std::vector<std::size_t>{0, 0, 1, 1});
    const auto c = default_norm_convention();
    SECTION("small steps follow the leading term") {
        const double dt_m = convergence_step(toy, 400, c);
        const std::size_t m = 400;
        const double t_f = dt_m / 10.0 * m;
        const auto r = trotter_bound(toy, t_f, m, c);
        REQUIRE(r.convergent);
        CHECK_THAT(*r.series, WithinRel(r.ratio * r.ratio, 0.10));
        CHECK(r.heq_distance.has_value());
    }
    SECTION("steps at or beyond the radius diverge") {
        const auto r = trotter_bound(toy, 40.0, 40, c);
        CHECK(r.ratio >= 1.0);
        CHECK_FALSE(r.convergent);
        CHECK_FALSE(r.series.has_value());
        CHECK(bound_to_json(r).value("divergence", false));
        CHECK(bound_to_json(r)["series"].is_null());
    }
    CHECK_THROWS_AS(trotter_bound(toy, 0.0, 10, c), DomainError);
    CHECK_THROWS_AS(convergence_step(toy, 0, c), DomainError);
}

TEST_CASE("identity partition has no nonlocal constraint") {
    const auto p = identity_partition(generate_triangle(1, 1, 1));
    std::vector<StepNorms> norms;
    const double dt_m = convergence_step(p, 8, NormConvention::Frobenius, &norms, 4.0);
    CHECK(norms.size() == 8);
    for (const auto &n : norms) CHECK(n.nonlocal == 0.0);
    CHECK(std::isfinite(dt_m));
    CHECK_THAT(norms.back().t, WithinAbs(3.5, 1e-15));
}

TEST_CASE("log negativity") {
    CHECK(log_negativity(1e-3) == Catch::Approx(3.0));
    CHECK(std::isinf(log_negativity(0.0)));
}
