#include "catch_amalgamated.hpp"
#include "helpers.hpp"

using namespace dqa;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Partition toy() { return split_edges(generate_spin_chain(4, 2), std::vector<std::size_t>{0, 0, 1, 1}); }

/// Closed form of the fault branch: CNOT followed by a uniform twirl over
/// {I, X_t, Z_c, Z_c X_t}.
Matrix theta_oracle(const Matrix &rho, std::size_t n, std::size_t c, std::size_t t) {
    const Matrix u = oracle::cnot(n, c, t);
    const Matrix after = u * rho * u.adjoint();
    const Matrix id = Matrix::Identity(after.rows(), after.cols());
    const Matrix xt = oracle::on_qubits(n, {{t, oracle::pauli('X')}});
    const Matrix zc = oracle::on_qubits(n, {{c, oracle::pauli('Z')}});
    Matrix out = Matrix::Zero(after.rows(), after.cols());
    for (const Matrix &e : {id, xt, zc, Matrix(zc * xt)}) out += e * after * e.adjoint();
    return out / 4.0;
}

} // namespace

TEST_CASE("Bell resource parametrizations") {
    const auto r = BellResource::from_fidelity(0.85);
    CHECK_THAT(r.x(), WithinAbs(0.8, 1e-15));
    CHECK_THAT(r.delta(), WithinAbs(0.15, 1e-15));
    CHECK_THAT(BellResource::from_infidelity(0.15).x(), WithinAbs(0.8, 1e-15));
    CHECK(BellResource::from_weight(0.0).fidelity() == 0.25);
    CHECK_THROWS_AS(BellResource::from_fidelity(0.2), DomainError);
    CHECK_THROWS_AS(BellResource::from_weight(1.5), DomainError);
    CHECK_THROWS_AS(BellResource::from_infidelity(0.8), DomainError);

    const Matrix rho = BellResource::from_weight(0.9).density().matrix();
    CHECK_THAT(rho.trace().real(), WithinAbs(1.0, 1e-15));
    CHECK(oracle::distance(rho, rho.adjoint()) < 1e-15);
    // Werner pair as a Bell mixture: Phi+ with F, the rest with (1 - F) / 3 each
    const double f = 0.9 + 0.1 / 4.0;
    Matrix mix = Matrix::Zero(4, 4);
    for (auto b : {BellState::PhiPlus, BellState::PhiMinus, BellState::PsiPlus, BellState::PsiMinus}) {
        const Vector v = bell_state(b).amplitudes();
        mix += (b == BellState::PhiPlus ? f : (1.0 - f) / 3.0) * v * v.adjoint();
    }
    CHECK(oracle::distance(rho, mix) < 1e-15);
}

TEST_CASE("Bell states are Paulis on b applied to Phi+") {
    const Vector phi = bell_state(BellState::PhiPlus).amplitudes();
    const Matrix zb = oracle::on_qubits(2, {{1, oracle::pauli('Z')}});
    const Matrix xb = oracle::on_qubits(2, {{1, oracle::pauli('X')}});
    CHECK(oracle::fidelity(zb * phi, bell_state(BellState::PhiMinus).amplitudes()) > 1 - 1e-15);
    CHECK(oracle::fidelity(xb * phi, bell_state(BellState::PsiPlus).amplitudes()) > 1 - 1e-15);
    CHECK(oracle::fidelity(xb * zb * phi, bell_state(BellState::PsiMinus).amplitudes()) > 1 - 1e-15);
}

TEST_CASE("DCNOT limits") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 4; ++trial) {
        const Matrix rho = oracle::random_density(3, rng);
        const std::size_t c = static_cast<std::size_t>(trial % 3), t = (c + 1 + trial / 2) % 3;
        const Matrix u = oracle::cnot(3, c, t);
        const auto perfect = dcnot_channel(DensityMatrix(rho), c, t, BellResource::from_weight(1.0));
        CHECK(oracle::distance(perfect.matrix(), u * rho * u.adjoint()) < 1e-13);
        const auto fault = theta_channel(DensityMatrix(rho), c, t);
        CHECK(oracle::distance(fault.matrix(), theta_oracle(rho, 3, c, t)) < 1e-13);
        CHECK_THAT(fault.matrix().trace().real(), WithinAbs(1.0, 1e-13));
        CHECK(oracle::distance(fault.matrix(), fault.matrix().adjoint()) < 1e-14);
    }
}

TEST_CASE("DCNOT is the Werner mixture of its limits") {
    std::mt19937_64 rng(6);
    const Matrix rho = oracle::random_density(3, rng);
    const Matrix u = oracle::cnot(3, 2, 0);
    for (double x : {0.2, 0.9}) {
        const auto out = dcnot_channel(DensityMatrix(rho), 2, 0, BellResource::from_weight(x));
        const Matrix expect = x * u * rho * u.adjoint() + (1.0 - x) * theta_oracle(rho, 3, 2, 0);
        CHECK(oracle::distance(out.matrix(), expect) < 1e-13);
    }
}

TEST_CASE("DCNOT is a quantum channel") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix rho = oracle::random_density(3, rng);
        const auto out = dcnot_channel(DensityMatrix(rho), 0, 1, BellResource::from_weight(0.37 * trial / 2.0));
        CHECK_THAT(out.matrix().trace().real(), WithinAbs(1.0, 1e-13));
        CHECK(oracle::distance(out.matrix(), out.matrix().adjoint()) < 1e-14);
        Eigen::SelfAdjointEigenSolver<Matrix> es(out.matrix());
        CHECK(es.eigenvalues().minCoeff() > -1e-12);
    }
    CHECK_THROWS_AS(dcnot_channel(DensityMatrix::maximally_mixed(2), 1, 1, BellResource()), SemanticError);
    CHECK_THROWS_AS(dcnot_channel(DensityMatrix::maximally_mixed(2), 0, 2, BellResource()), SemanticError);
}

TEST_CASE("telegate measurement outcomes are uniform") {
    std::mt19937_64 rng(8);
    const StateVector psi(oracle::random_state(3, rng));
    // a is maximally mixed after CNOT(c->a) on a Phi+ pair, b after H(b)
    auto big = tensor(DensityMatrix(psi), BellResource::from_weight(1.0).density());
    const auto circuit = telegate_circuit(0, 2, 3, 4);
    big.apply(circuit[0]);
    CHECK_THAT(partial_trace(big, {3}).population(1), WithinAbs(0.5, 1e-14));
    for (std::size_t i = 1; i < 4; ++i) big.apply(circuit[i]);
    CHECK_THAT(partial_trace(big, {4}).population(1), WithinAbs(0.5, 1e-14));
}

TEST_CASE("perfect trajectories act as CNOT") {
    std::mt19937_64 rng(9);
    CounterRng crng(1, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const Vector v = oracle::random_state(3, rng);
        TelegateOutcome o;
        const auto out = dcnot_trajectory(StateVector(v), 1, 2, BellResource::from_weight(1.0), crng, &o);
        CHECK(o.resource == BellState::PhiPlus);
        CHECK(oracle::fidelity(out.amplitudes(), oracle::cnot(3, 1, 2) * v) > 1 - 1e-13);
    }
}

TEST_CASE("trajectory average matches the channel") {
    std::mt19937_64 rng(10);
    const Vector v = oracle::random_state(3, rng);
    const auto res = BellResource::from_weight(0.8);
    const auto channel = dcnot_channel(DensityMatrix(StateVector(v)), 0, 2, res);
    constexpr std::size_t samples = 100000;
    std::vector<double> sum(8, 0.0), sum2(8, 0.0);
    std::size_t m1 = 0, m2 = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        CounterRng crng(3, i);
        TelegateOutcome o;
        const auto out = dcnot_trajectory(StateVector(v), 0, 2, res, crng, &o);
        m1 += o.m1;
        m2 += o.m2;
        for (std::uint64_t b = 0; b < 8; ++b) {
            const double p = out.probability(b);
            sum[b] += p;
            sum2[b] += p * p;
        }
    }
    const double n = samples;
    for (std::uint64_t b = 0; b < 8; ++b) {
        const double mean = sum[b] / n;
        const double se = std::sqrt(std::max(sum2[b] / n - mean * mean, 0.0) / (n - 1.0));
        CHECK(std::abs(mean - channel.population(b)) <= 3.0 * std::max(se, 1e-12));
    }
    const double half_se = 0.5 / std::sqrt(n);
    CHECK(std::abs(static_cast<double>(m1) / n - 0.5) < 4.0 * half_se);
    CHECK(std::abs(static_cast<double>(m2) / n - 0.5) < 4.0 * half_se);
}

TEST_CASE("closed-form p_N curves") {
    CHECK(pn_bound(0.0, 100) == 1.0);
    CHECK(pn_bound(0.75, 3) == 0.0);
    CHECK_THAT(pn_bound(3e-3, 100), WithinRel(std::pow(0.996, 100), 1e-12));
    CHECK(pn_beta(1e-2, 40, 0.0) == pn_bound(1e-2, 40));
    CHECK(pn_beta(1e-2, 40, 0.5) > pn_bound(1e-2, 40));
    CHECK_THROWS_AS(pn_beta(1e-2, 40, 1.0), DomainError);
    CHECK_THROWS_AS(pn_bound(-1e-3, 4), DomainError);
}

TEST_CASE("two-telegate plan obeys the binomial expansion") {
    const auto p = toy();
    const auto plan = compile_trotter_plan(p, 2.0, 2);
    REQUIRE(plan.m_d == 2);
    const auto psi0 = prepare_initial_state(p);
    const auto ideal = run_trotter_ideal(p, plan).statevector();
    auto f_of = [&](std::function<double(std::size_t)> x_of) {
        return inner_fidelity(run_density(plan, DensityMatrix(psi0), x_of), ideal);
    };
    const double f1 = 0.5 * (f_of([](std::size_t i) { return i == 0 ? 0.0 : 1.0; }) +
                             f_of([](std::size_t i) { return i == 1 ? 0.0 : 1.0; }));
    const double f2 = f_of([](std::size_t) { return 0.0; });
    const auto levels = measure_fault_levels(p, plan, {.second_order = true});
    CHECK_THAT(levels.f1, WithinAbs(f1, 1e-14));
    REQUIRE(levels.f2.has_value());
    CHECK_THAT(*levels.f2, WithinAbs(f2, 1e-14));
    for (double x : {0.3, 0.7, 0.95}) {
        const auto noisy = run_trotter_noisy(p, plan, BellResource::from_weight(x), NoisyMode::exact());
        const double expect = x * x + 2.0 * x * (1.0 - x) * f1 + (1.0 - x) * (1.0 - x) * f2;
        CHECK_THAT(noisy.p_n, WithinAbs(expect, 1e-10));
    }
}

TEST_CASE("direct beta") {
    SECTION("no telegates") {
        const auto p = identity_partition(generate_spin_chain(4, 2));
        CHECK_THROWS_AS(measure_beta_direct(p, compile_trotter_plan(p, 2.0, 4)), DomainError);
    }
    SECTION("toy chain") {
        const auto p = toy();
        const double beta = measure_beta_direct(p, compile_trotter_plan(p, 10.0, 20));
        CHECK(beta > 0.0);
        CHECK(beta < 1.0);
    }
    SECTION("faults invisible to the state give beta = 1") {
        // H on the control of |-> gives |1>; |1>|-> is fixed by Z_c and X_t,
        // so the twirl leaves CNOT untouched.
        const auto p = identity_partition(IsingProblem("pair", {"a", "b"}, {0.0, 0.0}, std::map<Edge, double>{{{0, 1}, 1.0}}));
        TrotterPlan plan;
        plan.m = 1;
        plan.t_f = 1.0;
        plan.dt = 1.0;
        plan.num_qubits = 2;
        plan.steps.push_back({0.0, {GateOp::h(0), GateOp::cnot(0, 1, true)}, 1});
        plan.m_d = 1;
        CHECK_THAT(measure_fault_levels(p, plan).f1, WithinAbs(1.0, 1e-12));
        CHECK_THROWS_AS(measure_beta_direct(p, plan), DomainError);
    }
}

TEST_CASE("beta fit") {
    const std::vector<double> deltas{1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2};
    auto curve = [&](double beta, std::uint64_t m_d) {
        std::vector<FitPoint> pts;
        for (double d : deltas) pts.push_back({d, pn_beta(d, m_d, beta), 0.0});
        return pts;
    };
    CHECK_THAT(fit_beta(curve(0.3, 50), 50, 0.0).beta_hat, WithinAbs(0.3, 1e-6));
    CHECK_THAT(fit_beta(curve(0.0, 50), 50, 0.0).beta_hat, WithinAbs(0.0, 1e-6));
    CHECK_THAT(fit_beta(curve(0.9, 80), 80, 0.0).beta_hat, WithinAbs(0.9, 1e-6));

    SECTION("points at or below the floor are dropped") {
        auto pts = curve(0.3, 50);
        pts.push_back({0.5, 1e-9, 0.0});
        const auto fit = fit_beta(pts, 50, 1e-6);
        CHECK(fit.used == deltas.size());
        CHECK_THAT(fit.beta_hat, WithinAbs(0.3, 1e-6));
        CHECK_THROWS_AS(fit_beta(pts, 50, 0.97), DomainError);
    }
    SECTION("too few points") {
        auto pts = curve(0.3, 50);
        pts.resize(2);
        CHECK_THROWS_AS(fit_beta(pts, 50, 0.0), DomainError);
    }
    SECTION("toy chain noisy curve") {
        const auto p = toy();
        const auto plan = compile_trotter_plan(p, 10.0, 20);
        std::vector<FitPoint> pts;
        for (double d : {1e-4, 1e-3, 1e-2, 3e-2}) {
            const auto r = run_trotter_noisy(p, plan, BellResource::from_infidelity(d), NoisyMode::exact());
            CHECK(r.p_n >= pn_bound(d, plan.m_d) - 1e-12);
            pts.push_back({d, r.p_n, 0.0});
        }
        CHECK(fit_beta(pts, plan.m_d, 2.0 / 16.0).beta_hat > 0.0);
    }
}
