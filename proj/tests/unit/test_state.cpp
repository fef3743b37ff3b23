#include <sstream>

#include "catch_amalgamated.hpp"
#include "helpers.hpp"

using namespace dqa;
using Catch::Matchers::WithinAbs;

namespace {

Matrix gate_matrix(std::size_t n, const GateOp &g) {
    switch (g.kind) {
    case GateKind::X:
        return oracle::on_qubits(n, {{g.targets[0], oracle::pauli('X')}});
    case GateKind::Z:
        return oracle::on_qubits(n, {{g.targets[0], oracle::pauli('Z')}});
    case GateKind::H:
        return oracle::on_qubits(n, {{g.targets[0], oracle::pauli('H')}});
    case GateKind::CNOT:
        return oracle::cnot(n, g.targets[0], g.targets[1]);
    case GateKind::CZ:
        return oracle::controlled(n, g.targets[0], g.targets[1], oracle::pauli('Z'));
    case GateKind::Phase: {
        Matrix p(2, 2);
        p << 1, 0, 0, std::polar(1.0, g.angle);
        return oracle::on_qubits(n, {{g.targets[0], p}});
    }
    default:
        break;
    }
    throw std::logic_error("no oracle for gate");
}

} // namespace

TEST_CASE("zero-angle exponential is the identity") {
    std::mt19937_64 rng(1);
    StateVector psi(oracle::random_state(3, rng));
    const auto before = psi.amplitudes();
    psi.apply_pauli_exponential(PauliTerm(1.0, Axis::X, {0, 2}, ScheduleTag::Static), 0.0);
    CHECK((psi.amplitudes() - before).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("exp(-i pi/2 Z) on |0> is a global phase") {
    StateVector psi(1);
    psi.apply_pauli_exponential(PauliTerm(1.0, Axis::Z, {0}, ScheduleTag::Static), M_PI / 2);
    CHECK_THAT(std::abs(psi[0] - cplx(0, -1)), WithinAbs(0.0, 1e-15));
    Vector zero = Vector::Zero(2);
    zero[0] = 1.0;
    CHECK_THAT(oracle::fidelity(psi.amplitudes(), zero), WithinAbs(1.0, 1e-15));
}

TEST_CASE("exp(-i theta ZZ) equals its diagonal closed form and the matrix exponential") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const PauliTerm zz(1.0, Axis::Z, {0, 1}, ScheduleTag::Static);
    for (int k = 0; k < 10; ++k) {
        const double th = u(rng);
        Matrix u_lib(4, 4);
        for (int col = 0; col < 4; ++col) {
            StateVector e(Vector(Vector::Unit(4, col)));
            e.apply_pauli_exponential(zz, th);
            u_lib.col(col) = e.amplitudes();
        }
        Matrix diag = Matrix::Zero(4, 4);
        diag(0, 0) = std::polar(1.0, -th);
        diag(1, 1) = std::polar(1.0, th);
        diag(2, 2) = std::polar(1.0, th);
        diag(3, 3) = std::polar(1.0, -th);
        CHECK(oracle::distance(u_lib, diag) < 1e-13);
        CHECK(oracle::distance(u_lib, oracle::expm_herm(oracle::pauli_string(2, 'Z', {0, 1}), th)) < 1e-12);
    }
}

TEST_CASE("Pauli-string exponentials match the dense matrix exponential") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const std::size_t n = 4;
    const std::vector<std::vector<std::size_t>> supports{{0}, {3}, {1, 2}, {0, 3}, {0, 1, 3}, {0, 1, 2, 3}};
    for (const auto &q : supports)
        for (Axis ax : {Axis::X, Axis::Z}) {
            const double th = u(rng);
            const auto psi0 = oracle::random_state(n, rng);
            StateVector psi(psi0);
            psi.apply_pauli_exponential(PauliTerm(1.0, ax, q, ScheduleTag::Static), th);
            const Vector expect =
                oracle::expm_herm(oracle::pauli_string(n, ax == Axis::X ? 'X' : 'Z', q), th) * psi0;
            CHECK((psi.amplitudes() - expect).cwiseAbs().maxCoeff() < 1e-12);

            DensityMatrix rho{StateVector(psi0)};
            rho.apply_pauli_exponential(PauliTerm(1.0, ax, q, ScheduleTag::Static), th);
            CHECK(oracle::distance(rho.matrix(), expect * expect.adjoint()) < 1e-12);
        }
}

TEST_CASE("fixed gates match their dense matrices on states and density matrices") {
    std::mt19937_64 rng(4);
    const std::size_t n = 3;
    const std::vector<GateOp> gates{GateOp::x(0),       GateOp::z(2),    GateOp::h(1),
                                    GateOp::cnot(0, 2), GateOp::cnot(2, 1), GateOp::cz(1, 2),
                                    GateOp::phase(1, 0.7)};
    for (const auto &g : gates) {
        const Matrix u = gate_matrix(n, g);
        const auto v = oracle::random_state(n, rng);
        StateVector psi(v);
        psi.apply(g);
        CHECK((psi.amplitudes() - u * v).cwiseAbs().maxCoeff() < 1e-13);

        const Matrix r = oracle::random_density(n, rng);
        DensityMatrix rho(r);
        rho.apply(g);
        CHECK(oracle::distance(rho.matrix(), u * r * u.adjoint()) < 1e-13);
    }
}

TEST_CASE("dense gates on scattered qubits") {
    std::mt19937_64 rng(5);
    const std::size_t n = 4;
    const Matrix h2 = oracle::random_density(2, rng) * 3.0;
    const Matrix u = oracle::expm_herm(h2, 0.4);
    const std::vector<std::size_t> q{3, 1};
    // qubits[0] is the low bit of the local index: build the full operator by
    // expanding u over the register.
    const auto dim = Eigen::Index{1} << n;
    Matrix full = Matrix::Zero(dim, dim);
    for (Eigen::Index col = 0; col < dim; ++col)
        for (int li = 0; li < 4; ++li) {
            const int lj = static_cast<int>(((col >> q[0]) & 1) | (((col >> q[1]) & 1) << 1));
            Eigen::Index row = col & ~((Eigen::Index{1} << q[0]) | (Eigen::Index{1} << q[1]));
            row |= static_cast<Eigen::Index>(li & 1) << q[0];
            row |= static_cast<Eigen::Index>((li >> 1) & 1) << q[1];
            full(row, col) += u(li, lj);
        }
    const auto v = oracle::random_state(n, rng);
    StateVector psi(v);
    psi.apply(GateOp::dense(q, u));
    CHECK((psi.amplitudes() - full * v).cwiseAbs().maxCoeff() < 1e-13);
    CHECK_THROWS_AS(psi.apply(GateOp::dense({0, 1, 2}, u)), SemanticError);
    CHECK_THROWS_AS(psi.apply(GateOp::cnot(1, 1)), SemanticError);
    CHECK_THROWS_AS(psi.apply(GateOp::x(4)), SemanticError);
}

TEST_CASE("expectation, partial trace and fidelity") {
    SECTION("ferromagnetic pair on |00>") {
        const IsingProblem p("pair", {"a", "b"}, {0.0, 0.0}, {{{0, 1}, -1.0}});
        StateVector psi(2);
        CHECK_THAT(expectation(psi, build_problem_terms(p), 1.0), WithinAbs(-1.0, 1e-15));
        CHECK_THAT(expectation(DensityMatrix(psi), build_problem_terms(p), 1.0), WithinAbs(-1.0, 1e-15));
    }
    SECTION("Phi- reduced to one qubit is I/2") {
        const auto phi = bell_state(BellState::PhiMinus);
        const auto r = partial_trace(DensityMatrix(phi), {0});
        CHECK(oracle::distance(r.matrix(), Matrix::Identity(2, 2) / 2.0) < 1e-15);
    }
    SECTION("maximally mixed against |00>") {
        const StateVector zero(2);
        CHECK_THAT(inner_fidelity(DensityMatrix::maximally_mixed(2), zero), WithinAbs(0.25, 1e-15));
    }
    SECTION("expectation of mixed X and Z terms against the dense operator") {
        std::mt19937_64 rng(6);
        const TermList terms{PauliTerm(0.7, Axis::X, {0}, ScheduleTag::Driver),
                             PauliTerm(-1.3, Axis::Z, {1, 2}, ScheduleTag::Problem),
                             PauliTerm(0.4, Axis::X, {0, 2}, ScheduleTag::Static)};
        const auto v = oracle::random_state(3, rng);
        const double s = 0.3;
        const double expect = (v.adjoint() * oracle::hamiltonian(terms, 3, s) * v)(0, 0).real();
        CHECK_THAT(expectation(StateVector(v), terms, s), WithinAbs(expect, 1e-12));
        const Matrix r = oracle::random_density(3, rng);
        const double expect_r = (oracle::hamiltonian(terms, 3, s) * r).trace().real();
        CHECK_THAT(expectation(DensityMatrix(r), terms, s), WithinAbs(expect_r, 1e-12));
    }
    SECTION("partial trace against an explicit sum over the traced qubits") {
        std::mt19937_64 rng(7);
        const Matrix r = oracle::random_density(3, rng);
        const auto red = partial_trace(DensityMatrix(r), {0, 2});
        Matrix expect = Matrix::Zero(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                for (int m = 0; m < 2; ++m) {
                    const int bi = (i & 1) | (m << 1) | ((i >> 1) << 2);
                    const int bj = (j & 1) | (m << 1) | ((j >> 1) << 2);
                    expect(i, j) += r(bi, bj);
                }
        CHECK(oracle::distance(red.matrix(), expect) < 1e-15);
    }
}

TEST_CASE("density matrix invariants") {
    std::mt19937_64 rng(8);
    DensityMatrix rho(oracle::random_density(3, rng));
    CHECK_NOTHROW(rho.check_invariants());
    CHECK_THAT(rho.trace().real(), WithinAbs(1.0, 1e-12));
    CHECK(rho.min_eigenvalue() > -1e-12);
    Matrix bad = rho.matrix();
    bad(0, 0) += 0.5;
    CHECK_THROWS(DensityMatrix(bad).check_invariants());
}

TEST_CASE("capacity limits") {
    CHECK_THROWS_AS(StateVector(max_statevector_qubits + 1), CapacityError);
    CHECK_THROWS_AS(DensityMatrix::maximally_mixed(max_density_qubits + 1), CapacityError);
}

TEST_CASE("binary dump round trip") {
    std::mt19937_64 rng(9);
    StateVector psi(oracle::random_state(5, rng));
    std::stringstream ss;
    dump_binary(ss, psi);
    const auto back = load_binary(ss);
    CHECK(back.amplitudes() == psi.amplitudes());
}
