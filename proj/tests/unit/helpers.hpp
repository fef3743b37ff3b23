#pragma once

// Dense reference operators built from 2x2 blocks with Kronecker products,
// independent of the library's bit-twiddling kernels.

#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "dqa/dqa.hpp"

namespace oracle {

using dqa::cplx;
using dqa::Matrix;
using dqa::Vector;

inline Matrix pauli(char p) {
    Matrix m(2, 2);
    switch (p) {
    case 'X':
        m << 0, 1, 1, 0;
        break;
    case 'Z':
        m << 1, 0, 0, -1;
        break;
    case 'H':
        m << 1, 1, 1, -1;
        m /= std::sqrt(2.0);
        break;
    default:
        m = Matrix::Identity(2, 2);
    }
    return m;
}

/// Operator with `ops[q]` on qubit q (little-endian: qubit 0 is the last factor).
inline Matrix kron_ops(const std::vector<Matrix> &ops) {
    Matrix out = Matrix::Identity(1, 1);
    for (const auto &op : ops) out = Eigen::kroneckerProduct(op, out).eval();
    return out;
}

inline Matrix on_qubits(std::size_t n, const std::vector<std::pair<std::size_t, Matrix>> &placed) {
    std::vector<Matrix> ops(n, Matrix::Identity(2, 2));
    for (const auto &[q, m] : placed) ops[q] = m;
    return kron_ops(ops);
}

inline Matrix pauli_string(std::size_t n, char axis, const std::vector<std::size_t> &qubits) {
    std::vector<std::pair<std::size_t, Matrix>> placed;
    for (auto q : qubits) placed.emplace_back(q, pauli(axis));
    return on_qubits(n, placed);
}

/// Projector-sum form of a controlled gate.
inline Matrix controlled(std::size_t n, std::size_t c, std::size_t t, const Matrix &u) {
    Matrix p0(2, 2), p1(2, 2);
    p0 << 1, 0, 0, 0;
    p1 << 0, 0, 0, 1;
    return on_qubits(n, {{c, p0}}) + on_qubits(n, {{c, p1}, {t, u}});
}

inline Matrix cnot(std::size_t n, std::size_t c, std::size_t t) { return controlled(n, c, t, pauli('X')); }

inline Matrix hamiltonian(const dqa::TermList &terms, std::size_t n, double s) {
    const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n);
    Matrix h = Matrix::Zero(dim, dim);
    for (const auto &t : terms) h += t.weighted(s) * pauli_string(n, t.axis == dqa::Axis::X ? 'X' : 'Z', t.qubits);
    return h;
}

inline Matrix expm_herm(const Matrix &h, double dt) {
    return (Matrix(h * cplx(0.0, -dt))).exp();
}

inline Vector random_state(std::size_t n, std::mt19937_64 &rng) {
    std::normal_distribution<double> g;
    Vector v(static_cast<Eigen::Index>(std::size_t{1} << n));
    for (auto &a : v) a = cplx(g(rng), g(rng));
    return v.normalized();
}

inline Matrix random_density(std::size_t n, std::mt19937_64 &rng) {
    std::normal_distribution<double> g;
    const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n);
    Matrix a(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) a(i, j) = cplx(g(rng), g(rng));
    Matrix rho = a * a.adjoint();
    return rho / rho.trace();
}

inline double distance(const Matrix &a, const Matrix &b) { return (a - b).cwiseAbs().maxCoeff(); }

inline double fidelity(const Vector &a, const Vector &b) { return std::norm(a.dot(b)); }

} // namespace oracle
