#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <istream>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "error.hpp"
#include "pauli.hpp"

namespace dqa {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr std::size_t max_statevector_qubits = 24;
inline constexpr std::size_t max_density_qubits = 12;

enum class GateKind : std::uint8_t { X, Z, H, CNOT, CZ, Phase, PauliExp, Dense };

/// One operation of a compiled program. PauliExp applies exp(-i angle P) with
/// P the product of `axis` on all targets; Phase applies diag(1, e^{i angle});
/// Dense applies `matrix` to the targets (targets[0] is the least significant
/// bit of the matrix index). CNOT targets are {control, target}.
struct GateOp {
    GateKind kind = GateKind::X;
    std::vector<std::size_t> targets;
    double angle = 0.0;
    Axis axis = Axis::Z;
    std::shared_ptr<const Matrix> matrix;
    bool telegate = false;

    static GateOp x(std::size_t q) { return {GateKind::X, {q}}; }
    static GateOp z(std::size_t q) { return {GateKind::Z, {q}}; }
    static GateOp h(std::size_t q) { return {GateKind::H, {q}}; }
    static GateOp cnot(std::size_t c, std::size_t t, bool telegate = false) {
        GateOp g{GateKind::CNOT, {c, t}};
        g.telegate = telegate;
        return g;
    }
    static GateOp cz(std::size_t a, std::size_t b) { return {GateKind::CZ, {a, b}}; }
    static GateOp phase(std::size_t q, double phi) {
        GateOp g{GateKind::Phase, {q}};
        g.angle = phi;
        return g;
    }
    static GateOp pauli_exp(const PauliTerm &term, double angle) {
        GateOp g{GateKind::PauliExp, term.qubits};
        g.angle = angle;
        g.axis = term.axis;
        return g;
    }
    static GateOp dense(std::vector<std::size_t> qubits, Matrix u) {
        GateOp g{GateKind::Dense, std::move(qubits)};
        g.matrix = std::make_shared<const Matrix>(std::move(u));
        return g;
    }

    void validate(std::size_t num_qubits) const {
        std::size_t arity = 0;
        switch (kind) {
        case GateKind::X:
        case GateKind::Z:
        case GateKind::H:
        case GateKind::Phase:
            arity = 1;
            break;
        case GateKind::CNOT:
        case GateKind::CZ:
            arity = 2;
            break;
        case GateKind::PauliExp:
        case GateKind::Dense:
            arity = targets.size();
            break;
        }
        if (targets.size() != arity || arity == 0) throw SemanticError("gate arity mismatch");
        std::uint64_t seen = 0;
        for (auto q : targets) {
            if (q >= num_qubits) throw SemanticError("gate targets qubit outside the register");
            if (seen & (std::uint64_t{1} << q)) throw SemanticError("gate targets are not distinct");
            seen |= std::uint64_t{1} << q;
        }
        if (kind == GateKind::Dense &&
            (!matrix || matrix->rows() != (Eigen::Index{1} << arity) || matrix->cols() != matrix->rows()))
            throw SemanticError("dense gate matrix has the wrong shape");
    }
};

/// Amplitude kernels over a flat little-endian array of 2^n entries.
namespace kernels {

inline void pauli_x_mask(std::span<cplx> a, std::uint64_t mask) {
    if (mask == 0) return;
    const std::uint64_t top = std::uint64_t{1} << (63 - std::countl_zero(mask));
    for (std::uint64_t b = 0; b < a.size(); ++b)
        if (!(b & top)) std::swap(a[b], a[b ^ mask]);
}

inline void pauli_z_mask(std::span<cplx> a, std::uint64_t mask) {
    for (std::uint64_t b = 0; b < a.size(); ++b)
        if (std::popcount(b & mask) & 1) a[b] = -a[b];
}

/// exp(-i angle P) for a pure-X or pure-Z product on `mask`.
inline void pauli_exp(std::span<cplx> a, Axis axis, std::uint64_t mask, double angle) {
    if (angle == 0.0 || mask == 0) return;
    const double c = std::cos(angle), s = std::sin(angle);
    if (axis == Axis::Z) {
        const cplx even(c, -s), odd(c, s);
        for (std::uint64_t b = 0; b < a.size(); ++b) a[b] *= (std::popcount(b & mask) & 1) ? odd : even;
        return;
    }
    const std::uint64_t top = std::uint64_t{1} << (63 - std::countl_zero(mask));
    const cplx mis(0.0, -s);
    for (std::uint64_t b = 0; b < a.size(); ++b) {
        if (b & top) continue;
        const cplx u = a[b], v = a[b ^ mask];
        a[b] = c * u + mis * v;
        a[b ^ mask] = c * v + mis * u;
    }
}

inline void single(std::span<cplx> a, std::size_t q, const Eigen::Matrix2cd &m) {
    const std::uint64_t bit = std::uint64_t{1} << q;
    for (std::uint64_t b = 0; b < a.size(); ++b) {
        if (b & bit) continue;
        const cplx u = a[b], v = a[b | bit];
        a[b] = m(0, 0) * u + m(0, 1) * v;
        a[b | bit] = m(1, 0) * u + m(1, 1) * v;
    }
}

inline void hadamard(std::span<cplx> a, std::size_t q) {
    const double r = 1.0 / std::sqrt(2.0);
    const std::uint64_t bit = std::uint64_t{1} << q;
    for (std::uint64_t b = 0; b < a.size(); ++b) {
        if (b & bit) continue;
        const cplx u = a[b], v = a[b | bit];
        a[b] = r * (u + v);
        a[b | bit] = r * (u - v);
    }
}

inline void cnot(std::span<cplx> a, std::size_t control, std::size_t target) {
    const std::uint64_t cb = std::uint64_t{1} << control, tb = std::uint64_t{1} << target;
    for (std::uint64_t b = 0; b < a.size(); ++b)
        if ((b & cb) && !(b & tb)) std::swap(a[b], a[b | tb]);
}

inline void phase(std::span<cplx> a, std::size_t q, double phi) {
    const std::uint64_t bit = std::uint64_t{1} << q;
    const cplx p = std::polar(1.0, phi);
    for (std::uint64_t b = 0; b < a.size(); ++b)
        if (b & bit) a[b] *= p;
}

/// Applies a 2^k x 2^k matrix on the listed qubits (qubits[0] = LSB of the
/// local index).
inline void dense(std::span<cplx> a, std::span<const std::size_t> qubits, const Matrix &u) {
    const std::size_t k = qubits.size();
    const std::size_t local = std::size_t{1} << k;
    std::vector<std::uint64_t> offset(local, 0);
    std::uint64_t mask = 0;
    for (std::size_t l = 0; l < local; ++l)
        for (std::size_t j = 0; j < k; ++j)
            if (l & (std::size_t{1} << j)) offset[l] |= std::uint64_t{1} << qubits[j];
    for (auto q : qubits) mask |= std::uint64_t{1} << q;
    Vector in(static_cast<Eigen::Index>(local)), out;
    for (std::uint64_t b = 0; b < a.size(); ++b) {
        if (b & mask) continue;
        for (std::size_t l = 0; l < local; ++l) in[static_cast<Eigen::Index>(l)] = a[b | offset[l]];
        out.noalias() = u * in;
        for (std::size_t l = 0; l < local; ++l) a[b | offset[l]] = out[static_cast<Eigen::Index>(l)];
    }
}

inline void cz(std::span<cplx> a, std::size_t q0, std::size_t q1) {
    const std::uint64_t both = (std::uint64_t{1} << q0) | (std::uint64_t{1} << q1);
    for (std::uint64_t b = 0; b < a.size(); ++b)
        if ((b & both) == both) a[b] = -a[b];
}

/// Applies `g` (conjugated when `conjugate`) with all targets shifted by `shift`.
inline void apply(std::span<cplx> a, const GateOp &g, std::size_t shift = 0, bool conjugate = false) {
    auto t = [&](std::size_t i) { return g.targets[i] + shift; };
    switch (g.kind) {
    case GateKind::X:
        pauli_x_mask(a, std::uint64_t{1} << t(0));
        return;
    case GateKind::Z:
        pauli_z_mask(a, std::uint64_t{1} << t(0));
        return;
    case GateKind::H:
        hadamard(a, t(0));
        return;
    case GateKind::CNOT:
        cnot(a, t(0), t(1));
        return;
    case GateKind::CZ:
        cz(a, t(0), t(1));
        return;
    case GateKind::Phase:
        phase(a, t(0), conjugate ? -g.angle : g.angle);
        return;
    case GateKind::PauliExp: {
        std::uint64_t mask = 0;
        for (std::size_t i = 0; i < g.targets.size(); ++i) mask |= std::uint64_t{1} << t(i);
        pauli_exp(a, g.axis, mask, conjugate ? -g.angle : g.angle);
        return;
    }
    case GateKind::Dense: {
        std::vector<std::size_t> q(g.targets.size());
        for (std::size_t i = 0; i < q.size(); ++i) q[i] = t(i);
        if (conjugate)
            dense(a, q, g.matrix->conjugate());
        else
            dense(a, q, *g.matrix);
        return;
    }
    }
}

/// <P> contribution for a pure-X or pure-Z product: sum_b conj(a_b) (P a)_b.
inline double pauli_expectation(std::span<const cplx> a, Axis axis, std::uint64_t mask) {
    double acc = 0.0;
    if (axis == Axis::Z) {
        for (std::uint64_t b = 0; b < a.size(); ++b)
            acc += ((std::popcount(b & mask) & 1) ? -1.0 : 1.0) * std::norm(a[b]);
    } else {
        for (std::uint64_t b = 0; b < a.size(); ++b) acc += (std::conj(a[b]) * a[b ^ mask]).real();
    }
    return acc;
}

} // namespace kernels

class DensityMatrix;

/// Dense pure state over a labelled register.
class StateVector {
  public:
    StateVector() = default;

    /// |0...0> on `n` qubits.
    explicit StateVector(std::size_t n, std::vector<std::string> labels = {})
        : n_(n), amps_(Vector::Zero(checked_dim(n))), labels_(std::move(labels)) {
        amps_[0] = 1.0;
        fill_labels();
    }

    StateVector(Vector amplitudes, std::vector<std::string> labels = {})
        : n_(qubits_for(amplitudes.size())), amps_(std::move(amplitudes)), labels_(std::move(labels)) {
        fill_labels();
    }

    [[nodiscard]] std::size_t num_qubits() const noexcept { return n_; }
    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(amps_.size()); }
    [[nodiscard]] const Vector &amplitudes() const noexcept { return amps_; }
    Vector &amplitudes() noexcept { return amps_; }
    [[nodiscard]] const std::vector<std::string> &labels() const noexcept { return labels_; }
    [[nodiscard]] cplx operator[](std::uint64_t b) const { return amps_[static_cast<Eigen::Index>(b)]; }

    [[nodiscard]] std::span<cplx> data() noexcept { return {amps_.data(), dim()}; }
    [[nodiscard]] std::span<const cplx> data() const noexcept { return {amps_.data(), dim()}; }

    StateVector &apply(const GateOp &g) {
        g.validate(n_);
        kernels::apply(data(), g);
        return *this;
    }

    StateVector &apply_pauli_exponential(const PauliTerm &term, double angle) {
        for (auto q : term.qubits)
            if (q >= n_) throw SemanticError("Pauli term acts on a qubit outside the register");
        kernels::pauli_exp(data(), term.axis, term.mask(), angle);
        return *this;
    }

    [[nodiscard]] double norm() const { return amps_.norm(); }

    void normalize() {
        const double nrm = norm();
        if (nrm == 0.0) throw DomainError("cannot normalize a zero state");
        amps_ /= nrm;
    }

    [[nodiscard]] double probability(std::uint64_t b) const { return std::norm((*this)[b]); }

  private:
    static std::size_t checked_dim(std::size_t n) {
        if (n > max_statevector_qubits)
            throw CapacityError("statevector register of " + std::to_string(n) + " qubits exceeds cap");
        return std::size_t{1} << n;
    }
    static std::size_t qubits_for(Eigen::Index size) {
        if (size <= 0 || (size & (size - 1)) != 0) throw SemanticError("amplitude count is not a power of two");
        return static_cast<std::size_t>(std::countr_zero(static_cast<std::uint64_t>(size)));
    }
    void fill_labels() {
        if (labels_.empty())
            for (std::size_t i = 0; i < n_; ++i) labels_.push_back("q" + std::to_string(i));
        if (labels_.size() != n_) throw SemanticError("register label count does not match qubit count");
    }

    std::size_t n_ = 0;
    Vector amps_;
    std::vector<std::string> labels_;
};

/// Dense density matrix. Storage is column-major, so element (i, j) sits at
/// i + j * 2^n: the matrix is a 2n-qubit vector whose low n qubits index the
/// ket and high n qubits the bra. A unitary U acts as U on the ket half and
/// conj(U) on the bra half.
class DensityMatrix {
  public:
    DensityMatrix() = default;

    explicit DensityMatrix(const StateVector &psi)
        : n_(checked(psi.num_qubits())), rho_(psi.amplitudes() * psi.amplitudes().adjoint()),
          labels_(psi.labels()) {}

    DensityMatrix(Matrix rho, std::vector<std::string> labels = {}) : rho_(std::move(rho)), labels_(std::move(labels)) {
        if (rho_.rows() != rho_.cols() || rho_.rows() == 0 || (rho_.rows() & (rho_.rows() - 1)) != 0)
            throw SemanticError("density matrix must be square with power-of-two dimension");
        n_ = checked(static_cast<std::size_t>(std::countr_zero(static_cast<std::uint64_t>(rho_.rows()))));
        if (labels_.empty())
            for (std::size_t i = 0; i < n_; ++i) labels_.push_back("q" + std::to_string(i));
        if (labels_.size() != n_) throw SemanticError("register label count does not match qubit count");
    }

    static DensityMatrix maximally_mixed(std::size_t n) {
        const auto d = static_cast<Eigen::Index>(std::size_t{1} << checked(n));
        return DensityMatrix(Matrix::Identity(d, d) / static_cast<double>(d));
    }

    [[nodiscard]] std::size_t num_qubits() const noexcept { return n_; }
    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(rho_.rows()); }
    [[nodiscard]] const Matrix &matrix() const noexcept { return rho_; }
    Matrix &matrix() noexcept { return rho_; }
    [[nodiscard]] const std::vector<std::string> &labels() const noexcept { return labels_; }

    [[nodiscard]] std::span<cplx> data() noexcept { return {rho_.data(), dim() * dim()}; }
    [[nodiscard]] std::span<const cplx> data() const noexcept { return {rho_.data(), dim() * dim()}; }

    DensityMatrix &apply(const GateOp &g) {
        g.validate(n_);
        kernels::apply(data(), g, 0, false);
        kernels::apply(data(), g, n_, true);
        return *this;
    }

    DensityMatrix &apply_pauli_exponential(const PauliTerm &term, double angle) {
        for (auto q : term.qubits)
            if (q >= n_) throw SemanticError("Pauli term acts on a qubit outside the register");
        const auto m = term.mask();
        kernels::pauli_exp(data(), term.axis, m, angle);
        kernels::pauli_exp(data(), term.axis, m << n_, -angle);
        return *this;
    }

    [[nodiscard]] cplx trace() const { return rho_.trace(); }

    [[nodiscard]] double hermiticity_error() const { return (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff(); }

    [[nodiscard]] double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<Matrix> es(rho_, Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    /// Verification-mode invariant check.
    void check_invariants(double tol = 1e-10, double psd_tol = 1e-8) const {
        if (hermiticity_error() > tol) throw DomainError("density matrix is not Hermitian");
        if (std::abs(trace() - 1.0) > tol) throw DomainError("density matrix trace differs from 1");
        if (min_eigenvalue() < -psd_tol) throw DomainError("density matrix is not positive semidefinite");
    }

    [[nodiscard]] double population(std::uint64_t b) const {
        return rho_(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b)).real();
    }

  private:
    static std::size_t checked(std::size_t n) {
        if (n > max_density_qubits)
            throw CapacityError("density matrix register of " + std::to_string(n) + " qubits exceeds cap");
        return n;
    }

    std::size_t n_ = 0;
    Matrix rho_;
    std::vector<std::string> labels_;
};

/// |<a|b>|^2, invariant under global phases.
[[nodiscard]] inline double inner_fidelity(const StateVector &a, const StateVector &b) {
    if (a.dim() != b.dim()) throw SemanticError("register mismatch in fidelity");
    return std::norm(a.amplitudes().dot(b.amplitudes()));
}

/// <b| rho |b>.
[[nodiscard]] inline double inner_fidelity(const DensityMatrix &rho, const StateVector &b) {
    if (rho.dim() != b.dim()) throw SemanticError("register mismatch in fidelity");
    return b.amplitudes().dot(rho.matrix() * b.amplitudes()).real();
}

/// <psi| H(s) |psi> with schedule weights applied per tag.
[[nodiscard]] inline double expectation(const StateVector &psi, const TermList &terms, double s) {
    double e = 0.0;
    for (const auto &t : terms) {
        const double w = t.weighted(s);
        if (w == 0.0) continue;
        for (auto q : t.qubits)
            if (q >= psi.num_qubits()) throw SemanticError("term acts outside the register");
        e += w * kernels::pauli_expectation(psi.data(), t.axis, t.mask());
    }
    return e;
}

/// Tr[rho H(s)].
[[nodiscard]] inline double expectation(const DensityMatrix &rho, const TermList &terms, double s) {
    double e = 0.0;
    const auto &m = rho.matrix();
    for (const auto &t : terms) {
        const double w = t.weighted(s);
        if (w == 0.0) continue;
        for (auto q : t.qubits)
            if (q >= rho.num_qubits()) throw SemanticError("term acts outside the register");
        const std::uint64_t mask = t.mask();
        double acc = 0.0;
        for (std::uint64_t b = 0; b < rho.dim(); ++b) {
            if (t.axis == Axis::Z)
                acc += ((std::popcount(b & mask) & 1) ? -1.0 : 1.0) *
                       m(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b)).real();
            else
                acc += m(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b ^ mask)).real();
        }
        e += w * acc;
    }
    return e;
}

/// Reduced state on `keep` (kept qubits renumbered in ascending order).
[[nodiscard]] inline DensityMatrix partial_trace(const DensityMatrix &rho, std::vector<std::size_t> keep) {
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    const std::size_t n = rho.num_qubits();
    for (auto q : keep)
        if (q >= n) throw SemanticError("partial trace keeps a qubit outside the register");
    std::vector<std::size_t> traced;
    for (std::size_t q = 0; q < n; ++q)
        if (!std::binary_search(keep.begin(), keep.end(), q)) traced.push_back(q);
    const std::size_t dk = std::size_t{1} << keep.size(), dt = std::size_t{1} << traced.size();
    auto compose = [](std::size_t local, const std::vector<std::size_t> &qs) {
        std::uint64_t b = 0;
        for (std::size_t j = 0; j < qs.size(); ++j)
            if (local & (std::size_t{1} << j)) b |= std::uint64_t{1} << qs[j];
        return b;
    };
    std::vector<std::uint64_t> kb(dk), tb(dt);
    for (std::size_t i = 0; i < dk; ++i) kb[i] = compose(i, keep);
    for (std::size_t i = 0; i < dt; ++i) tb[i] = compose(i, traced);
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(dk), static_cast<Eigen::Index>(dk));
    const auto &m = rho.matrix();
    for (std::size_t j = 0; j < dk; ++j)
        for (std::size_t i = 0; i < dk; ++i) {
            cplx acc = 0.0;
            for (std::size_t r = 0; r < dt; ++r)
                acc += m(static_cast<Eigen::Index>(kb[i] | tb[r]), static_cast<Eigen::Index>(kb[j] | tb[r]));
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc;
        }
    std::vector<std::string> labels;
    for (auto q : keep) labels.push_back(rho.labels()[q]);
    return DensityMatrix(std::move(out), std::move(labels));
}

/// rho (x) sigma, with sigma's qubits appended above rho's.
[[nodiscard]] inline DensityMatrix tensor(const DensityMatrix &rho, const DensityMatrix &sigma) {
    Matrix out = Eigen::kroneckerProduct(sigma.matrix(), rho.matrix());
    auto labels = rho.labels();
    labels.insert(labels.end(), sigma.labels().begin(), sigma.labels().end());
    return DensityMatrix(std::move(out), std::move(labels));
}

/// Draws a computational-basis outcome with Born probabilities. Fixed
/// summation order, so the outcome is a deterministic function of `u`.
template <class Rng> [[nodiscard]] std::uint64_t sample_measurement(const StateVector &psi, Rng &rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::uint64_t b = 0; b < psi.dim(); ++b) {
        acc += psi.probability(b);
        if (u < acc) return b;
    }
    return psi.dim() - 1;
}

template <class Rng> [[nodiscard]] std::uint64_t sample_measurement(const DensityMatrix &rho, Rng &rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::uint64_t b = 0; b < rho.dim(); ++b) {
        acc += rho.population(b);
        if (u < acc) return b;
    }
    return rho.dim() - 1;
}

/// Debug dump: u64 amplitude count followed by (re, im) doubles, little-endian.
inline void dump_binary(std::ostream &os, const StateVector &psi) {
    static_assert(std::endian::native == std::endian::little, "binary dump assumes a little-endian host");
    const std::uint64_t count = psi.dim();
    os.write(reinterpret_cast<const char *>(&count), sizeof count);
    for (std::uint64_t b = 0; b < count; ++b) {
        const double re = psi[b].real(), im = psi[b].imag();
        os.write(reinterpret_cast<const char *>(&re), sizeof re);
        os.write(reinterpret_cast<const char *>(&im), sizeof im);
    }
}

[[nodiscard]] inline StateVector load_binary(std::istream &is) {
    std::uint64_t count = 0;
    if (!is.read(reinterpret_cast<char *>(&count), sizeof count)) throw ParseError("truncated statevector dump");
    if (count == 0 || count > (std::uint64_t{1} << max_statevector_qubits))
        throw ParseError("statevector dump has an invalid length");
    Vector v(static_cast<Eigen::Index>(count));
    for (std::uint64_t b = 0; b < count; ++b) {
        double re = 0, im = 0;
        if (!is.read(reinterpret_cast<char *>(&re), sizeof re) || !is.read(reinterpret_cast<char *>(&im), sizeof im))
            throw ParseError("truncated statevector dump");
        v[static_cast<Eigen::Index>(b)] = {re, im};
    }
    return StateVector(std::move(v));
}

} // namespace dqa
