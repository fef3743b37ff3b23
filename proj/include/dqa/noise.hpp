#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "error.hpp"
#include "state.hpp"

namespace dqa {

/// Werner-form shared pair rho = x |Phi+><Phi+| + (1 - x) I / 4.
class BellResource {
  public:
    BellResource() = default;

    [[nodiscard]] static BellResource from_weight(double x) {
        if (!(x >= 0.0 && x <= 1.0)) throw DomainError("Werner weight must lie in [0, 1]");
        BellResource r;
        r.x_ = x;
        return r;
    }

    [[nodiscard]] static BellResource from_fidelity(double f) {
        if (!(f >= 0.25 && f <= 1.0)) throw DomainError("Bell fidelity must lie in [1/4, 1]");
        return from_weight((4.0 * f - 1.0) / 3.0);
    }

    [[nodiscard]] static BellResource from_infidelity(double delta) {
        if (!(delta >= 0.0 && delta <= 0.75)) throw DomainError("Bell infidelity must lie in [0, 3/4]");
        return from_weight(1.0 - 4.0 * delta / 3.0);
    }

    [[nodiscard]] double x() const noexcept { return x_; }
    [[nodiscard]] double fidelity() const noexcept { return x_ + (1.0 - x_) / 4.0; }
    [[nodiscard]] double delta() const noexcept { return 1.0 - fidelity(); }

    /// Two-qubit density matrix over (a, b), a the low qubit.
    [[nodiscard]] DensityMatrix density() const {
        Vector phi = Vector::Zero(4);
        phi[0] = phi[3] = 1.0 / std::sqrt(2.0);
        Matrix m = x_ * phi * phi.adjoint() + (1.0 - x_) / 4.0 * Matrix::Identity(4, 4);
        return DensityMatrix(std::move(m), {"phi_a", "phi_b"});
    }

  private:
    double x_ = 1.0;
};

/// Bell states as Paulis on b applied to |Phi+>: Phi+, Phi- (Z), Psi+ (X), Psi- (XZ).
enum class BellState : std::uint8_t { PhiPlus, PhiMinus, PsiPlus, PsiMinus };

[[nodiscard]] inline StateVector bell_state(BellState which) {
    Vector v = Vector::Zero(4);
    const double r = 1.0 / std::sqrt(2.0);
    switch (which) {
    case BellState::PhiPlus:
        v[0] = r, v[3] = r;
        break;
    case BellState::PhiMinus:
        v[0] = r, v[3] = -r;
        break;
    case BellState::PsiPlus:
        v[1] = r, v[2] = r;
        break;
    case BellState::PsiMinus:
        v[1] = r, v[2] = -r;
        break;
    }
    return StateVector(std::move(v), {"phi_a", "phi_b"});
}

/// Deferred-measurement telegate: control c on one node, target t on the
/// other, pair (a, b) with a beside c and b beside t.
///   CNOT(c->a); [measure a, X on b] = CNOT(a->b); CNOT(b->t);
///   [measure b in X, Z on c] = H(b) then CZ(b, c).
[[nodiscard]] inline std::array<GateOp, 5> telegate_circuit(std::size_t c, std::size_t t, std::size_t a, std::size_t b) {
    return {GateOp::cnot(c, a), GateOp::cnot(a, b), GateOp::cnot(b, t), GateOp::h(b), GateOp::cz(b, c)};
}

namespace detail {

/// Applies the deferred telegate to rho (x) sigma and traces the pair out.
inline DensityMatrix telegate_on(const DensityMatrix &rho, std::size_t control, std::size_t target,
                                 const DensityMatrix &pair) {
    const std::size_t n = rho.num_qubits();
    auto big = tensor(rho, pair);
    for (const auto &g : telegate_circuit(control, target, n, n + 1)) big.apply(g);
    std::vector<std::size_t> keep(n);
    for (std::size_t q = 0; q < n; ++q) keep[q] = q;
    auto out = partial_trace(big, keep);
    return DensityMatrix(std::move(out.matrix()), rho.labels());
}

} // namespace detail

/// DCNOT[rho] = x CNOT[rho] + (1 - x) Theta[rho], with Theta the telegate run
/// on the maximally mixed pair. Both pieces are computed through the circuit.
[[nodiscard]] inline DensityMatrix dcnot_channel(const DensityMatrix &rho, std::size_t control, std::size_t target,
                                                 const BellResource &resource) {
    if (control == target) throw SemanticError("DCNOT control and target must differ");
    if (control >= rho.num_qubits() || target >= rho.num_qubits())
        throw SemanticError("DCNOT qubit outside the register");
    if (rho.num_qubits() + 2 > max_density_qubits) throw CapacityError("register too large for the DCNOT circuit");
    return detail::telegate_on(rho, control, target, resource.density());
}

/// The pure fault branch Theta[rho] (telegate with a maximally mixed pair).
[[nodiscard]] inline DensityMatrix theta_channel(const DensityMatrix &rho, std::size_t control, std::size_t target) {
    return dcnot_channel(rho, control, target, BellResource::from_weight(0.0));
}

struct TelegateOutcome {
    BellState resource = BellState::PhiPlus;
    int m1 = 0;
    int m2 = 0;
};

/// Pure-state unravelling: samples the pair, runs the telegate with both
/// mid-circuit measurements sampled by Born's rule, applies the classical
/// corrections and drops the measured qubits.
template <class Rng>
[[nodiscard]] StateVector dcnot_trajectory(const StateVector &psi, std::size_t control, std::size_t target,
                                           const BellResource &resource, Rng &rng,
                                           TelegateOutcome *outcome = nullptr) {
    const std::size_t n = psi.num_qubits();
    if (control == target) throw SemanticError("DCNOT control and target must differ");
    if (control >= n || target >= n) throw SemanticError("DCNOT qubit outside the register");
    if (n + 2 > max_statevector_qubits) throw CapacityError("register too large for the telegate");

    TelegateOutcome o;
    const double u = rng.uniform();
    const double keep = resource.x() + (1.0 - resource.x()) / 4.0;
    const double other = (1.0 - resource.x()) / 4.0;
    if (u < keep)
        o.resource = BellState::PhiPlus;
    else if (u < keep + other)
        o.resource = BellState::PhiMinus;
    else if (u < keep + 2 * other)
        o.resource = BellState::PsiPlus;
    else
        o.resource = BellState::PsiMinus;

    const auto pair = bell_state(o.resource);
    Vector big = Eigen::kroneckerProduct(pair.amplitudes(), psi.amplitudes()).eval();
    StateVector s(std::move(big));
    const std::size_t a = n, b = n + 1;

    auto measure = [&](std::size_t q) {
        const std::uint64_t bit = std::uint64_t{1} << q;
        double p1 = 0.0;
        for (std::uint64_t i = 0; i < s.dim(); ++i)
            if (i & bit) p1 += s.probability(i);
        const int m = rng.uniform() < p1 ? 1 : 0;
        const double norm = std::sqrt(m ? p1 : 1.0 - p1);
        for (std::uint64_t i = 0; i < s.dim(); ++i) {
            auto &amp = s.amplitudes()[static_cast<Eigen::Index>(i)];
            if (static_cast<int>((i & bit) != 0) != m)
                amp = 0.0;
            else
                amp /= norm;
        }
        return m;
    };

    s.apply(GateOp::cnot(control, a));
    o.m1 = measure(a);
    if (o.m1) s.apply(GateOp::x(b));
    s.apply(GateOp::cnot(b, target));
    s.apply(GateOp::h(b));
    o.m2 = measure(b);
    if (o.m2) s.apply(GateOp::z(control));

    const std::uint64_t fixed = (static_cast<std::uint64_t>(o.m1) << a) | (static_cast<std::uint64_t>(o.m2) << b);
    Vector out(static_cast<Eigen::Index>(psi.dim()));
    for (std::uint64_t i = 0; i < psi.dim(); ++i) out[static_cast<Eigen::Index>(i)] = s[i | fixed];
    if (outcome) *outcome = o;
    return StateVector(std::move(out), psi.labels());
}

// Closed-form fault model.

/// (1 - 4 delta / 3)^M_D, the lower bound on p_N.
[[nodiscard]] inline double pn_bound(double delta, std::uint64_t m_d) {
    if (!(delta >= 0.0 && delta <= 0.75)) throw DomainError("delta must lie in [0, 3/4]");
    return std::pow(1.0 - 4.0 * delta / 3.0, static_cast<double>(m_d));
}

/// (1 - 4 delta (1 - beta) / 3)^M_D.
[[nodiscard]] inline double pn_beta(double delta, std::uint64_t m_d, double beta) {
    if (!(delta >= 0.0 && delta <= 0.75)) throw DomainError("delta must lie in [0, 3/4]");
    if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("beta must lie in [0, 1)");
    return std::pow(1.0 - 4.0 * delta * (1.0 - beta) / 3.0, static_cast<double>(m_d));
}

} // namespace dqa
