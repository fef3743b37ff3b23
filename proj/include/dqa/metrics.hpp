#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "error.hpp"
#include "partition.hpp"
#include "pauli.hpp"
#include "problem.hpp"
#include "state.hpp"

namespace dqa {

inline constexpr std::size_t max_enumeration_qubits = 24;

struct GroundStateSpace {
    double energy = 0.0;
    std::vector<std::uint64_t> basis_states;
    std::size_t num_qubits = 0;

    [[nodiscard]] std::size_t degeneracy() const noexcept { return basis_states.size(); }
};

/// Enumerates the diagonal of a Z-only Hamiltonian over n qubits.
[[nodiscard]] inline std::vector<double> diagonal_energies(const TermList &terms, std::size_t n, double s = 1.0) {
    if (n > max_enumeration_qubits) throw CapacityError("register too large for diagonal enumeration");
    std::vector<double> e(std::size_t{1} << n, 0.0);
    for (const auto &t : terms) {
        if (t.axis != Axis::Z) throw SemanticError("diagonal enumeration needs Z-only terms");
        const double w = t.weighted(s);
        if (w == 0.0) continue;
        const auto m = t.mask();
        for (std::uint64_t b = 0; b < e.size(); ++b) e[b] += (std::popcount(b & m) & 1) ? -w : w;
    }
    return e;
}

[[nodiscard]] inline GroundStateSpace ground_state_space(const std::vector<double> &energies, std::size_t n) {
    GroundStateSpace gs;
    gs.num_qubits = n;
    gs.energy = *std::min_element(energies.begin(), energies.end());
    const double tol = 1e-9 * std::max(1.0, std::abs(gs.energy));
    for (std::uint64_t b = 0; b < energies.size(); ++b)
        if (energies[b] - gs.energy <= tol) gs.basis_states.push_back(b);
    return gs;
}

[[nodiscard]] inline GroundStateSpace ground_state_space(const IsingProblem &problem) {
    return ground_state_space(diagonal_energies(build_problem_terms(problem), problem.size()), problem.size());
}

/// p_0: population of the ground-state space.
[[nodiscard]] inline double fidelity_gs(const StateVector &psi, const GroundStateSpace &gs) {
    if (psi.num_qubits() != gs.num_qubits) throw SemanticError("register mismatch in ground-state fidelity");
    double p = 0.0;
    for (auto b : gs.basis_states) p += psi.probability(b);
    return std::clamp(p, 0.0, 1.0);
}

[[nodiscard]] inline double fidelity_gs(const DensityMatrix &rho, const GroundStateSpace &gs) {
    if (rho.num_qubits() != gs.num_qubits) throw SemanticError("register mismatch in ground-state fidelity");
    double p = 0.0;
    for (auto b : gs.basis_states) p += rho.population(b);
    return std::clamp(p, 0.0, 1.0);
}

/// epsilon = (E_star - E_bullet) / (E_mix - E_bullet).
[[nodiscard]] inline double energy_error(double e_star, double e_bullet, double e_mix) {
    const double den = e_mix - e_bullet;
    if (std::abs(den) < 1e-12) throw DomainError("energy error undefined: E_mix equals the reference energy");
    return (e_star - e_bullet) / den;
}

/// <phi_0| H_F |phi_0> with phi_0 the initial |-...-> state of the problem.
[[nodiscard]] inline double mixed_energy(const IsingProblem &problem) {
    const auto p = identity_partition(problem);
    return expectation(prepare_initial_state(p), build_problem_terms(problem), 1.0);
}

/// Plateau-friendly plotting quantity for probabilities: -log10(p).
[[nodiscard]] inline double log_negativity(double p) {
    return p > 0.0 ? -std::log10(p) : std::numeric_limits<double>::infinity();
}

// Lie norms

enum class NormConvention { TwiceSpectral, Spectral, Frobenius };

[[nodiscard]] inline std::string to_string(NormConvention c) {
    switch (c) {
    case NormConvention::TwiceSpectral:
        return "2x-spectral";
    case NormConvention::Spectral:
        return "spectral";
    case NormConvention::Frobenius:
        return "frobenius";
    }
    return "?";
}

[[nodiscard]] inline NormConvention norm_convention_from_string(const std::string &s) {
    if (s == "2x-spectral") return NormConvention::TwiceSpectral;
    if (s == "spectral") return NormConvention::Spectral;
    if (s == "frobenius") return NormConvention::Frobenius;
    throw ConfigError("unknown Lie-norm convention '" + s + "'");
}

/// Merges terms with equal Pauli string at schedule point s. Returns
/// (axis, mask) -> coefficient with zero entries removed.
[[nodiscard]] inline std::map<std::pair<Axis, std::uint64_t>, double> merged_paulis(const TermList &terms, double s) {
    std::map<std::pair<Axis, std::uint64_t>, double> m;
    for (const auto &t : terms) {
        const double w = t.weighted(s);
        if (w != 0.0) m[{t.axis, t.mask()}] += w;
    }
    std::erase_if(m, [](const auto &kv) { return kv.second == 0.0; });
    return m;
}

/// Dense Hermitian matrix of sum_t w_t(s) c_t P_t over n qubits.
[[nodiscard]] inline Matrix dense_hamiltonian(const TermList &terms, std::size_t n, double s) {
    if (n > 12) throw CapacityError("dense Hamiltonian limited to 12 qubits");
    const auto d = static_cast<Eigen::Index>(std::size_t{1} << n);
    Matrix h = Matrix::Zero(d, d);
    for (const auto &[key, c] : merged_paulis(terms, s)) {
        const auto [axis, mask] = key;
        for (std::uint64_t b = 0; b < static_cast<std::uint64_t>(d); ++b) {
            if (axis == Axis::Z)
                h(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(b)) += (std::popcount(b & mask) & 1) ? -c : c;
            else
                h(static_cast<Eigen::Index>(b ^ mask), static_cast<Eigen::Index>(b)) += c;
        }
    }
    return h;
}

/// Largest |eigenvalue| of the Hermitian operator. Single-axis sums are
/// diagonal (after a Hadamard layer for X), so they are enumerated directly.
[[nodiscard]] inline double spectral_norm(const TermList &terms, std::size_t n, double s) {
    const auto merged = merged_paulis(terms, s);
    if (merged.empty()) return 0.0;
    bool single_axis = true;
    for (const auto &[key, c] : merged) single_axis = single_axis && key.first == merged.begin()->first.first;
    if (single_axis) {
        if (n > max_enumeration_qubits) throw CapacityError("register too large for norm enumeration");
        double best = 0.0;
        for (std::uint64_t b = 0; b < (std::uint64_t{1} << n); ++b) {
            double e = 0.0;
            for (const auto &[key, c] : merged) e += (std::popcount(b & key.second) & 1) ? -c : c;
            best = std::max(best, std::abs(e));
        }
        return best;
    }
    if (n > 10) throw CapacityError("mixed-axis spectral norm limited to 10 qubits");
    Eigen::SelfAdjointEigenSolver<Matrix> es(dense_hamiltonian(terms, n, s), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Hilbert-Schmidt norm normalized by the dimension: sqrt(sum of squared
/// Pauli coefficients) after merging equal strings.
[[nodiscard]] inline double frobenius_norm(const TermList &terms, double s) {
    double acc = 0.0;
    for (const auto &[key, c] : merged_paulis(terms, s)) acc += c * c;
    return std::sqrt(acc);
}

[[nodiscard]] inline double lie_norm(const TermList &terms, std::size_t n, double s, NormConvention c) {
    switch (c) {
    case NormConvention::TwiceSpectral:
        return 2.0 * spectral_norm(terms, n, s);
    case NormConvention::Spectral:
        return spectral_norm(terms, n, s);
    case NormConvention::Frobenius:
        return frobenius_norm(terms, s);
    }
    return 0.0;
}

struct StepNorms {
    double t = 0.0;
    double local = 0.0;
    double nonlocal = 0.0;
};

/// Delta t_M = min_k min(1/||H_L(t_k)||, 1/||H_N(t_k)||) over the left
/// endpoints s_k = k / M. Vanishing norms impose no constraint.
[[nodiscard]] inline double convergence_step(const Partition &p, std::size_t m, NormConvention c,
                                             std::vector<StepNorms> *norms = nullptr, double t_f = 1.0) {
    if (m < 1) throw DomainError("Trotter step count must be positive");
    double worst = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double s = static_cast<double>(k) / static_cast<double>(m);
        StepNorms n{s * t_f, lie_norm(p.local_terms, p.size(), s, c), lie_norm(p.nonlocal_terms, p.size(), s, c)};
        worst = std::max({worst, n.local, n.nonlocal});
        if (norms) norms->push_back(n);
    }
    if (worst == 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / worst;
}

struct BoundReport {
    NormConvention convention = NormConvention::Frobenius;
    double t_f = 0.0;
    std::size_t m = 0;
    double dt = 0.0;
    double dt_m = 0.0;
    std::vector<StepNorms> per_step;
    /// Delta t / Delta t_M.
    double ratio = 0.0;
    bool convergent = false;
    /// sum_{n>=2} (2/n) ratio^n = -2 ln(1 - ratio) - 2 ratio, when convergent.
    std::optional<double> series;
    /// Leading coefficient Delta t / Delta t_M^2 of the H_eq distance bound.
    double heq_coefficient = 0.0;
    /// Full-series bound on ||H_eq - H||, i.e. series / Delta t.
    std::optional<double> heq_distance;
};

[[nodiscard]] inline BoundReport trotter_bound(const Partition &p, double t_f, std::size_t m, NormConvention c) {
    if (!(t_f > 0.0)) throw DomainError("t_F must be positive");
    BoundReport r;
    r.convention = c;
    r.t_f = t_f;
    r.m = m;
    r.dt = t_f / static_cast<double>(m);
    r.dt_m = convergence_step(p, m, c, &r.per_step, t_f);
    r.ratio = r.dt / r.dt_m;
    r.convergent = r.ratio < 1.0;
    r.heq_coefficient = r.dt / (r.dt_m * r.dt_m);
    if (r.convergent) {
        r.series = -2.0 * std::log1p(-r.ratio) - 2.0 * r.ratio;
        r.heq_distance = *r.series / r.dt;
    }
    return r;
}

[[nodiscard]] inline json bound_to_json(const BoundReport &r) {
    json steps = json::array();
    for (const auto &n : r.per_step) steps.push_back({{"t", n.t}, {"local", n.local}, {"nonlocal", n.nonlocal}});
    json out = {{"convention", to_string(r.convention)},
                {"t_F", r.t_f},
                {"M", r.m},
                {"dt", r.dt},
                {"dt_M", r.dt_m},
                {"ratio", r.ratio},
                {"convergent", r.convergent},
                {"heq_coefficient", r.heq_coefficient},
                {"per_step_norms", steps}};
    out["series"] = r.series ? json(*r.series) : json(nullptr);
    out["heq_distance"] = r.heq_distance ? json(*r.heq_distance) : json(nullptr);
    if (!r.convergent) out["divergence"] = true;
    return out;
}

struct Calibration {
    NormConvention selected = NormConvention::TwiceSpectral;
    std::map<NormConvention, double> dt_m;
    bool matched = false;
};

/// Picks the convention whose Delta t_M on the edge-split (4,2) chain is 0.5
/// within 5%; falls back to 2x-spectral when none does.
[[nodiscard]] inline Calibration calibrate_lie_norm() {
    const auto chain = generate_spin_chain(4, 2);
    const auto p = split_edges(chain, std::vector<std::size_t>{0, 0, 1, 1});
    Calibration cal;
    for (auto c : {NormConvention::TwiceSpectral, NormConvention::Spectral, NormConvention::Frobenius})
        cal.dt_m[c] = convergence_step(p, 64, c);
    for (auto c : {NormConvention::TwiceSpectral, NormConvention::Spectral, NormConvention::Frobenius})
        if (std::abs(cal.dt_m[c] - 0.5) <= 0.05 * 0.5) {
            cal.selected = c;
            cal.matched = true;
            break;
        }
    return cal;
}

[[nodiscard]] inline NormConvention default_norm_convention() {
    static const NormConvention c = calibrate_lie_norm().selected;
    return c;
}

} // namespace dqa
