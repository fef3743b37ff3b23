#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace dqa {

enum class Axis : std::uint8_t { X, Z };

/// Which part of the interpolated Hamiltonian a term belongs to.
/// DRIVER terms are weighted by (1 - s), PROBLEM terms by s, STATIC by 1.
enum class ScheduleTag : std::uint8_t { Driver, Problem, Static };

[[nodiscard]] constexpr double schedule_weight(ScheduleTag tag, double s) noexcept {
    switch (tag) {
    case ScheduleTag::Driver:
        return 1.0 - s;
    case ScheduleTag::Problem:
        return s;
    case ScheduleTag::Static:
        return 1.0;
    }
    return 0.0;
}

[[nodiscard]] inline std::string_view to_string(Axis a) { return a == Axis::X ? "X" : "Z"; }

[[nodiscard]] inline std::string_view to_string(ScheduleTag t) {
    switch (t) {
    case ScheduleTag::Driver:
        return "DRIVER";
    case ScheduleTag::Problem:
        return "PROBLEM";
    case ScheduleTag::Static:
        return "STATIC";
    }
    return "?";
}

[[nodiscard]] inline Axis axis_from_string(std::string_view s) {
    if (s == "X") return Axis::X;
    if (s == "Z") return Axis::Z;
    throw ParseError("unknown Pauli axis '" + std::string(s) + "'");
}

[[nodiscard]] inline ScheduleTag tag_from_string(std::string_view s) {
    if (s == "DRIVER") return ScheduleTag::Driver;
    if (s == "PROBLEM") return ScheduleTag::Problem;
    if (s == "STATIC") return ScheduleTag::Static;
    throw ParseError("unknown schedule tag '" + std::string(s) + "'");
}

/// Coefficient-weighted product of same-axis Pauli factors on distinct
/// register qubits, e.g. J * Z_a Z_b or X_{c_A} X_{c_B}.
struct PauliTerm {
    double coefficient = 0.0;
    Axis axis = Axis::Z;
    std::vector<std::size_t> qubits;
    ScheduleTag tag = ScheduleTag::Static;

    PauliTerm() = default;
    PauliTerm(double c, Axis a, std::vector<std::size_t> q, ScheduleTag t)
        : coefficient(c), axis(a), qubits(std::move(q)), tag(t) {
        validate();
    }

    void validate() const {
        if (qubits.empty()) throw SemanticError("Pauli term without factors");
        auto sorted = qubits;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw SemanticError("Pauli term repeats a qubit");
    }

    [[nodiscard]] std::uint64_t mask() const noexcept {
        std::uint64_t m = 0;
        for (auto q : qubits) m |= std::uint64_t{1} << q;
        return m;
    }

    [[nodiscard]] double weighted(double s) const noexcept {
        return schedule_weight(tag, s) * coefficient;
    }

    /// Canonical ordering key: tag, axis, then sorted qubit indices.
    [[nodiscard]] std::vector<std::size_t> sorted_qubits() const {
        auto q = qubits;
        std::sort(q.begin(), q.end());
        return q;
    }

    friend bool operator==(const PauliTerm &, const PauliTerm &) = default;
};

using TermList = std::vector<PauliTerm>;

/// Orders terms by (tag, sorted qubits); this is the application order used
/// inside each Trotter factor.
inline void sort_canonical(TermList &terms) {
    std::stable_sort(terms.begin(), terms.end(), [](const PauliTerm &a, const PauliTerm &b) {
        if (a.tag != b.tag) return a.tag < b.tag;
        auto qa = a.sorted_qubits();
        auto qb = b.sorted_qubits();
        if (qa != qb) return qa < qb;
        return a.axis < b.axis;
    });
}

} // namespace dqa
