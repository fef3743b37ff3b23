#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "pauli.hpp"
#include "problem.hpp"
#include "state.hpp"

namespace dqa {

/// Display name of an annealer node: 0 -> "A", 1 -> "B", ..., 26 -> "N26".
[[nodiscard]] inline std::string node_name(std::size_t id) {
    if (id < 26) return std::string(1, static_cast<char>('A' + id));
    return "N" + std::to_string(id);
}

struct AnnealerNode {
    std::size_t id = 0;
    std::vector<std::size_t> qubits;
};

struct DuplicationRecord {
    std::size_t original = 0;
    std::vector<std::size_t> copies;
};

enum class SplitKind { Edge, Vertex };

/// A problem distributed over annealer nodes. The register lists every
/// post-split qubit; duplicated qubits appear once per hosting node.
struct Partition {
    IsingProblem source;
    SplitKind kind = SplitKind::Edge;
    std::vector<std::string> labels;
    std::vector<std::size_t> owner;
    std::vector<std::size_t> logical;
    std::vector<AnnealerNode> nodes;
    TermList local_terms;
    TermList nonlocal_terms;
    std::vector<DuplicationRecord> duplications;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }

    [[nodiscard]] TermList all_terms() const {
        TermList t = local_terms;
        t.insert(t.end(), nonlocal_terms.begin(), nonlocal_terms.end());
        return t;
    }

    /// PROBLEM-tagged terms over the register: the split H_F.
    [[nodiscard]] TermList problem_terms() const {
        TermList t;
        for (const auto &term : all_terms())
            if (term.tag == ScheduleTag::Problem) t.push_back(term);
        return t;
    }

    [[nodiscard]] std::set<std::size_t> nodes_of(const PauliTerm &t) const {
        std::set<std::size_t> s;
        for (auto q : t.qubits) s.insert(owner.at(q));
        return s;
    }

    /// Structural invariants: ownership covers the register, node sets are
    /// disjoint, local terms sit on one node, nonlocal terms span two or more.
    void validate() const {
        const std::size_t n = labels.size();
        if (owner.size() != n || logical.size() != n) throw SemanticError("partition register is inconsistent");
        std::vector<int> seen(n, 0);
        for (const auto &node : nodes)
            for (auto q : node.qubits) {
                if (q >= n || owner[q] != node.id) throw SemanticError("node ownership is inconsistent");
                ++seen[q];
            }
        for (auto c : seen)
            if (c != 1) throw SemanticError("node qubit sets must be disjoint and cover the register");
        for (const auto &t : local_terms) {
            for (auto q : t.qubits)
                if (q >= n) throw SemanticError("local term outside the register");
            if (nodes_of(t).size() != 1) throw SemanticError("local term spans several nodes");
        }
        for (const auto &t : nonlocal_terms) {
            for (auto q : t.qubits)
                if (q >= n) throw SemanticError("nonlocal term outside the register");
            if (nodes_of(t).size() < 2) throw SemanticError("nonlocal term lives on a single node");
        }
        for (const auto &d : duplications) {
            if (d.copies.size() < 2) throw SemanticError("duplication needs at least two copies");
            std::set<std::size_t> hosts;
            for (auto c : d.copies) hosts.insert(owner.at(c));
            if (hosts.size() != d.copies.size()) throw SemanticError("copies must live on distinct nodes");
        }
    }
};

namespace detail {

inline std::vector<AnnealerNode> collect_nodes(const std::vector<std::size_t> &owner) {
    std::map<std::size_t, AnnealerNode> by_id;
    for (std::size_t q = 0; q < owner.size(); ++q) {
        auto &node = by_id[owner[q]];
        node.id = owner[q];
        node.qubits.push_back(q);
    }
    std::vector<AnnealerNode> nodes;
    for (auto &[id, node] : by_id) nodes.push_back(std::move(node));
    return nodes;
}

} // namespace detail

/// Edge splitting: couplings crossing nodes become nonlocal ZZ terms; fields,
/// drivers and intra-node couplings stay local. `assignment[i]` is the node of
/// qubit i.
[[nodiscard]] inline Partition split_edges(const IsingProblem &problem, const std::vector<std::size_t> &assignment) {
    if (assignment.size() != problem.size())
        throw SemanticError("edge-split assignment must list a node for every qubit");
    Partition p;
    p.source = problem;
    p.kind = SplitKind::Edge;
    p.labels = problem.labels();
    p.owner = assignment;
    p.logical.resize(problem.size());
    for (std::size_t i = 0; i < problem.size(); ++i) p.logical[i] = i;
    p.nodes = detail::collect_nodes(p.owner);
    p.local_terms = build_driver_terms(problem);
    for (auto &t : build_problem_terms(problem)) {
        if (t.qubits.size() == 2 && assignment[t.qubits[0]] != assignment[t.qubits[1]])
            p.nonlocal_terms.push_back(std::move(t));
        else
            p.local_terms.push_back(std::move(t));
    }
    p.validate();
    return p;
}

[[nodiscard]] inline Partition split_edges(const IsingProblem &problem,
                                           const std::map<std::string, std::size_t> &assignment) {
    std::vector<std::size_t> a(problem.size());
    for (std::size_t i = 0; i < problem.size(); ++i) {
        auto it = assignment.find(problem.labels()[i]);
        if (it == assignment.end())
            throw SemanticError("assignment is missing qubit '" + problem.labels()[i] + "'");
        a[i] = it->second;
    }
    for (const auto &[label, node] : assignment) (void)problem.index_of(label);
    return split_edges(problem, a);
}

/// Vertex n-plication. Each duplicated qubit q becomes one copy per listed
/// node ("q_A", "q_B", ...). Its field is shared as h_q / n over the copies,
/// each coupling (p, q) is reattached with full J to the copy on p's node, and
/// the copies are driven by a single nonlocal X-product term. Couplings between
/// two undistributed qubits on different nodes are edge-split. A coupling
/// between two duplicated qubits is placed on `edge_nodes[{p, q}]` when given,
/// otherwise on the lowest-numbered node hosting copies of both.
[[nodiscard]] inline Partition split_vertices(const IsingProblem &problem,
                                              const std::map<std::string, std::vector<std::size_t>> &plan,
                                              const std::map<std::string, std::size_t> &assignment,
                                              const std::map<Edge, std::size_t> &edge_nodes = {}) {
    const std::size_t n = problem.size();
    std::vector<std::vector<std::size_t>> hosts(n);
    std::vector<bool> assigned(n, false);
    for (const auto &[label, nodes] : plan) {
        const auto q = problem.index_of(label);
        if (nodes.size() < 2) throw SemanticError("duplication of '" + label + "' needs at least two nodes");
        std::set<std::size_t> distinct(nodes.begin(), nodes.end());
        if (distinct.size() != nodes.size())
            throw SemanticError("copies of '" + label + "' must be on distinct nodes");
        hosts[q] = nodes;
    }
    for (const auto &[label, node] : assignment) {
        const auto q = problem.index_of(label);
        if (!hosts[q].empty()) throw SemanticError("qubit '" + label + "' is both duplicated and assigned");
        hosts[q] = {node};
        assigned[q] = true;
    }
    for (std::size_t q = 0; q < n; ++q)
        if (hosts[q].empty()) throw SemanticError("qubit '" + problem.labels()[q] + "' has no node");

    Partition p;
    p.source = problem;
    p.kind = SplitKind::Vertex;
    std::vector<std::map<std::size_t, std::size_t>> copy_on(n);
    for (std::size_t q = 0; q < n; ++q) {
        const bool dup = !assigned[q];
        DuplicationRecord rec{q, {}};
        for (auto node : hosts[q]) {
            const std::size_t r = p.labels.size();
            p.labels.push_back(dup ? problem.labels()[q] + "_" + node_name(node) : problem.labels()[q]);
            p.owner.push_back(node);
            p.logical.push_back(q);
            copy_on[q][node] = r;
            rec.copies.push_back(r);
        }
        if (dup) p.duplications.push_back(std::move(rec));
    }
    p.nodes = detail::collect_nodes(p.owner);

    for (std::size_t q = 0; q < n; ++q) {
        if (assigned[q]) {
            p.local_terms.emplace_back(1.0, Axis::X, std::vector<std::size_t>{copy_on[q].begin()->second},
                                       ScheduleTag::Driver);
        }
    }
    for (const auto &d : p.duplications) p.nonlocal_terms.emplace_back(1.0, Axis::X, d.copies, ScheduleTag::Driver);

    for (std::size_t q = 0; q < n; ++q) {
        const double h = problem.fields()[q];
        if (h == 0.0) continue;
        const double share = h / static_cast<double>(hosts[q].size());
        for (const auto &[node, r] : copy_on[q])
            p.local_terms.emplace_back(share, Axis::Z, std::vector<std::size_t>{r}, ScheduleTag::Problem);
    }

    for (const auto &[edge, j] : problem.couplings()) {
        const auto [u, v] = edge;
        const auto &lu = problem.labels()[u], &lv = problem.labels()[v];
        if (assigned[u] && assigned[v]) {
            const auto ru = copy_on[u].begin()->second, rv = copy_on[v].begin()->second;
            auto &dst = p.owner[ru] == p.owner[rv] ? p.local_terms : p.nonlocal_terms;
            dst.emplace_back(j, Axis::Z, std::vector<std::size_t>{ru, rv}, ScheduleTag::Problem);
            continue;
        }
        std::optional<std::size_t> node;
        if (assigned[u] || assigned[v]) {
            const auto fixed = assigned[u] ? u : v, dup = assigned[u] ? v : u;
            const auto at = hosts[fixed][0];
            if (!copy_on[dup].contains(at))
                throw SemanticError("coupling (" + lu + "," + lv + ") cannot be reattached locally: no copy of '" +
                                    problem.labels()[dup] + "' on node " + node_name(at));
            node = at;
        } else if (auto it = edge_nodes.find(edge); it != edge_nodes.end()) {
            if (!copy_on[u].contains(it->second) || !copy_on[v].contains(it->second))
                throw SemanticError("coupling (" + lu + "," + lv + ") placed on node " + node_name(it->second) +
                                    " which lacks a copy of an endpoint");
            node = it->second;
        } else {
            for (const auto &[nu, ru] : copy_on[u])
                if (copy_on[v].contains(nu)) {
                    node = nu;
                    break;
                }
            if (!node)
                throw SemanticError("coupling (" + lu + "," + lv + ") has no node hosting both endpoints");
        }
        p.local_terms.emplace_back(j, Axis::Z, std::vector<std::size_t>{copy_on[u][*node], copy_on[v][*node]},
                                   ScheduleTag::Problem);
    }
    p.validate();
    return p;
}

/// Everything on node 0: local terms reproduce the problem, nothing is nonlocal.
[[nodiscard]] inline Partition identity_partition(const IsingProblem &problem) {
    return split_edges(problem, std::vector<std::size_t>(problem.size(), 0));
}

struct StatePreparation {
    enum class Kind { Minus, GhzMinus } kind = Kind::Minus;
    std::vector<std::size_t> qubits;
};

/// |-> on every undistributed qubit and (|0..0> - |1..1>)/sqrt2 on every copy
/// group: the ground state of the split driver.
[[nodiscard]] inline std::vector<StatePreparation> initial_state_spec(const Partition &p) {
    std::vector<StatePreparation> out;
    std::vector<bool> covered(p.size(), false);
    for (const auto &d : p.duplications) {
        for (auto c : d.copies) covered[c] = true;
    }
    for (std::size_t r = 0; r < p.size(); ++r) {
        if (covered[r]) {
            for (const auto &d : p.duplications)
                if (d.copies.front() == r) out.push_back({StatePreparation::Kind::GhzMinus, d.copies});
            continue;
        }
        out.push_back({StatePreparation::Kind::Minus, {r}});
    }
    return out;
}

[[nodiscard]] inline StateVector prepare_initial_state(const Partition &p) {
    const auto spec = initial_state_spec(p);
    const std::size_t n = p.size();
    if (n > max_statevector_qubits) throw CapacityError("register too large for a statevector");
    Vector amps(static_cast<Eigen::Index>(std::size_t{1} << n));
    const double r2 = 1.0 / std::sqrt(2.0);
    for (std::uint64_t b = 0; b < amps.size(); ++b) {
        double a = 1.0;
        for (const auto &prep : spec) {
            if (prep.kind == StatePreparation::Kind::Minus) {
                a *= ((b >> prep.qubits[0]) & 1U) ? -r2 : r2;
                continue;
            }
            std::size_t ones = 0;
            for (auto q : prep.qubits) ones += (b >> q) & 1U;
            if (ones == 0)
                a *= r2;
            else if (ones == prep.qubits.size())
                a *= -r2;
            else
                a = 0.0;
            if (a == 0.0) break;
        }
        amps[static_cast<Eigen::Index>(b)] = a;
    }
    return StateVector(std::move(amps), p.labels);
}

namespace detail {

/// Register basis index holding logical basis index x, copies aligned.
inline std::vector<std::uint64_t> aligned_indices(const Partition &p) {
    const std::size_t n = p.source.size();
    std::vector<std::uint64_t> out(std::size_t{1} << n, 0);
    for (std::uint64_t x = 0; x < out.size(); ++x) {
        std::uint64_t r = 0;
        for (std::size_t q = 0; q < p.size(); ++q)
            if ((x >> p.logical[q]) & 1U) r |= std::uint64_t{1} << q;
        out[x] = r;
    }
    return out;
}

} // namespace detail

inline constexpr double projection_floor = 1e-12;

template <class State> struct Projection {
    double aligned_probability = 1.0;
    State state;
};

/// Projects onto the subspace where every copy group agrees, renormalizes and
/// contracts each group to one logical qubit over the source problem's register.
[[nodiscard]] inline Projection<StateVector> logical_projection(const Partition &p, const StateVector &psi) {
    if (psi.num_qubits() != p.size()) throw SemanticError("state register does not match the partition");
    const auto idx = detail::aligned_indices(p);
    Vector out(static_cast<Eigen::Index>(idx.size()));
    double weight = 0.0;
    for (std::size_t x = 0; x < idx.size(); ++x) {
        out[static_cast<Eigen::Index>(x)] = psi[idx[x]];
        weight += std::norm(psi[idx[x]]);
    }
    if (weight < projection_floor) throw DomainError("degenerate projection: no weight on the aligned subspace");
    out /= std::sqrt(weight);
    return {weight, StateVector(std::move(out), p.source.labels())};
}

[[nodiscard]] inline Projection<DensityMatrix> logical_projection(const Partition &p, const DensityMatrix &rho) {
    if (rho.num_qubits() != p.size()) throw SemanticError("state register does not match the partition");
    const auto idx = detail::aligned_indices(p);
    const auto d = static_cast<Eigen::Index>(idx.size());
    Matrix out(d, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < d; ++i)
            out(i, j) = rho.matrix()(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(i)]),
                                     static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]));
    const double weight = out.trace().real();
    if (weight < projection_floor) throw DomainError("degenerate projection: no weight on the aligned subspace");
    out /= weight;
    return {weight, DensityMatrix(std::move(out), p.source.labels())};
}

/// Total population outside the aligned subspace.
[[nodiscard]] inline double misaligned_population(const Partition &p, const StateVector &psi) {
    if (p.duplications.empty()) return 0.0;
    double aligned = 0.0;
    for (auto r : detail::aligned_indices(p)) aligned += psi.probability(r);
    return std::max(0.0, 1.0 - aligned);
}

// JSON

[[nodiscard]] inline json term_to_json(const PauliTerm &t, const std::vector<std::string> &labels) {
    json q = json::array();
    for (auto i : t.qubits) q.push_back(labels.at(i));
    return {{"coefficient", t.coefficient}, {"axis", to_string(t.axis)}, {"qubits", q}, {"tag", to_string(t.tag)}};
}

[[nodiscard]] inline json initial_state_to_json(const Partition &p) {
    json out = json::array();
    for (const auto &s : initial_state_spec(p)) {
        json labels = json::array();
        for (auto q : s.qubits) labels.push_back(p.labels[q]);
        out.push_back({{"state", s.kind == StatePreparation::Kind::Minus ? "minus" : "ghz_minus"},
                       {"qubits", s.qubits},
                       {"labels", labels}});
    }
    return out;
}

[[nodiscard]] inline json partition_to_json(const Partition &p) {
    json nodes = json::array();
    for (const auto &node : p.nodes) {
        json q = json::array();
        for (auto r : node.qubits) q.push_back(p.labels[r]);
        nodes.push_back({{"id", node.id}, {"name", node_name(node.id)}, {"qubits", q}});
    }
    json dups = json::array();
    for (const auto &d : p.duplications) {
        json c = json::array();
        for (auto r : d.copies) c.push_back(p.labels[r]);
        dups.push_back({{"original", p.source.labels()[d.original]}, {"copies", c}});
    }
    json local = json::array(), nonlocal = json::array();
    for (const auto &t : p.local_terms) local.push_back(term_to_json(t, p.labels));
    for (const auto &t : p.nonlocal_terms) nonlocal.push_back(term_to_json(t, p.labels));
    return {{"kind", p.kind == SplitKind::Edge ? "edge" : "vertex"},
            {"register", p.labels},
            {"qubit_order", "little-endian"},
            {"nodes", nodes},
            {"duplications", dups},
            {"local_terms", local},
            {"nonlocal_terms", nonlocal},
            {"source", problem_to_json(p.source)}};
}

/// Split plan as it appears in configs:
///   {"method": "edge", "assignment": {"a": 0, ...}}
///   {"method": "vertex", "assignment": {...}, "duplicate": {"c": [0, 1]},
///    "edge_nodes": {"a,c": 1}}
/// "method": "none" keeps everything on one node.
[[nodiscard]] inline Partition partition_from_plan(const IsingProblem &problem, const json &plan) {
    if (!plan.is_object()) throw ConfigError("split plan must be an object");
    for (const auto &[k, v] : plan.items()) {
        static const std::set<std::string> known{"method", "assignment", "duplicate", "edge_nodes"};
        if (!known.contains(k)) throw ConfigError("unknown split plan field '" + k + "'");
    }
    const auto method = plan.value("method", std::string("edge"));
    if (method == "none") return identity_partition(problem);
    std::map<std::string, std::size_t> assignment;
    if (plan.contains("assignment"))
        for (const auto &[k, v] : plan["assignment"].items()) assignment[k] = v.get<std::size_t>();
    if (method == "edge") {
        if (plan.contains("duplicate")) throw ConfigError("edge split plans cannot duplicate qubits");
        return split_edges(problem, assignment);
    }
    if (method != "vertex") throw ConfigError("unknown split method '" + method + "'");
    std::map<std::string, std::vector<std::size_t>> dup;
    if (plan.contains("duplicate"))
        for (const auto &[k, v] : plan["duplicate"].items()) dup[k] = v.get<std::vector<std::size_t>>();
    std::map<Edge, std::size_t> edge_nodes;
    if (plan.contains("edge_nodes"))
        for (const auto &[k, v] : plan["edge_nodes"].items()) {
            auto [a, b] = detail::split_pair_key(k);
            edge_nodes[make_edge(problem.index_of(a), problem.index_of(b))] = v.get<std::size_t>();
        }
    return split_vertices(problem, dup, assignment, edge_nodes);
}

} // namespace dqa
