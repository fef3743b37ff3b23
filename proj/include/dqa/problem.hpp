#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "pauli.hpp"
#include "rng.hpp"

namespace dqa {

using json = nlohmann::json;

/// Unordered qubit pair stored with first < second.
using Edge = std::pair<std::size_t, std::size_t>;

[[nodiscard]] inline Edge make_edge(std::size_t a, std::size_t b) {
    if (a == b) throw SemanticError("self-coupling on qubit index " + std::to_string(a));
    return a < b ? Edge{a, b} : Edge{b, a};
}

/// Annealing problem in Ising form: local fields h_i and couplings J_ij on
/// labelled qubits. Qubit i of the register is labels[i]; the register is
/// little-endian (qubit 0 is the least significant bit of a basis index).
class IsingProblem {
  public:
    IsingProblem() = default;

    IsingProblem(std::string name, std::vector<std::string> labels, std::vector<double> fields,
                 std::map<Edge, double> couplings, std::optional<std::uint64_t> seed = std::nullopt,
                 json metadata = json::object())
        : name_(std::move(name)), labels_(std::move(labels)), fields_(std::move(fields)),
          couplings_(std::move(couplings)), seed_(seed), metadata_(std::move(metadata)) {
        validate();
    }

    [[nodiscard]] const std::string &name() const noexcept { return name_; }
    [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
    [[nodiscard]] const std::vector<std::string> &labels() const noexcept { return labels_; }
    [[nodiscard]] const std::vector<double> &fields() const noexcept { return fields_; }
    [[nodiscard]] const std::map<Edge, double> &couplings() const noexcept { return couplings_; }
    [[nodiscard]] const std::optional<std::uint64_t> &seed() const noexcept { return seed_; }
    [[nodiscard]] const json &metadata() const noexcept { return metadata_; }
    json &metadata() noexcept { return metadata_; }

    [[nodiscard]] std::size_t index_of(std::string_view label) const {
        for (std::size_t i = 0; i < labels_.size(); ++i)
            if (labels_[i] == label) return i;
        throw SemanticError("unknown qubit '" + std::string(label) + "'");
    }

    [[nodiscard]] double coupling(std::size_t a, std::size_t b) const {
        auto it = couplings_.find(make_edge(a, b));
        return it == couplings_.end() ? 0.0 : it->second;
    }

    /// Diagonal energy of H_F for a computational basis index.
    [[nodiscard]] double energy(std::uint64_t basis) const noexcept {
        double e = 0.0;
        auto spin = [basis](std::size_t q) { return ((basis >> q) & 1U) ? -1.0 : 1.0; };
        for (std::size_t i = 0; i < fields_.size(); ++i) e += fields_[i] * spin(i);
        for (const auto &[edge, j] : couplings_) e += j * spin(edge.first) * spin(edge.second);
        return e;
    }

    friend bool operator==(const IsingProblem &a, const IsingProblem &b) {
        return a.name_ == b.name_ && a.labels_ == b.labels_ && a.fields_ == b.fields_ &&
               a.couplings_ == b.couplings_ && a.seed_ == b.seed_ && a.metadata_ == b.metadata_;
    }

  private:
    void validate() const {
        if (labels_.empty()) throw SemanticError("problem '" + name_ + "' has no qubits");
        if (labels_.size() > 62) throw CapacityError("problem exceeds 62 qubits");
        std::set<std::string> seen;
        for (const auto &l : labels_) {
            if (l.empty()) throw SemanticError("empty qubit label");
            if (l.find(',') != std::string::npos)
                throw SemanticError("qubit label '" + l + "' contains a comma");
            if (!seen.insert(l).second) throw SemanticError("duplicate qubit label '" + l + "'");
        }
        if (fields_.size() != labels_.size())
            throw SemanticError("field vector length does not match qubit count");
        for (const auto &[edge, j] : couplings_) {
            if (edge.first >= edge.second || edge.second >= labels_.size())
                throw SemanticError("coupling references an invalid qubit pair");
            if (j == 0.0)
                throw SemanticError("zero coupling on (" + labels_[edge.first] + "," +
                                    labels_[edge.second] + "); omit absent edges instead");
        }
    }

    std::string name_;
    std::vector<std::string> labels_;
    std::vector<double> fields_;
    std::map<Edge, double> couplings_;
    std::optional<std::uint64_t> seed_;
    json metadata_ = json::object();
};

/// H_0 = sum_i X_i, one DRIVER term per qubit.
[[nodiscard]] inline TermList build_driver_terms(const IsingProblem &problem) {
    TermList terms;
    terms.reserve(problem.size());
    for (std::size_t i = 0; i < problem.size(); ++i)
        terms.emplace_back(1.0, Axis::X, std::vector<std::size_t>{i}, ScheduleTag::Driver);
    return terms;
}

/// H_F = sum_i h_i Z_i + sum_{(i,j) in e0} J_ij Z_i Z_j. Zero fields emit no term.
[[nodiscard]] inline TermList build_problem_terms(const IsingProblem &problem) {
    TermList terms;
    for (std::size_t i = 0; i < problem.size(); ++i)
        if (problem.fields()[i] != 0.0)
            terms.emplace_back(problem.fields()[i], Axis::Z, std::vector<std::size_t>{i},
                               ScheduleTag::Problem);
    for (const auto &[edge, j] : problem.couplings())
        terms.emplace_back(j, Axis::Z, std::vector<std::size_t>{edge.first, edge.second},
                           ScheduleTag::Problem);
    return terms;
}

namespace detail {

inline std::pair<std::string, std::string> split_pair_key(const std::string &key) {
    auto comma = key.find(',');
    if (comma == std::string::npos || key.find(',', comma + 1) != std::string::npos)
        throw ParseError("coupling key '" + key + "' is not of the form \"a,b\"");
    return {key.substr(0, comma), key.substr(comma + 1)};
}

inline double as_number(const json &v, const std::string &what) {
    if (!v.is_number()) throw ParseError(what + " must be a number");
    return v.get<double>();
}

} // namespace detail

/// Builds an IsingProblem from an already-parsed JSON document.
[[nodiscard]] inline IsingProblem problem_from_json(const json &doc) {
    if (!doc.is_object()) throw ParseError("problem document must be a JSON object");
    for (const auto &[k, v] : doc.items()) {
        static const std::set<std::string> known{"name", "qubits", "h", "J", "metadata", "seed"};
        if (!known.contains(k)) throw ParseError("unknown problem field '" + k + "'");
    }
    if (!doc.contains("qubits") || !doc["qubits"].is_array())
        throw ParseError("problem requires a \"qubits\" array");
    std::vector<std::string> labels;
    for (const auto &q : doc["qubits"]) {
        if (!q.is_string()) throw ParseError("qubit labels must be strings");
        labels.push_back(q.get<std::string>());
    }
    if (labels.empty()) throw SemanticError("problem has no qubits");
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (!index.emplace(labels[i], i).second)
            throw SemanticError("duplicate qubit label '" + labels[i] + "'");

    std::vector<double> fields(labels.size(), 0.0);
    if (doc.contains("h")) {
        if (!doc["h"].is_object()) throw ParseError("\"h\" must be an object");
        for (const auto &[k, v] : doc["h"].items()) {
            auto it = index.find(k);
            if (it == index.end()) throw SemanticError("field on unknown qubit '" + k + "'");
            fields[it->second] = detail::as_number(v, "field h[" + k + "]");
        }
    }

    std::map<Edge, double> couplings;
    if (doc.contains("J")) {
        if (!doc["J"].is_object()) throw ParseError("\"J\" must be an object");
        for (const auto &[k, v] : doc["J"].items()) {
            auto [a, b] = detail::split_pair_key(k);
            auto ia = index.find(a), ib = index.find(b);
            if (ia == index.end() || ib == index.end())
                throw SemanticError("coupling (" + a + "," + b + ") references an unknown qubit");
            if (ia->second == ib->second) throw SemanticError("self-coupling (" + a + "," + a + ")");
            double j = detail::as_number(v, "coupling J[" + k + "]");
            if (j == 0.0)
                throw SemanticError("zero coupling (" + a + "," + b + "); omit absent edges instead");
            if (!couplings.emplace(make_edge(ia->second, ib->second), j).second)
                throw SemanticError("duplicate coupling pair (" + a + "," + b + ")");
        }
    }

    std::optional<std::uint64_t> seed;
    if (doc.contains("seed") && !doc["seed"].is_null()) {
        if (!doc["seed"].is_number_unsigned()) throw ParseError("\"seed\" must be a non-negative integer");
        seed = doc["seed"].get<std::uint64_t>();
    }
    std::string name = doc.value("name", std::string{});
    json metadata = doc.contains("metadata") ? doc["metadata"] : json::object();
    return IsingProblem(std::move(name), std::move(labels), std::move(fields), std::move(couplings),
                        seed, std::move(metadata));
}

/// Parses the problem JSON format. Syntax errors carry line/column; duplicate
/// coupling keys are rejected even when the JSON text repeats a key verbatim.
[[nodiscard]] inline IsingProblem parse_problem(std::string_view text) {
    std::string current_top;
    std::set<std::string> seen_couplings;
    std::optional<std::string> duplicate;
    auto cb = [&](int depth, json::parse_event_t event, json &parsed) {
        if (event == json::parse_event_t::key) {
            if (depth == 1) {
                current_top = parsed.get<std::string>();
            } else if (depth == 2 && current_top == "J") {
                auto key = parsed.get<std::string>();
                if (!seen_couplings.insert(key).second && !duplicate) duplicate = key;
            }
        }
        return true;
    };
    json doc;
    try {
        doc = json::parse(text.begin(), text.end(), cb);
    } catch (const json::parse_error &e) {
        throw ParseError(std::string("problem JSON: ") + e.what());
    }
    if (duplicate) {
        auto [a, b] = detail::split_pair_key(*duplicate);
        throw SemanticError("duplicate coupling pair (" + a + "," + b + ")");
    }
    try {
        return problem_from_json(doc);
    } catch (const json::exception &e) {
        throw ParseError(std::string("problem JSON: ") + e.what());
    }
}

/// Canonical JSON document: every qubit listed in "h", coupling keys use
/// lexicographically sorted labels, object keys sorted.
[[nodiscard]] inline json problem_to_json(const IsingProblem &p) {
    json doc = json::object();
    doc["name"] = p.name();
    doc["qubits"] = p.labels();
    json h = json::object();
    for (std::size_t i = 0; i < p.size(); ++i) h[p.labels()[i]] = p.fields()[i];
    doc["h"] = std::move(h);
    json jmap = json::object();
    for (const auto &[edge, j] : p.couplings()) {
        std::string a = p.labels()[edge.first], b = p.labels()[edge.second];
        if (b < a) std::swap(a, b);
        jmap[a + "," + b] = j;
    }
    doc["J"] = std::move(jmap);
    doc["metadata"] = p.metadata();
    if (p.seed()) doc["seed"] = *p.seed();
    return doc;
}

[[nodiscard]] inline std::string serialize_problem(const IsingProblem &p) {
    return problem_to_json(p).dump(2) + "\n";
}

/// Path of N qubits cut into s equal segments. Couplings inside a segment are
/// J_L = 1, the s - 1 bridges between segments are J_N = -2, fields are 0.
[[nodiscard]] inline IsingProblem generate_spin_chain(std::size_t n, std::size_t segments) {
    if (n < 2 || segments < 1 || segments > n || n % segments != 0)
        throw DomainError("spin chain needs N >= 2, 1 <= s <= N and s dividing N (got N=" +
                          std::to_string(n) + ", s=" + std::to_string(segments) + ")");
    const std::size_t len = n / segments;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back("q" + std::to_string(i));
    std::map<Edge, double> couplings;
    for (std::size_t i = 0; i + 1 < n; ++i) couplings[{i, i + 1}] = ((i + 1) % len == 0) ? -2.0 : 1.0;
    json segs = json::array();
    for (std::size_t k = 0; k < segments; ++k) {
        json seg = json::array();
        for (std::size_t i = k * len; i < (k + 1) * len; ++i) seg.push_back(labels[i]);
        segs.push_back(seg);
    }
    json meta = {{"family", "spin_chain"}, {"N", n}, {"s", segments}, {"J_L", 1.0}, {"J_N", -2.0},
                 {"segments", segs}};
    return IsingProblem("spin_chain_" + std::to_string(n) + "_" + std::to_string(segments),
                        std::move(labels), std::vector<double>(n, 0.0), std::move(couplings),
                        std::nullopt, std::move(meta));
}

/// Two clusters (sizes l and N - l), each a ring, plus complete bipartite
/// cross edges between the first i0 qubits of cluster 0 and the first i1 of
/// cluster 1. All |J| = 1; signs come from SplitMix64(seed), one draw per edge
/// in the order ring 0, ring 1, cross edges (row-major), negative when the
/// draw's top bit is set.
[[nodiscard]] inline IsingProblem generate_sparse_network(std::size_t n, std::size_t l, std::size_t i0,
                                                          std::size_t i1, std::uint64_t seed) {
    if (l < 1 || l >= n || i0 > l || i1 > n - l)
        throw DomainError("sparse network needs 1 <= l < N, i0 <= l, i1 <= N - l");
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < n; ++i) labels.push_back("q" + std::to_string(i));
    std::vector<std::size_t> c0, c1;
    for (std::size_t i = 0; i < l; ++i) c0.push_back(i);
    for (std::size_t i = l; i < n; ++i) c1.push_back(i);

    std::vector<Edge> order;
    auto ring = [&](const std::vector<std::size_t> &ids) {
        if (ids.size() == 2) order.push_back(make_edge(ids[0], ids[1]));
        if (ids.size() < 3) return;
        for (std::size_t k = 0; k < ids.size(); ++k)
            order.push_back(make_edge(ids[k], ids[(k + 1) % ids.size()]));
    };
    ring(c0);
    ring(c1);
    for (std::size_t a = 0; a < i0; ++a)
        for (std::size_t b = 0; b < i1; ++b) order.push_back(make_edge(c0[a], c1[b]));

    SplitMix64 rng(seed);
    std::map<Edge, double> couplings;
    for (const auto &e : order) couplings[e] = (rng.next() >> 63) ? -1.0 : 1.0;

    auto names = [&](const std::vector<std::size_t> &ids, std::size_t count) {
        json a = json::array();
        for (std::size_t k = 0; k < count; ++k) a.push_back(labels[ids[k]]);
        return a;
    };
    json meta = {{"family", "sparse_network"},
                 {"N", n},
                 {"l", l},
                 {"i0", i0},
                 {"i1", i1},
                 {"intra_topology", "ring"},
                 {"prng", "splitmix64"},
                 {"clusters", json::array({names(c0, c0.size()), names(c1, c1.size())})},
                 {"interface", json::array({names(c0, i0), names(c1, i1)})}};
    return IsingProblem("sparse_network_" + std::to_string(n) + "_" + std::to_string(l) + "_" +
                            std::to_string(i0) + "_" + std::to_string(i1),
                        std::move(labels), std::vector<double>(n, 0.0), std::move(couplings), seed,
                        std::move(meta));
}

/// Complete graph on four qubits a, b, c, d with a uniform coupling.
[[nodiscard]] inline IsingProblem generate_k4(double j = 1.0) {
    std::map<Edge, double> couplings;
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = a + 1; b < 4; ++b) couplings[{a, b}] = j;
    return IsingProblem("K4", {"a", "b", "c", "d"}, std::vector<double>(4, 0.0), std::move(couplings),
                        std::nullopt, json{{"family", "k4"}, {"J", j}});
}

/// Triangle a, b, c with explicit couplings.
[[nodiscard]] inline IsingProblem generate_triangle(double j_ab, double j_ac, double j_bc) {
    std::map<Edge, double> couplings{{{0, 1}, j_ab}, {{0, 2}, j_ac}, {{1, 2}, j_bc}};
    return IsingProblem("triangle", {"a", "b", "c"}, std::vector<double>(3, 0.0), std::move(couplings),
                        std::nullopt, json{{"family", "triangle"}});
}

} // namespace dqa
