#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "partition.hpp"
#include "problem.hpp"

namespace dqa {

struct ModelInstance {
    std::string name;
    IsingProblem problem;
    Partition partition;
};

struct ComparisonModels {
    ModelInstance a0, a1, d0, d1;
};

/// K4 embedded on a 3x3 square grid (qubit g = 3 r + c). Logical a sits at
/// the centre, b, c and d are chains; chain edges carry J_M, the six logical
/// edges carry J.
[[nodiscard]] inline IsingProblem generate_grid_k4(double j_m, double j = 1.0) {
    if (!(j_m < 0.0)) throw DomainError("chain coupling J_M must be negative");
    auto g = [](std::size_t r, std::size_t c) { return 3 * r + c; };
    std::vector<std::string> labels;
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) labels.push_back("g" + std::to_string(r) + std::to_string(c));
    std::map<Edge, double> couplings;
    for (auto [u, v] : {std::pair{g(0, 0), g(0, 1)}, {g(0, 1), g(0, 2)}, {g(1, 0), g(2, 0)}, {g(1, 2), g(2, 2)},
                        {g(2, 2), g(2, 1)}})
        couplings[make_edge(u, v)] = j_m;
    for (auto [u, v] : {std::pair{g(1, 1), g(0, 1)}, {g(1, 1), g(1, 0)}, {g(1, 1), g(1, 2)}, {g(0, 0), g(1, 0)},
                        {g(0, 2), g(1, 2)}, {g(2, 0), g(2, 1)}})
        couplings[make_edge(u, v)] = j;
    json chains = {{"a", {"g11"}}, {"b", {"g00", "g01", "g02"}}, {"c", {"g10", "g20"}}, {"d", {"g12", "g22", "g21"}}};
    return IsingProblem("K4_grid", std::move(labels), std::vector<double>(9, 0.0), std::move(couplings), std::nullopt,
                        json{{"family", "grid_k4"}, {"J", j}, {"J_M", j_m}, {"chains", chains}, {"topology", "square_grid_3x3"}});
}

/// A0: K4 with J = +1. A1: its square-grid embedding with chain coupling J_M.
/// D0: every vertex duplicated over nodes A and B, the 4-cycle a-b-c-d on A and
/// the diagonals on B, so the four nonlocal terms are the copy drivers.
/// D1: edge split {a, b} | {c, d}, four nonlocal couplings.
[[nodiscard]] inline ComparisonModels build_comparison_models(double j_m, double j = 1.0) {
    if (!(j_m < 0.0)) throw DomainError("chain coupling J_M must be negative");
    ComparisonModels m;
    const auto k4 = generate_k4(j);
    m.a0 = {"A0", k4, identity_partition(k4)};
    const auto grid = generate_grid_k4(j_m, j);
    m.a1 = {"A1", grid, identity_partition(grid)};
    std::map<std::string, std::vector<std::size_t>> all{{"a", {0, 1}}, {"b", {0, 1}}, {"c", {0, 1}}, {"d", {0, 1}}};
    std::map<Edge, std::size_t> placement{{{0, 1}, 0}, {{1, 2}, 0}, {{2, 3}, 0}, {{0, 3}, 0}, {{0, 2}, 1}, {{1, 3}, 1}};
    m.d0 = {"D0", k4, split_vertices(k4, all, {}, placement)};
    m.d1 = {"D1", k4, split_edges(k4, std::vector<std::size_t>{0, 0, 1, 1})};
    return m;
}

/// Model section of a config:
///   {"family": "spin_chain", "N": 4, "s": 2}
///   {"family": "sparse_network", "N": 7, "l": 3, "i0": 3, "i1": 2, "seed": 1}
///   {"family": "k4", "J": 1}
///   {"family": "triangle", "J": [J_ab, J_ac, J_bc]}
///   {"family": "grid_k4", "J_M": -2}
///   {"family": "inline", "problem": {...problem document...}}
[[nodiscard]] inline IsingProblem model_from_json(const json &m) {
    if (!m.is_object() || !m.contains("family")) throw ConfigError("model needs a \"family\"");
    const auto family = m["family"].get<std::string>();
    try {
        if (family == "spin_chain") return generate_spin_chain(m.at("N").get<std::size_t>(), m.at("s").get<std::size_t>());
        if (family == "sparse_network")
            return generate_sparse_network(m.at("N").get<std::size_t>(), m.at("l").get<std::size_t>(),
                                           m.at("i0").get<std::size_t>(), m.at("i1").get<std::size_t>(),
                                           m.at("seed").get<std::uint64_t>());
        if (family == "k4") return generate_k4(m.value("J", 1.0));
        if (family == "triangle") {
            const auto j = m.value("J", std::vector<double>{1.0, 1.0, 1.0});
            if (j.size() != 3) throw ConfigError("triangle needs three couplings");
            return generate_triangle(j[0], j[1], j[2]);
        }
        if (family == "grid_k4") return generate_grid_k4(m.at("J_M").get<double>(), m.value("J", 1.0));
        if (family == "inline") return problem_from_json(m.at("problem"));
    } catch (const json::exception &e) {
        throw ConfigError("model: " + std::string(e.what()));
    }
    throw ConfigError("unknown model family '" + family + "'");
}

} // namespace dqa
