#include "catch_amalgamated.hpp"
#include "helpers.hpp"

using namespace dqa;
using Catch::Matchers::WithinAbs;

namespace {

// Term key over register labels, for comparing term multisets.
using TermKey = std::tuple<char, std::vector<std::string>, std::string>;

std::multimap<TermKey, double> keyed(const TermList &terms, const std::vector<std::string> &labels) {
    std::multimap<TermKey, double> out;
    for (const auto &t : terms) {
        std::vector<std::string> q;
        for (auto i : t.qubits) q.push_back(labels[i]);
        std::sort(q.begin(), q.end());
        out.emplace(TermKey{t.axis == Axis::X ? 'X' : 'Z', q, std::string(to_string(t.tag))}, t.coefficient);
    }
    return out;
}

Partition triangle_vertex_split(double j_ab = 1.0, double j_ac = -0.5, double j_bc = 0.75) {
    return split_vertices(generate_triangle(j_ab, j_ac, j_bc), {{"c", {0, 1}}}, {{"a", 0}, {"b", 1}});
}

} // namespace

TEST_CASE("edge split of the triangle with c beside a") {
    const auto tri = generate_triangle(1.0, -0.5, 0.75);
    const auto p = split_edges(tri, std::map<std::string, std::size_t>{{"a", 0}, {"b", 1}, {"c", 0}});
    const auto nl = keyed(p.nonlocal_terms, p.labels);
    REQUIRE(nl.size() == 2);
    CHECK(nl.find({'Z', {"a", "b"}, "PROBLEM"})->second == 1.0);
    CHECK(nl.find({'Z', {"b", "c"}, "PROBLEM"})->second == 0.75);
    const auto loc = keyed(p.local_terms, p.labels);
    CHECK(loc.count({'X', {"a"}, "DRIVER"}) == 1);
    CHECK(loc.find({'Z', {"a", "c"}, "PROBLEM"})->second == -0.5);
    CHECK_NOTHROW(p.validate());
}

TEST_CASE("edge split onto one node is the identity") {
    const auto chain = generate_spin_chain(6, 3);
    const auto p = identity_partition(chain);
    CHECK(p.nonlocal_terms.empty());
    TermList all = build_driver_terms(chain);
    const auto prob = build_problem_terms(chain);
    all.insert(all.end(), prob.begin(), prob.end());
    CHECK(keyed(p.local_terms, p.labels) == keyed(all, chain.labels()));
}

TEST_CASE("edge split round trip reproduces the source Hamiltonian") {
    std::mt19937_64 rng(1);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto prob = generate_sparse_network(7, 3, 3, 2, seed);
        std::vector<std::size_t> assign(7);
        for (auto &a : assign) a = rng() % 3;
        const auto p = split_edges(prob, assign);
        TermList src = build_driver_terms(prob);
        const auto pt = build_problem_terms(prob);
        src.insert(src.end(), pt.begin(), pt.end());
        CHECK(keyed(p.all_terms(), p.labels) == keyed(src, prob.labels()));
        for (const auto &t : p.nonlocal_terms) CHECK(p.nodes_of(t).size() >= 2);
        for (const auto &t : p.local_terms) CHECK(p.nodes_of(t).size() == 1);
    }
}

TEST_CASE("edge split needs every qubit") {
    CHECK_THROWS_AS(split_edges(generate_triangle(1, 1, 1), std::map<std::string, std::size_t>{{"a", 0}, {"b", 1}}),
                    SemanticError);
}

TEST_CASE("vertex split of the triangle") {
    const auto p = triangle_vertex_split();
    REQUIRE(p.size() == 4);
    CHECK(p.labels == std::vector<std::string>{"a", "b", "c_A", "c_B"});
    const auto nl = keyed(p.nonlocal_terms, p.labels);
    REQUIRE(nl.size() == 2);
    CHECK(nl.find({'X', {"c_A", "c_B"}, "DRIVER"})->second == 1.0);
    CHECK(nl.find({'Z', {"a", "b"}, "PROBLEM"})->second == 1.0);
    const auto loc = keyed(p.local_terms, p.labels);
    REQUIRE(loc.size() == 4);
    CHECK(loc.count({'X', {"a"}, "DRIVER"}) == 1);
    CHECK(loc.count({'X', {"b"}, "DRIVER"}) == 1);
    CHECK(loc.find({'Z', {"a", "c_A"}, "PROBLEM"})->second == -0.5);
    CHECK(loc.find({'Z', {"b", "c_B"}, "PROBLEM"})->second == 0.75);
    for (const auto &t : p.local_terms) CHECK(p.nodes_of(t).size() == 1);
}

TEST_CASE("vertex split shares the field over copies") {
    const IsingProblem prob("iso", {"q", "r"}, {0.6, 0.0}, {});
    const auto p = split_vertices(prob, {{"q", {0, 1, 2}}}, {{"r", 0}});
    TermList z, xxx;
    for (const auto &t : p.all_terms()) {
        if (t.axis == Axis::Z) z.push_back(t);
        if (t.axis == Axis::X && t.qubits.size() == 3) xxx.push_back(t);
    }
    REQUIRE(z.size() == 3);
    for (const auto &t : z) CHECK_THAT(t.coefficient, WithinAbs(0.2, 1e-15));
    REQUIRE(xxx.size() == 1);
    CHECK(xxx[0].tag == ScheduleTag::Driver);
}

TEST_CASE("vertex split rejects bad plans") {
    const auto tri = generate_triangle(1, 1, 1);
    CHECK_THROWS_AS(split_vertices(tri, {{"c", {0}}}, {{"a", 0}, {"b", 1}}), SemanticError);
    CHECK_THROWS_AS(split_vertices(tri, {{"c", {0, 1}}}, {{"a", 0}, {"b", 2}}), SemanticError);
    CHECK_THROWS_AS(split_vertices(tri, {{"c", {0, 1}}}, {{"a", 0}, {"b", 1}, {"c", 0}}), SemanticError);
}

TEST_CASE("vertex split Z sector contracts to the source H_F") {
    const auto models = build_comparison_models(-2.0, 1.0);
    for (const auto *p : {&models.d0.partition, &models.d1.partition}) {
        const auto idx = detail::aligned_indices(*p);
        const auto split = diagonal_energies(p->problem_terms(), p->size());
        for (std::uint64_t x = 0; x < idx.size(); ++x) CHECK_THAT(split[idx[x]], WithinAbs(p->source.energy(x), 1e-12));
    }
}

TEST_CASE("initial states") {
    SECTION("no duplications") {
        const auto p = identity_partition(generate_triangle(1, 1, 1));
        const auto psi = prepare_initial_state(p);
        Vector minus(2);
        minus << 1, -1;
        minus /= std::sqrt(2.0);
        const Vector expect = oracle::kron_ops({minus, minus, minus});
        CHECK((psi.amplitudes() - expect).cwiseAbs().maxCoeff() < 1e-15);
        for (const auto &s : initial_state_spec(p)) CHECK(s.kind == StatePreparation::Kind::Minus);
    }
    SECTION("pair duplication gives Phi- on the copies") {
        const IsingProblem prob("one", {"q"}, {0.0}, {});
        const auto p = split_vertices(prob, {{"q", {0, 1}}}, {});
        const auto psi = prepare_initial_state(p);
        CHECK((psi.amplitudes() - bell_state(BellState::PhiMinus).amplitudes()).cwiseAbs().maxCoeff() < 1e-15);
    }
    SECTION("three copies give GHZ-") {
        const IsingProblem prob("one", {"q"}, {0.0}, {});
        const auto p = split_vertices(prob, {{"q", {0, 1, 2}}}, {});
        const auto psi = prepare_initial_state(p);
        Vector expect = Vector::Zero(8);
        expect[0] = 1.0 / std::sqrt(2.0);
        expect[7] = -1.0 / std::sqrt(2.0);
        CHECK((psi.amplitudes() - expect).cwiseAbs().maxCoeff() < 1e-15);
        const auto spec = initial_state_spec(p);
        REQUIRE(spec.size() == 1);
        CHECK(spec[0].kind == StatePreparation::Kind::GhzMinus);
    }
    SECTION("the initial state is the ground state of the split driver") {
        const auto p = triangle_vertex_split();
        const auto psi = prepare_initial_state(p);
        CHECK_THAT(expectation(psi, p.all_terms(), 0.0), WithinAbs(-3.0, 1e-12));
        const Matrix h0 = oracle::hamiltonian(p.all_terms(), p.size(), 0.0);
        Eigen::SelfAdjointEigenSolver<Matrix> es(h0);
        CHECK_THAT(es.eigenvalues()[0], WithinAbs(-3.0, 1e-12));
    }
}

TEST_CASE("logical projection") {
    SECTION("no duplications is the identity") {
        std::mt19937_64 rng(2);
        const auto p = identity_partition(generate_triangle(1, 1, 1));
        const StateVector psi(oracle::random_state(3, rng));
        const auto proj = logical_projection(p, psi);
        CHECK_THAT(proj.aligned_probability, WithinAbs(1.0, 1e-14));
        CHECK((proj.state.amplitudes() - psi.amplitudes()).cwiseAbs().maxCoeff() < 1e-14);
    }
    SECTION("fully misaligned pair") {
        const IsingProblem prob("one", {"q"}, {0.0}, {});
        const auto p = split_vertices(prob, {{"q", {0, 1}}}, {});
        const StateVector psi(Vector(Vector::Unit(4, 1)));
        CHECK_THROWS_AS(logical_projection(p, psi), DomainError);
        CHECK_THAT(misaligned_population(p, psi), WithinAbs(1.0, 1e-15));
    }
    SECTION("ideal vertex-split annealing stays aligned") {
        const auto p = triangle_vertex_split();
        const auto r = anneal_reference(p, 10.0);
        CHECK_THAT(r.aligned_probability, WithinAbs(1.0, 1e-9));
    }
    SECTION("density matrices renormalize") {
        const IsingProblem prob("one", {"q"}, {0.0}, {});
        const auto p = split_vertices(prob, {{"q", {0, 1}}}, {});
        const auto proj = logical_projection(p, DensityMatrix::maximally_mixed(2));
        CHECK_THAT(proj.aligned_probability, WithinAbs(0.5, 1e-15));
        CHECK(oracle::distance(proj.state.matrix(), Matrix::Identity(2, 2) / 2.0) < 1e-15);
    }
}

TEST_CASE("split plans from JSON") {
    const auto tri = generate_triangle(1, 1, 1);
    const auto p = partition_from_plan(
        tri, json{{"method", "vertex"}, {"assignment", {{"a", 0}, {"b", 1}}}, {"duplicate", {{"c", {0, 1}}}}});
    CHECK(p.kind == SplitKind::Vertex);
    CHECK(p.size() == 4);
    CHECK_THROWS_AS(partition_from_plan(tri, json{{"method", "diagonal"}}), ConfigError);
    CHECK_THROWS_AS(partition_from_plan(tri, json{{"method", "edge"}, {"extra", 1}}), ConfigError);
    const auto doc = partition_to_json(p);
    for (const char *k : {"nodes", "register", "local_terms", "nonlocal_terms", "duplications", "source"})
        CHECK(doc.contains(k));
}

TEST_CASE("comparison models: four nonlocal connections each") {
    const auto m = build_comparison_models(-2.0, 1.0);
    CHECK(m.d0.partition.nonlocal_terms.size() == 4);
    CHECK(m.d1.partition.nonlocal_terms.size() == 4);
    for (const auto &t : m.d1.partition.nonlocal_terms) CHECK(t.axis == Axis::Z);
    std::size_t xx = 0;
    for (const auto &t : m.d0.partition.nonlocal_terms) xx += t.axis == Axis::X;
    CHECK(xx == 4);
}
