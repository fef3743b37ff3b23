#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "metrics.hpp"
#include "noise.hpp"
#include "parallel.hpp"
#include "partition.hpp"
#include "rng.hpp"
#include "state.hpp"

namespace dqa {

// Read-out

/// Logical read-out of a register state: weight on the aligned subspace and,
/// conditioned on alignment, the source H_F energy and ground-state population.
struct Readout {
    double aligned = 1.0;
    double energy = 0.0;
    double p0 = 0.0;
};

/// Precomputed logical energies and aligned register indices for a partition.
class ReadoutMap {
  public:
    explicit ReadoutMap(const Partition &p)
        : index_(detail::aligned_indices(p)), energy_(diagonal_energies(build_problem_terms(p.source), p.source.size())),
          gs_(ground_state_space(energy_, p.source.size())) {
        in_gs_.assign(index_.size(), false);
        for (auto b : gs_.basis_states) in_gs_[b] = true;
    }

    [[nodiscard]] const GroundStateSpace &ground_states() const noexcept { return gs_; }

    /// `pop(r)` returns the population of register basis index r.
    template <class Pop> [[nodiscard]] Readout read_populations(Pop &&pop) const {
        double w = 0.0, e = 0.0, g = 0.0;
        for (std::size_t x = 0; x < index_.size(); ++x) {
            const double px = pop(index_[x]);
            w += px;
            e += px * energy_[x];
            if (in_gs_[x]) g += px;
        }
        if (w < projection_floor) throw DomainError("degenerate projection: no weight on the aligned subspace");
        return {std::min(w, 1.0), e / w, std::clamp(g / w, 0.0, 1.0)};
    }

    [[nodiscard]] Readout read(const StateVector &psi) const {
        return read_populations([&](std::uint64_t r) { return psi.probability(r); });
    }
    [[nodiscard]] Readout read(const DensityMatrix &rho) const {
        return read_populations([&](std::uint64_t r) { return rho.population(r); });
    }

  private:
    std::vector<std::uint64_t> index_;
    std::vector<double> energy_;
    GroundStateSpace gs_;
    std::vector<bool> in_gs_;
};

struct Checkpoint {
    double t = 0.0;
    double misaligned = 0.0;
};

struct EvolutionResult {
    std::variant<StateVector, DensityMatrix> final_state;
    double energy = 0.0;
    double fidelity_gs = 0.0;
    double aligned_probability = 1.0;
    std::size_t telegates_used = 0;
    double wall_time = 0.0;
    std::size_t internal_steps = 0;
    std::vector<Checkpoint> checkpoints;

    [[nodiscard]] const StateVector &statevector() const { return std::get<StateVector>(final_state); }
    [[nodiscard]] const DensityMatrix &density() const { return std::get<DensityMatrix>(final_state); }
};

namespace detail {

struct Stopwatch {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    [[nodiscard]] double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

inline double misaligned(const Partition &p, const StateVector &psi) { return misaligned_population(p, psi); }

inline void fill_readout(EvolutionResult &r, const Readout &o) {
    r.energy = o.energy;
    r.fidelity_gs = o.p0;
    r.aligned_probability = o.aligned;
}

/// Matrix-free H(s) = (1 - s) D + s P + S with the diagonal parts cached.
class ScheduledHamiltonian {
  public:
    ScheduledHamiltonian(const TermList &terms, std::size_t n) : n_(n) {
        const std::size_t d = std::size_t{1} << n;
        diag_problem_.assign(d, 0.0);
        diag_static_.assign(d, 0.0);
        for (const auto &t : terms) {
            if (t.axis == Axis::X || t.tag == ScheduleTag::Driver) {
                offdiag_.push_back(t);
            } else {
                auto &dst = t.tag == ScheduleTag::Problem ? diag_problem_ : diag_static_;
                const auto m = t.mask();
                for (std::uint64_t b = 0; b < d; ++b) dst[b] += (std::popcount(b & m) & 1) ? -t.coefficient : t.coefficient;
            }
        }
    }

    /// out = -i H(s) y.
    void derivative(double s, const Vector &y, Vector &out) const {
        const auto d = static_cast<std::uint64_t>(y.size());
        for (std::uint64_t b = 0; b < d; ++b)
            out[static_cast<Eigen::Index>(b)] = (s * diag_problem_[b] + diag_static_[b]) * y[static_cast<Eigen::Index>(b)];
        for (const auto &t : offdiag_) {
            const double w = t.weighted(s);
            if (w == 0.0) continue;
            const auto m = t.mask();
            if (t.axis == Axis::X) {
                for (std::uint64_t b = 0; b < d; ++b)
                    out[static_cast<Eigen::Index>(b)] += w * y[static_cast<Eigen::Index>(b ^ m)];
            } else {
                for (std::uint64_t b = 0; b < d; ++b)
                    out[static_cast<Eigen::Index>(b)] +=
                        ((std::popcount(b & m) & 1) ? -w : w) * y[static_cast<Eigen::Index>(b)];
            }
        }
        out *= cplx(0.0, -1.0);
    }

    [[nodiscard]] std::size_t num_qubits() const noexcept { return n_; }

  private:
    std::size_t n_;
    std::vector<double> diag_problem_, diag_static_;
    TermList offdiag_;
};

/// Fixed-step classical RK4 from 0 to t_F with `steps` steps.
inline Vector rk4(const ScheduledHamiltonian &h, Vector y, double t_f, std::size_t steps,
                  const std::function<void(double, const Vector &)> &observe = {}, std::size_t observe_every = 0) {
    const double dt = t_f / static_cast<double>(steps);
    Vector k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size()), tmp(y.size());
    for (std::size_t i = 0; i < steps; ++i) {
        const double t = dt * static_cast<double>(i);
        h.derivative(t / t_f, y, k1);
        tmp = y + 0.5 * dt * k1;
        h.derivative((t + 0.5 * dt) / t_f, tmp, k2);
        tmp = y + 0.5 * dt * k2;
        h.derivative((t + 0.5 * dt) / t_f, tmp, k3);
        tmp = y + dt * k3;
        h.derivative((t + dt) / t_f, tmp, k4);
        y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (observe && observe_every && ((i + 1) % observe_every == 0 || i + 1 == steps)) observe(t + dt, y);
    }
    return y;
}

} // namespace detail

struct ReferenceOptions {
    double tolerance = 1e-9;
    std::size_t max_steps = std::size_t{1} << 22;
    std::size_t checkpoints = 0;
};

/// Continuous annealing under the full H(t) = (1 - t/t_F) H_0 + (t/t_F) H_F of
/// the partitioned register (local and nonlocal terms together). RK4 with step
/// doubling until the final H_F energy moves by less than the tolerance.
[[nodiscard]] inline EvolutionResult anneal_reference(const Partition &p, double t_f, const ReferenceOptions &opt = {}) {
    if (!(t_f > 0.0)) throw DomainError("t_F must be positive");
    detail::Stopwatch clock;
    const detail::ScheduledHamiltonian h(p.all_terms(), p.size());
    const auto psi0 = prepare_initial_state(p);
    const auto problem = p.problem_terms();
    auto energy_of = [&](const Vector &y) { return expectation(StateVector(y, p.labels), problem, 1.0); };

    std::size_t steps = std::max<std::size_t>(8, static_cast<std::size_t>(std::ceil(4.0 * t_f)));
    Vector coarse = detail::rk4(h, psi0.amplitudes(), t_f, steps);
    double e_coarse = energy_of(coarse);
    for (;;) {
        if (2 * steps > opt.max_steps)
            throw ConvergenceError("reference integrator did not converge within " + std::to_string(opt.max_steps) +
                                   " steps");
        steps *= 2;
        std::vector<Checkpoint> cps;
        std::function<void(double, const Vector &)> observe;
        std::size_t every = 0;
        if (opt.checkpoints > 0) {
            every = std::max<std::size_t>(1, steps / opt.checkpoints);
            observe = [&](double t, const Vector &y) {
                cps.push_back({t, detail::misaligned(p, StateVector(y, p.labels))});
            };
        }
        Vector fine = detail::rk4(h, psi0.amplitudes(), t_f, steps, observe, every);
        const double e_fine = energy_of(fine);
        if (std::abs(e_fine - e_coarse) < opt.tolerance) {
            StateVector psi(std::move(fine), p.labels);
            psi.normalize();
            EvolutionResult r{psi};
            detail::fill_readout(r, ReadoutMap(p).read(psi));
            r.internal_steps = steps;
            r.checkpoints = std::move(cps);
            r.wall_time = clock.seconds();
            return r;
        }
        coarse = std::move(fine);
        e_coarse = e_fine;
    }
}

[[nodiscard]] inline EvolutionResult anneal_reference(const IsingProblem &problem, double t_f,
                                                      const ReferenceOptions &opt = {}) {
    return anneal_reference(identity_partition(problem), t_f, opt);
}

// Trotter plans

enum class LocalMode { Exact, Split };
enum class Endpoint { Left, Midpoint };

struct TrotterOptions {
    LocalMode local = LocalMode::Exact;
    Endpoint endpoint = Endpoint::Left;
};

[[nodiscard]] inline std::string to_string(LocalMode m) { return m == LocalMode::Exact ? "exact" : "split"; }
[[nodiscard]] inline std::string to_string(Endpoint e) { return e == Endpoint::Left ? "left" : "midpoint"; }

struct TrotterStep {
    double s = 0.0;
    std::vector<GateOp> ops;
    std::size_t telegates = 0;
};

struct TrotterPlan {
    std::size_t m = 0;
    double t_f = 0.0;
    double dt = 0.0;
    std::size_t num_qubits = 0;
    TrotterOptions options;
    std::vector<TrotterStep> steps;
    std::size_t m_d = 0;
};

namespace detail {

/// exp(-i dt H) for H the sum of `terms` restricted to `qubits` (dense).
inline Matrix node_propagator(const TermList &terms, const std::vector<std::size_t> &qubits, double s, double dt) {
    std::map<std::size_t, std::size_t> local;
    for (std::size_t i = 0; i < qubits.size(); ++i) local[qubits[i]] = i;
    TermList relabelled;
    for (const auto &t : terms) {
        std::vector<std::size_t> q;
        for (auto g : t.qubits) q.push_back(local.at(g));
        relabelled.emplace_back(t.coefficient, t.axis, std::move(q), t.tag);
    }
    const Matrix h = dense_hamiltonian(relabelled, qubits.size(), s);
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    const Vector phases = (es.eigenvalues().cast<cplx>() * cplx(0.0, -dt)).array().exp().matrix();
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

inline void append_split_group(std::vector<GateOp> &ops, TermList terms, double s, double dt) {
    sort_canonical(terms);
    for (const auto &t : terms) {
        const double w = t.weighted(s);
        if (w == 0.0) continue;
        ops.push_back(GateOp::pauli_exp(t, w * dt));
    }
}

} // namespace detail

inline constexpr std::size_t max_node_qubits = 10;

/// Compiles prod_k U_N(t_k, t_{k+1}) U_L(t_k, t_{k+1}). U_L is the exact node
/// propagator (LocalMode::Exact) or the ordered [DRIVER; PROBLEM] product of
/// term exponentials (LocalMode::Split). Each nonlocal two-qubit exponential
/// becomes CNOT(a->b) PHASE(2 w c dt)_b CNOT(a->b), conjugated by H (x) H for
/// X products; both CNOTs are telegates. Zero-weight factors are skipped.
[[nodiscard]] inline TrotterPlan compile_trotter_plan(const Partition &p, double t_f, std::size_t m,
                                                      const TrotterOptions &opt = {}) {
    if (m < 1) throw DomainError("Trotter step count must be positive");
    if (!(t_f > 0.0)) throw DomainError("t_F must be positive");
    for (const auto &t : p.nonlocal_terms)
        if (t.qubits.size() != 2)
            throw SemanticError("nonlocal terms longer than two qubits are not supported by the telegate compiler");
    TrotterPlan plan;
    plan.m = m;
    plan.t_f = t_f;
    plan.dt = t_f / static_cast<double>(m);
    plan.num_qubits = p.size();
    plan.options = opt;

    std::map<std::size_t, TermList> node_terms;
    for (const auto &t : p.local_terms) node_terms[p.owner.at(t.qubits.front())].push_back(t);
    auto nonlocal = p.nonlocal_terms;
    sort_canonical(nonlocal);

    for (std::size_t k = 0; k < m; ++k) {
        TrotterStep step;
        const double shift = opt.endpoint == Endpoint::Left ? 0.0 : 0.5;
        step.s = (static_cast<double>(k) + shift) / static_cast<double>(m);
        for (const auto &node : p.nodes) {
            auto it = node_terms.find(node.id);
            if (it == node_terms.end()) continue;
            if (opt.local == LocalMode::Split) {
                detail::append_split_group(step.ops, it->second, step.s, plan.dt);
                continue;
            }
            if (node.qubits.size() > max_node_qubits)
                throw CapacityError("node too large for the exact local propagator");
            bool any = false;
            for (const auto &t : it->second) any = any || t.weighted(step.s) != 0.0;
            if (!any) continue;
            step.ops.push_back(GateOp::dense(node.qubits, detail::node_propagator(it->second, node.qubits, step.s, plan.dt)));
        }
        for (const auto &t : nonlocal) {
            const double w = t.weighted(step.s);
            if (w == 0.0) continue;
            const auto q = t.sorted_qubits();
            const std::size_t a = q[0], b = q[1];
            if (t.axis == Axis::X) {
                step.ops.push_back(GateOp::h(a));
                step.ops.push_back(GateOp::h(b));
            }
            step.ops.push_back(GateOp::cnot(a, b, true));
            step.ops.push_back(GateOp::phase(b, 2.0 * w * plan.dt));
            step.ops.push_back(GateOp::cnot(a, b, true));
            if (t.axis == Axis::X) {
                step.ops.push_back(GateOp::h(a));
                step.ops.push_back(GateOp::h(b));
            }
            step.telegates += 2;
        }
        plan.m_d += step.telegates;
        plan.steps.push_back(std::move(step));
    }
    return plan;
}

/// M from t_F and dt; rejects ratios that are not integral.
[[nodiscard]] inline std::size_t steps_for(double t_f, double dt) {
    if (!(dt > 0.0)) throw DomainError("dt must be positive");
    const double ratio = t_f / dt;
    const double m = std::round(ratio);
    if (m < 1.0 || std::abs(ratio - m) > 1e-9 * std::max(1.0, ratio))
        throw DomainError("t_F / dt = " + std::to_string(ratio) + " is not a positive integer");
    return static_cast<std::size_t>(m);
}

[[nodiscard]] inline json plan_summary(const TrotterPlan &plan) {
    return {{"M", plan.m},
            {"t_F", plan.t_f},
            {"dt", plan.dt},
            {"M_D", plan.m_d},
            {"local_mode", to_string(plan.options.local)},
            {"endpoint", to_string(plan.options.endpoint)},
            {"telegate_template", "CNOT-PHASE-CNOT"}};
}

struct RunOptions {
    bool checkpoints = false;
};

/// Executes the plan on a pure state with perfect CNOTs in place of telegates.
[[nodiscard]] inline EvolutionResult run_trotter_ideal(const Partition &p, const TrotterPlan &plan,
                                                       StateVector psi, const RunOptions &opt = {}) {
    if (psi.num_qubits() != plan.num_qubits) throw SemanticError("initial state does not match the plan register");
    detail::Stopwatch clock;
    EvolutionResult r{StateVector{}};
    for (std::size_t k = 0; k < plan.steps.size(); ++k) {
        for (const auto &g : plan.steps[k].ops) {
            psi.apply(g);
            if (g.telegate) ++r.telegates_used;
        }
        if (opt.checkpoints)
            r.checkpoints.push_back({plan.dt * static_cast<double>(k + 1), detail::misaligned(p, psi)});
    }
    detail::fill_readout(r, ReadoutMap(p).read(psi));
    r.final_state = std::move(psi);
    r.wall_time = clock.seconds();
    return r;
}

[[nodiscard]] inline EvolutionResult run_trotter_ideal(const Partition &p, const TrotterPlan &plan,
                                                       const RunOptions &opt = {}) {
    return run_trotter_ideal(p, plan, prepare_initial_state(p), opt);
}

/// Density-matrix execution where telegate i uses Werner weight x_of(i);
/// x = 1 is a perfect CNOT and x = 0 the pure fault branch.
[[nodiscard]] inline DensityMatrix run_density(const TrotterPlan &plan, DensityMatrix rho,
                                               const std::function<double(std::size_t)> &x_of) {
    if (rho.num_qubits() != plan.num_qubits) throw SemanticError("initial state does not match the plan register");
    if (plan.num_qubits + 2 > max_density_qubits) throw CapacityError("register too large for exact-density mode");
    std::size_t index = 0;
    for (const auto &step : plan.steps)
        for (const auto &g : step.ops) {
            if (!g.telegate) {
                rho.apply(g);
                continue;
            }
            const double x = x_of(index++);
            if (x == 1.0)
                rho.apply(g);
            else
                rho = dcnot_channel(rho, g.targets[0], g.targets[1], BellResource::from_weight(x));
        }
    return rho;
}

struct NoisyMode {
    enum class Kind { ExactDensity, Trajectories } kind = Kind::ExactDensity;
    std::size_t trajectories = 0;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    [[nodiscard]] static NoisyMode exact() { return {}; }
    [[nodiscard]] static NoisyMode sampled(std::size_t count, std::uint64_t seed, std::size_t threads = 1) {
        return {Kind::Trajectories, count, seed, threads};
    }
};

struct TrajectoryRecord {
    double p_n = 0.0;
    double aligned = 0.0;
    double energy = 0.0;
    double p0 = 0.0;
};

struct NoisyResult {
    EvolutionResult evolution;
    double p_n = 0.0;
    double p_n_sigma = 0.0;
    double p0_sigma = 0.0;
    std::vector<TrajectoryRecord> trajectories;
};

/// Telegate-compiled evolution with every telegate replaced by the DCNOT
/// channel. p_N is the overlap of the noisy output with the ideal output.
[[nodiscard]] inline NoisyResult run_trotter_noisy(const Partition &p, const TrotterPlan &plan,
                                                   const BellResource &resource, const NoisyMode &mode,
                                                   const StateVector *ideal_output = nullptr) {
    detail::Stopwatch clock;
    const auto psi0 = prepare_initial_state(p);
    std::optional<StateVector> ideal_storage;
    if (!ideal_output) {
        ideal_storage = run_trotter_ideal(p, plan, psi0).statevector();
        ideal_output = &*ideal_storage;
    }
    const ReadoutMap readout(p);
    NoisyResult out{EvolutionResult{StateVector{}}};

    if (mode.kind == NoisyMode::Kind::ExactDensity) {
        auto rho = run_density(plan, DensityMatrix(psi0), [&](std::size_t) { return resource.x(); });
        out.p_n = std::clamp(inner_fidelity(rho, *ideal_output), 0.0, 1.0);
        detail::fill_readout(out.evolution, readout.read(rho));
        out.evolution.final_state = std::move(rho);
        out.evolution.telegates_used = plan.m_d;
        out.evolution.wall_time = clock.seconds();
        return out;
    }

    if (mode.trajectories < 1) throw DomainError("trajectory count must be at least 1");
    out.trajectories.resize(mode.trajectories);
    parallel_for(mode.trajectories, mode.threads, [&](std::size_t i) {
        CounterRng rng(mode.seed, i);
        StateVector psi = psi0;
        for (const auto &step : plan.steps)
            for (const auto &g : step.ops)
                if (g.telegate)
                    psi = dcnot_trajectory(psi, g.targets[0], g.targets[1], resource, rng);
                else
                    psi.apply(g);
        TrajectoryRecord rec;
        rec.p_n = inner_fidelity(psi, *ideal_output);
        rec.aligned = 1.0 - misaligned_population(p, psi);
        if (rec.aligned >= projection_floor) {
            const auto o = readout.read(psi);
            rec.aligned = o.aligned;
            rec.energy = o.energy * o.aligned;
            rec.p0 = o.p0 * o.aligned;
        }
        out.trajectories[i] = rec;
    });

    const auto n = static_cast<double>(mode.trajectories);
    double sp = 0.0, sp2 = 0.0, sw = 0.0, se = 0.0, s0 = 0.0, s02 = 0.0;
    for (const auto &t : out.trajectories) {
        sp += t.p_n;
        sp2 += t.p_n * t.p_n;
        sw += t.aligned;
        se += t.energy;
        s0 += t.p0;
        s02 += t.p0 * t.p0;
    }
    auto sem = [n](double s, double s2) {
        if (n < 2) return 0.0;
        const double mean = s / n;
        return std::sqrt(std::max(0.0, (s2 / n - mean * mean) * n / (n - 1.0)) / n);
    };
    out.p_n = sp / n;
    out.p_n_sigma = sem(sp, sp2);
    out.p0_sigma = sem(s0, s02);
    if (sw < projection_floor) throw DomainError("degenerate projection: no trajectory weight on the aligned subspace");
    out.evolution.aligned_probability = sw / n;
    out.evolution.energy = se / sw;
    out.evolution.fidelity_gs = s0 / sw;
    out.evolution.telegates_used = plan.m_d;
    out.evolution.wall_time = clock.seconds();
    return out;
}

} // namespace dqa
