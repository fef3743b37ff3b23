#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "evolution.hpp"
#include "noise.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace dqa {

/// f_k = <Psi| D_k |Psi>, where D_k averages the runs with exactly k telegates
/// replaced by the fault branch.
struct FaultLevels {
    std::size_t m_d = 0;
    double f1 = 0.0;
    std::vector<double> per_position;
    std::optional<double> f2;
    std::size_t f2_patterns = 0;
    bool f2_sampled = false;
};

struct FaultOptions {
    bool second_order = false;
    std::size_t max_pairs = 2000;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

/// beta = <Psi| D_1 |Psi>, averaged over the M_D single-fault positions.
[[nodiscard]] inline FaultLevels measure_fault_levels(const Partition &p, const TrotterPlan &plan,
                                                      const FaultOptions &opt = {}) {
    if (plan.m_d == 0) throw DomainError("beta is undefined for a plan without telegates");
    const auto psi0 = prepare_initial_state(p);
    const auto ideal = run_trotter_ideal(p, plan, psi0).statevector();
    const DensityMatrix rho0(psi0);
    FaultLevels out;
    out.m_d = plan.m_d;
    out.per_position.resize(plan.m_d);
    parallel_for(plan.m_d, opt.threads, [&](std::size_t j) {
        const auto rho = run_density(plan, rho0, [j](std::size_t i) { return i == j ? 0.0 : 1.0; });
        out.per_position[j] = inner_fidelity(rho, ideal);
    });
    for (double v : out.per_position) out.f1 += v;
    out.f1 /= static_cast<double>(plan.m_d);

    if (opt.second_order && plan.m_d >= 2) {
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        const std::size_t total = plan.m_d * (plan.m_d - 1) / 2;
        if (total <= opt.max_pairs) {
            for (std::size_t i = 0; i < plan.m_d; ++i)
                for (std::size_t j = i + 1; j < plan.m_d; ++j) pairs.emplace_back(i, j);
        } else {
            CounterRng rng(opt.seed, 0x6632);
            while (pairs.size() < opt.max_pairs) {
                const auto i = static_cast<std::size_t>(rng.next() % plan.m_d);
                const auto j = static_cast<std::size_t>(rng.next() % plan.m_d);
                if (i != j) pairs.emplace_back(std::min(i, j), std::max(i, j));
            }
            out.f2_sampled = true;
        }
        std::vector<double> vals(pairs.size());
        parallel_for(pairs.size(), opt.threads, [&](std::size_t k) {
            const auto [a, b] = pairs[k];
            const auto rho = run_density(plan, rho0, [a, b](std::size_t i) { return i == a || i == b ? 0.0 : 1.0; });
            vals[k] = inner_fidelity(rho, ideal);
        });
        double acc = 0.0;
        for (double v : vals) acc += v;
        out.f2 = acc / static_cast<double>(vals.size());
        out.f2_patterns = vals.size();
    }
    return out;
}

[[nodiscard]] inline double measure_beta_direct(const Partition &p, const TrotterPlan &plan, std::size_t threads = 1) {
    FaultOptions opt;
    opt.threads = threads;
    const double beta = measure_fault_levels(p, plan, opt).f1;
    if (!(beta < 1.0 - 1e-12)) throw DomainError("measured beta reached 1: faults leave the output unchanged");
    return beta;
}

struct FitPoint {
    double delta = 0.0;
    double p = 0.0;
    double sigma = 0.0;
};

struct BetaFit {
    double beta_hat = 0.0;
    double residual = 0.0;
    double floor = 0.0;
    std::size_t used = 0;
};

namespace detail {

inline double beta_objective(const std::vector<FitPoint> &pts, std::uint64_t m_d, double beta) {
    double acc = 0.0;
    for (const auto &pt : pts) {
        const double r = std::log(pt.p) - static_cast<double>(m_d) * std::log1p(-4.0 * pt.delta * (1.0 - beta) / 3.0);
        acc += r * r;
    }
    return acc;
}

} // namespace detail

/// Least-squares fit of log p against M_D log(1 - 4 delta (1 - beta) / 3) over
/// beta in [0, 1): a uniform grid followed by golden-section refinement.
/// Points with p below `floor` are excluded.
[[nodiscard]] inline BetaFit fit_beta(const std::vector<FitPoint> &curve, std::uint64_t m_d, double floor) {
    std::vector<FitPoint> pts;
    for (const auto &pt : curve) {
        if (!(pt.delta >= 0.0 && pt.delta <= 0.75)) throw DomainError("fit point has delta outside [0, 3/4]");
        if (pt.p > floor && pt.p > 0.0) pts.push_back(pt);
    }
    if (pts.size() < 3) throw DomainError("beta fit needs at least 3 points above the floor");
    if (m_d == 0) throw DomainError("beta fit needs M_D > 0");

    constexpr std::size_t grid = 4000;
    const double upper = 1.0 - 1e-12;
    std::size_t best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid; ++i) {
        const double v = detail::beta_objective(pts, m_d, static_cast<double>(i) / grid);
        if (v < best_val) best_val = v, best = i;
    }
    double lo = best == 0 ? 0.0 : static_cast<double>(best - 1) / grid;
    double hi = std::min(upper, static_cast<double>(best + 1) / grid);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
    double fc = detail::beta_objective(pts, m_d, c), fd = detail::beta_objective(pts, m_d, d);
    while (hi - lo > 1e-13) {
        if (fc < fd) {
            hi = d, d = c, fd = fc;
            c = hi - g * (hi - lo);
            fc = detail::beta_objective(pts, m_d, c);
        } else {
            lo = c, c = d, fc = fd;
            d = lo + g * (hi - lo);
            fd = detail::beta_objective(pts, m_d, d);
        }
    }
    double beta = 0.5 * (lo + hi);
    for (double edge : {0.0, static_cast<double>(best) / grid})
        if (detail::beta_objective(pts, m_d, edge) < detail::beta_objective(pts, m_d, beta)) beta = edge;
    BetaFit fit;
    fit.beta_hat = beta;
    fit.residual = std::sqrt(detail::beta_objective(pts, m_d, beta) / static_cast<double>(pts.size()));
    fit.floor = floor;
    fit.used = pts.size();
    return fit;
}

[[nodiscard]] inline json fit_to_json(const BetaFit &fit, std::uint64_t m_d, const std::vector<FitPoint> &points) {
    json pts = json::array();
    for (const auto &p : points) pts.push_back(json::array({p.delta, p.p, p.sigma}));
    return {{"M_D", m_d}, {"points", pts}, {"beta_hat", fit.beta_hat}, {"residual", fit.residual},
            {"floor", fit.floor}, {"used", fit.used}};
}

} // namespace dqa
