#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dqa/dqa.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_runtime = 1;
constexpr int exit_config = 2;
constexpr int exit_partial = 3;
constexpr double partial_threshold = 0.10;

struct Invocation {
    std::string subcommand;
    std::string config_path;
    std::string out;
    std::optional<std::size_t> threads;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> argv;
};

struct Outcome {
    int code = exit_ok;
    std::size_t total = 0, failed = 0;
};

// Everything a subcommand needs after the config is loaded and validated.
struct Context {
    Invocation inv;
    json config;
    std::string prefix;
    std::vector<std::string> outputs;

    std::string path(const std::string &suffix) {
        auto p = prefix + suffix;
        outputs.push_back(p);
        return p;
    }
    void write_text(const std::string &suffix, const std::string &text) {
        const auto p = path(suffix);
        ensure_parent(p);
        std::ofstream os(p, std::ios::binary);
        if (!os) throw dqa::ConfigError("cannot write " + p);
        os << text;
    }
    void write_json(const std::string &suffix, const json &doc) { write_text(suffix, doc.dump(2) + "\n"); }
    static void ensure_parent(const std::string &p) {
        const auto parent = fs::path(p).parent_path();
        if (!parent.empty()) fs::create_directories(parent);
    }
};

json read_json_file(const std::string &path) {
    if (path.empty()) throw dqa::ConfigError("--config is required");
    if (!fs::exists(path)) throw dqa::ConfigError("config file not found: " + path);
    std::ifstream is(path);
    if (!is) throw dqa::ConfigError("cannot open config file: " + path);
    try {
        return json::parse(is);
    } catch (const json::parse_error &e) {
        throw dqa::ParseError(path + ": " + e.what());
    }
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double number_or(const json &j, const char *key, double fallback) {
    return j.contains(key) ? j[key].get<double>() : fallback;
}

dqa::TrotterOptions trotter_options(const json &c) {
    dqa::TrotterOptions o;
    const auto local = c.value("local_mode", std::string("exact"));
    if (local != "exact" && local != "split") throw dqa::ConfigError("local_mode must be exact or split");
    o.local = local == "exact" ? dqa::LocalMode::Exact : dqa::LocalMode::Split;
    const auto endpoint = c.value("endpoint", std::string("left"));
    if (endpoint != "left" && endpoint != "midpoint") throw dqa::ConfigError("endpoint must be left or midpoint");
    o.endpoint = endpoint == "left" ? dqa::Endpoint::Left : dqa::Endpoint::Midpoint;
    return o;
}

void reject_unknown(const json &c, const std::set<std::string> &known) {
    if (!c.is_object()) throw dqa::ConfigError("config must be a JSON object");
    for (const auto &[k, v] : c.items())
        if (!known.contains(k)) throw dqa::ConfigError("unknown config field '" + k + "'");
}

std::size_t steps_of(const json &c, double t_f) {
    if (c.contains("M") == c.contains("dt")) throw dqa::ConfigError("config needs exactly one of M or dt");
    const std::size_t m = c.contains("M") ? c["M"].get<std::size_t>() : dqa::steps_for(t_f, c["dt"].get<double>());
    if (m < 1) throw dqa::ConfigError("M must be positive");
    return m;
}

double positive(const json &c, const char *key) {
    if (!c.contains(key) || !c[key].is_number()) throw dqa::ConfigError(std::string("config needs a numeric ") + key);
    const double v = c[key].get<double>();
    if (!(v > 0.0)) throw dqa::ConfigError(std::string(key) + " must be positive");
    return v;
}

json evolution_to_json(const dqa::EvolutionResult &r) {
    json cp = json::array();
    for (const auto &c : r.checkpoints) cp.push_back({{"t", c.t}, {"misaligned", c.misaligned}});
    return {{"energy", r.energy},
            {"fidelity_gs", r.fidelity_gs},
            {"aligned_probability", r.aligned_probability},
            {"telegates_used", r.telegates_used},
            {"internal_steps", r.internal_steps},
            {"wall_time", r.wall_time},
            {"checkpoints", cp}};
}

Outcome outcome_of(const dqa::SweepResult &res) {
    Outcome o;
    o.total = res.rows.size();
    o.failed = res.failed;
    if (res.failure_fraction() > partial_threshold) o.code = exit_partial;
    return o;
}

// Rendering

dqa::HeatmapSpec heatmap_spec(const json &r) {
    dqa::HeatmapSpec s;
    s.x = r.value("x", s.x);
    s.y = r.value("y", s.y);
    s.value = r.value("value", s.value);
    s.log_x = r.value("log_x", s.log_x);
    s.log_y = r.value("log_y", s.log_y);
    s.log_value = r.value("log_value", s.log_value);
    s.title = r.value("title", s.title);
    if (r.contains("vmin")) s.vmin = r["vmin"].get<double>();
    if (r.contains("vmax")) s.vmax = r["vmax"].get<double>();
    return s;
}

dqa::CurveSpec curve_spec(const json &r) {
    dqa::CurveSpec s;
    s.x = r.value("x", s.x);
    s.y = r.value("y", s.y);
    if (r.contains("group")) s.group = r["group"].get<std::vector<std::string>>();
    s.log_x = r.value("log_x", s.log_x);
    s.log_y = r.value("log_y", s.log_y);
    s.title = r.value("title", s.title);
    s.x_label = r.value("x_label", s.x_label);
    s.y_label = r.value("y_label", s.y_label);
    return s;
}

// Dashed reference line for the convergence step. On an (M, t_F) plane it is
// M = t_F / dt_M, on a (dt, t_F) plane a vertical line.
std::optional<dqa::Series> dt_m_overlay(const dqa::SweepResult &res, const dqa::HeatmapSpec &s) {
    double dt_m = std::numeric_limits<double>::quiet_NaN();
    double t_lo = std::numeric_limits<double>::infinity(), t_hi = 0.0;
    for (const auto &r : res.rows) {
        if (std::isnan(dt_m) && !std::isnan(r.dt_m)) dt_m = r.dt_m;
        t_lo = std::min(t_lo, r.t_f);
        t_hi = std::max(t_hi, r.t_f);
    }
    if (std::isnan(dt_m) || !std::isfinite(dt_m) || s.y != "t_F") return std::nullopt;
    dqa::Series line;
    line.label = "dt_M = " + fmt(dt_m);
    line.dashed = true;
    line.color = "#2ca02c";
    if (s.x == "M")
        for (int i = 0; i <= 32; ++i) {
            const double t = t_lo * std::pow(t_hi / t_lo, i / 32.0);
            line.points.emplace_back(t / dt_m, t);
        }
    else if (s.x == "dt")
        line.points = {{dt_m, t_lo}, {dt_m, t_hi}};
    else
        return std::nullopt;
    return line;
}

std::string render_result(const dqa::SweepResult &res, const json &spec) {
    const auto kind = spec.value("kind", std::string("curves"));
    if (kind == "heatmap") {
        auto s = heatmap_spec(spec);
        if (spec.value("dt_M_line", true))
            if (auto line = dt_m_overlay(res, s)) s.overlays.push_back(*line);
        return dqa::render_heatmap(res, s);
    }
    if (kind == "curves") {
        const auto s = curve_spec(spec);
        return dqa::render_curves(dqa::series_from_rows(res, s), s);
    }
    throw dqa::ConfigError("unknown render kind '" + kind + "'");
}

void check_render_spec(const json &spec) {
    if (!spec.is_object()) throw dqa::ConfigError("render must be an object");
    const auto kind = spec.value("kind", std::string("curves"));
    if (kind != "heatmap" && kind != "curves") throw dqa::ConfigError("unknown render kind '" + kind + "'");
    for (const char *key : {"x", "y", "value"})
        if (spec.contains(key)) {
            const auto &cols = dqa::csv_columns();
            const auto name = spec[key].get<std::string>();
            if (std::find(cols.begin(), cols.end(), name) == cols.end())
                throw dqa::ConfigError("render column '" + name + "' is not a result column");
        }
}

// Subcommands. Each validates its config first, then runs.

using Runner = std::function<Outcome()>;

Runner cmd_split(Context &ctx) {
    // schedule fields are tolerated so one model config serves split, bound and trotter
    reject_unknown(ctx.config, {"name", "model", "split", "output", "description", "t_F", "M", "dt"});
    if (!ctx.config.contains("model")) throw dqa::ConfigError("config needs a \"model\"");
    const auto problem = dqa::model_from_json(ctx.config["model"]);
    auto part = dqa::partition_from_plan(problem, ctx.config.value("split", json{{"method", "none"}}));
    return [&ctx, part = std::move(part)] {
        json doc = dqa::partition_to_json(part);
        doc["initial_state"] = dqa::initial_state_to_json(part);
        ctx.write_json(".partition.json", doc);
        std::cout << "nodes " << part.nodes.size() << ", register qubits " << part.size() << ", nonlocal terms "
                  << part.nonlocal_terms.size() << ", duplicated vertices " << part.duplications.size() << "\n";
        return Outcome{exit_ok, 1, 0};
    };
}

Runner cmd_bound(Context &ctx) {
    reject_unknown(ctx.config,
                   {"name", "model", "split", "t_F", "M", "dt", "norm_convention", "output", "description"});
    if (!ctx.config.contains("model")) throw dqa::ConfigError("config needs a \"model\"");
    const auto problem = dqa::model_from_json(ctx.config["model"]);
    auto part = dqa::partition_from_plan(problem, ctx.config.value("split", json{{"method", "none"}}));
    const double t_f = positive(ctx.config, "t_F");
    const std::size_t m = steps_of(ctx.config, t_f);
    const auto conv = ctx.config.contains("norm_convention")
                          ? dqa::norm_convention_from_string(ctx.config["norm_convention"].get<std::string>())
                          : dqa::default_norm_convention();
    return [&ctx, part = std::move(part), t_f, m, conv] {
        const auto rep = dqa::trotter_bound(part, t_f, m, conv);
        const auto cal = dqa::calibrate_lie_norm();
        json doc = dqa::bound_to_json(rep);
        json c = json::object();
        for (const auto &[k, v] : cal.dt_m) c[dqa::to_string(k)] = v;
        doc["calibration"] = {{"toy_dt_M", c}, {"matched", cal.matched}, {"selected", dqa::to_string(cal.selected)}};
        ctx.write_json(".bound.json", doc);
        std::cout << "dt_M = " << fmt(rep.dt_m) << " (" << dqa::to_string(conv) << " Lie norm)\n";
        std::cout << "dt = " << fmt(rep.dt) << ", dt/dt_M = " << fmt(rep.ratio)
                  << (rep.convergent ? ", series " + fmt(*rep.series) : std::string(", divergent")) << "\n";
        return Outcome{exit_ok, 1, 0};
    };
}

Runner cmd_anneal(Context &ctx) {
    // M and dt are accepted and unused: continuous annealing has no steps
    reject_unknown(ctx.config, {"name", "model", "split", "t_F", "M", "dt", "tolerance", "checkpoints", "threads",
                                "output", "description"});
    if (!ctx.config.contains("model")) throw dqa::ConfigError("config needs a \"model\"");
    const auto problem = dqa::model_from_json(ctx.config["model"]);
    auto part = dqa::partition_from_plan(problem, ctx.config.value("split", json{{"method", "none"}}));
    if (!ctx.config.contains("t_F")) throw dqa::ConfigError("config needs a t_F value or axis");
    const auto t_f = ctx.config["t_F"].is_number() ? std::vector<double>{ctx.config["t_F"].get<double>()}
                                                   : dqa::parse_axis(ctx.config["t_F"], "t_F");
    for (double t : t_f)
        if (!(t > 0.0)) throw dqa::ConfigError("t_F values must be positive");
    dqa::ReferenceOptions opt;
    opt.tolerance = number_or(ctx.config, "tolerance", opt.tolerance);
    opt.checkpoints = ctx.config.value("checkpoints", false);
    const std::size_t threads = ctx.config.value("threads", std::size_t{1});
    return [&ctx, part = std::move(part), problem, t_f, opt, threads] {
        std::vector<json> records(t_f.size());
        const dqa::ReadoutMap readout(part);
        const double e0 = readout.ground_states().energy, e_mix = dqa::mixed_energy(problem);
        dqa::parallel_for(t_f.size(), threads, [&](std::size_t i) {
            json rec = {{"index", i}, {"model", problem.name()}, {"t_F", t_f[i]}, {"tolerance", opt.tolerance}};
            try {
                const auto r = dqa::anneal_reference(part, t_f[i], opt);
                rec.update(evolution_to_json(r));
                rec["eps_A0"] = dqa::energy_error(r.energy, e0, e_mix);
                rec["status"] = "ok";
            } catch (const std::exception &e) {
                rec["status"] = "error";
                rec["error"] = e.what();
            }
            records[i] = std::move(rec);
        });
        Outcome o;
        o.total = records.size();
        for (const auto &r : records) {
            if (r["status"] != "ok") {
                ++o.failed;
                std::cerr << "t_F = " << fmt(r["t_F"]) << ": " << r["error"].get<std::string>() << "\n";
                continue;
            }
            std::cout << "t_F = " << fmt(r["t_F"]) << "  eps_A0 = " << fmt(r["eps_A0"])
                      << "  p_A0 = " << fmt(r["fidelity_gs"]) << "\n";
        }
        ctx.write_json(".json", {{"E_star", e0}, {"E_mix", e_mix}, {"records", records}});
        if (o.total && static_cast<double>(o.failed) / static_cast<double>(o.total) > partial_threshold)
            o.code = exit_partial;
        return o;
    };
}

Runner cmd_trotter(Context &ctx) {
    reject_unknown(ctx.config, {"name", "model", "split", "t_F", "M", "dt", "F_phi", "delta", "noise_mode",
                                "trajectories", "seed", "threads", "local_mode", "endpoint", "checkpoints",
                                "output", "description"});
    if (!ctx.config.contains("model")) throw dqa::ConfigError("config needs a \"model\"");
    const auto problem = dqa::model_from_json(ctx.config["model"]);
    auto part = dqa::partition_from_plan(problem, ctx.config.value("split", json{{"method", "none"}}));
    const double t_f = positive(ctx.config, "t_F");
    const std::size_t m = steps_of(ctx.config, t_f);
    auto plan = dqa::compile_trotter_plan(part, t_f, m, trotter_options(ctx.config));
    if (ctx.config.contains("F_phi") && ctx.config.contains("delta"))
        throw dqa::ConfigError("config may give F_phi or delta, not both");
    std::optional<dqa::BellResource> resource;
    if (ctx.config.contains("F_phi")) resource = dqa::BellResource::from_fidelity(ctx.config["F_phi"]);
    if (ctx.config.contains("delta")) resource = dqa::BellResource::from_infidelity(ctx.config["delta"]);
    const auto mode_name = ctx.config.value("noise_mode", std::string("exact-density"));
    if (mode_name != "exact-density" && mode_name != "trajectories")
        throw dqa::ConfigError("unknown noise_mode '" + mode_name + "'");
    const std::uint64_t seed = ctx.config.value("seed", std::uint64_t{0});
    const std::size_t threads = ctx.config.value("threads", std::size_t{1});
    const std::size_t trajectories = ctx.config.value("trajectories", std::size_t{1000});
    if (trajectories < 1) throw dqa::ConfigError("trajectories must be at least 1");
    dqa::NoisyMode mode = mode_name == "exact-density" ? dqa::NoisyMode::exact()
                                                       : dqa::NoisyMode::sampled(trajectories, seed, threads);
    dqa::RunOptions ropt;
    ropt.checkpoints = ctx.config.value("checkpoints", false);
    return [&ctx, part = std::move(part), problem, plan = std::move(plan), resource, mode, ropt] {
        const dqa::ReadoutMap readout(part);
        const double e0 = readout.ground_states().energy, e_mix = dqa::mixed_energy(problem);
        const auto ideal = dqa::run_trotter_ideal(part, plan, ropt);
        json doc = {{"plan", dqa::plan_summary(plan)}, {"E_star", e0}, {"E_mix", e_mix}};
        doc["ideal"] = evolution_to_json(ideal);
        doc["ideal"]["eps_T0"] = dqa::energy_error(ideal.energy, e0, e_mix);
        std::cout << "M = " << plan.m << ", dt = " << fmt(plan.dt) << ", M_D = " << plan.m_d
                  << ", eps_T0 (ideal) = " << fmt(doc["ideal"]["eps_T0"]) << "\n";
        if (resource) {
            const auto noisy = dqa::run_trotter_noisy(part, plan, *resource, mode, &ideal.statevector());
            json n = evolution_to_json(noisy.evolution);
            n["F_phi"] = resource->fidelity();
            n["delta"] = resource->delta();
            n["p_N"] = noisy.p_n;
            n["sigma_stat"] = noisy.p_n_sigma;
            n["p0_sigma"] = noisy.p0_sigma;
            n["eps_T0"] = dqa::energy_error(noisy.evolution.energy, e0, e_mix);
            n["p_N_bound"] = dqa::pn_bound(resource->delta(), plan.m_d);
            n["mode"] = mode.kind == dqa::NoisyMode::Kind::ExactDensity ? "exact-density" : "trajectories";
            doc["noisy"] = n;
            std::cout << "delta = " << fmt(resource->delta()) << ", p_N = " << fmt(noisy.p_n);
            if (mode.kind == dqa::NoisyMode::Kind::Trajectories) std::cout << " +- " << fmt(noisy.p_n_sigma);
            std::cout << ", bound = " << fmt(n["p_N_bound"]) << ", eps_T0 = " << fmt(n["eps_T0"]) << "\n";
            if (!noisy.trajectories.empty()) {
                std::ostringstream csv;
                csv << "trajectory,p_N,aligned_probability,energy,p0\n";
                for (std::size_t i = 0; i < noisy.trajectories.size(); ++i) {
                    const auto &t = noisy.trajectories[i];
                    csv << i << "," << dqa::detail::fmt_double(t.p_n) << "," << dqa::detail::fmt_double(t.aligned)
                        << "," << dqa::detail::fmt_double(t.energy) << "," << dqa::detail::fmt_double(t.p0) << "\n";
                }
                ctx.write_text(".trajectories.csv", csv.str());
            }
        }
        ctx.write_json(".json", doc);
        return Outcome{exit_ok, 1, 0};
    };
}

Runner cmd_sweep(Context &ctx) {
    auto cfg = dqa::sweep_config_from_json(ctx.config);
    if (ctx.config.contains("render")) check_render_spec(ctx.config["render"]);
    return [&ctx, cfg = std::move(cfg)] {
        const auto csv_path = ctx.path(".csv");
        Context::ensure_parent(csv_path);
        std::ofstream os(csv_path, std::ios::binary);
        if (!os) throw dqa::ConfigError("cannot write " + csv_path);
        dqa::CsvWriter csv(os);
        const auto res = dqa::run_sweep(cfg, &csv);
        csv.close();
        json doc = dqa::result_to_json(res);
        if (cfg.trotterized()) {
            json tr = json::array();
            for (const auto &[t, d] : dqa::transition_by_row(res))
                tr.push_back({{"t_F", t}, {"dt", std::isnan(d) ? json(nullptr) : json(d)}});
            doc["transition_eps_T0_0.5"] = tr;
        }
        if (cfg.run_noisy) doc["complexity"] = dqa::complexity_to_json(dqa::run_complexity_report(res));
        ctx.write_json(".json", doc);
        json spec = ctx.config.value("render", json::object());
        if (!spec.contains("kind")) {
            spec["kind"] = cfg.trotterized() ? "heatmap" : "curves";
            if (!cfg.trotterized()) spec["y"] = "eps_A0";
        }
        ctx.write_text(".svg", render_result(res, spec));
        for (const auto &r : res.rows)
            if (r.status != "ok") std::cerr << "point " << r.index << ": " << r.error << "\n";
        std::cout << res.rows.size() << " points, " << res.failed << " failed\n";
        return outcome_of(res);
    };
}

Runner cmd_compare(Context &ctx) {
    auto cfg = dqa::compare_config_from_json(ctx.config);
    if (ctx.config.contains("render")) check_render_spec(ctx.config["render"]);
    return [&ctx, cfg = std::move(cfg)] {
        const auto csv_path = ctx.path(".csv");
        Context::ensure_parent(csv_path);
        std::ofstream os(csv_path, std::ios::binary);
        if (!os) throw dqa::ConfigError("cannot write " + csv_path);
        dqa::CsvWriter csv(os);
        const auto res = dqa::run_comparison(cfg, &csv);
        csv.close();
        json doc = dqa::result_to_json(res);

        // First grid t_F reaching eps <= 1e-2, per curve, and the largest
        // pointwise gap of D0 and D1 to A0.
        std::map<std::string, std::map<double, double>> curves;
        for (const auto &r : res.rows) {
            if (r.status != "ok") continue;
            auto key = r.model;
            if (!std::isnan(r.j_m)) key += " J_M=" + fmt(r.j_m);
            curves[key][r.t_f] = r.eps_a0;
        }
        json summary = json::object();
        for (const auto &[key, c] : curves) {
            json first = nullptr;
            for (const auto &[t, e] : c)
                if (e <= 1e-2) {
                    first = t;
                    break;
                }
            summary[key]["first_t_F_eps_le_1e-2"] = first;
            if (curves.contains("A0") && (key == "D0" || key == "D1")) {
                double gap = 0.0;
                for (const auto &[t, e] : c)
                    if (curves["A0"].contains(t)) gap = std::max(gap, std::abs(e - curves["A0"][t]));
                summary[key]["max_gap_to_A0"] = gap;
            }
        }
        doc["summary"] = summary;
        ctx.write_json(".json", doc);
        json spec = ctx.config.value("render", json{{"kind", "curves"}});
        if (!spec.contains("group")) spec["group"] = {"model", "J_M"};
        ctx.write_text(".svg", render_result(res, spec));
        for (const auto &[key, s] : summary.items()) {
            std::cout << key << ": first t_F with eps <= 1e-2: "
                      << (s["first_t_F_eps_le_1e-2"].is_null() ? std::string("none")
                                                               : fmt(s["first_t_F_eps_le_1e-2"]));
            if (s.contains("max_gap_to_A0")) std::cout << ", max |eps - eps_A0| = " << fmt(s["max_gap_to_A0"]);
            std::cout << "\n";
        }
        return outcome_of(res);
    };
}

Runner cmd_beta_fit(Context &ctx) {
    auto cfg = dqa::beta_config_from_json(ctx.config);
    return [&ctx, cfg = std::move(cfg)] {
        const auto rep = dqa::run_beta_experiment(cfg);
        const json doc = dqa::beta_report_to_json(rep);
        ctx.write_json(".json", doc);

        std::ostringstream csv;
        csv << "delta,p_N,p_T0,p_T0_normalized,bound\n";
        for (const auto &p : rep.points)
            csv << dqa::detail::fmt_double(p.delta) << "," << dqa::detail::fmt_double(p.p_n) << ","
                << dqa::detail::fmt_double(p.p_t0) << "," << dqa::detail::fmt_double(p.p_t0 / rep.p_t0_ideal) << ","
                << dqa::detail::fmt_double(p.bound) << "\n";
        ctx.write_text(".csv", csv.str());

        std::vector<dqa::Series> series(5);
        series[0].label = "p_N";
        series[1].label = "p_T0 / p_T0(0)";
        series[2].label = "bound (clipped at floor)";
        series[2].dashed = true;
        series[3].label = "fit p_N (beta " + fmt(rep.fit_p_n.beta_hat) + ")";
        series[3].dashed = true;
        series[4].label = "fit p_T0 (beta " + fmt(rep.fit_p_t0.beta_hat) + ")";
        series[4].dashed = true;
        for (const auto &p : rep.points) {
            series[0].points.emplace_back(p.delta, dqa::log_negativity(p.p_n));
            series[1].points.emplace_back(p.delta, dqa::log_negativity(p.p_t0 / rep.p_t0_ideal));
            series[2].points.emplace_back(p.delta, dqa::log_negativity(std::max(p.bound, rep.fit_p_n.floor)));
            series[3].points.emplace_back(
                p.delta, dqa::log_negativity(std::max(dqa::pn_beta(p.delta, rep.m_d, rep.fit_p_n.beta_hat),
                                                      rep.fit_p_n.floor)));
            series[4].points.emplace_back(
                p.delta, dqa::log_negativity(std::max(dqa::pn_beta(p.delta, rep.m_d, rep.fit_p_t0.beta_hat),
                                                      rep.fit_p_t0.floor)));
        }
        dqa::CurveSpec spec;
        spec.x = "delta";
        spec.y = "-log10 p";
        spec.log_y = false;
        spec.title = cfg.name + ", M_D = " + std::to_string(rep.m_d);
        spec.x_label = "delta";
        spec.y_label = "-log10 p";
        ctx.write_text(".svg", dqa::render_curves(series, spec));

        std::cout << "M_D = " << rep.m_d << ", beta_hat (p_N) = " << fmt(rep.fit_p_n.beta_hat)
                  << ", beta_hat (p_T0 normalized) = " << fmt(rep.fit_p_t0.beta_hat) << ", default "
                  << rep.default_fit << "\n";
        if (rep.faults) {
            std::cout << "f1 = beta_direct = " << fmt(rep.faults->f1);
            if (rep.faults->f2) std::cout << ", f2 = " << fmt(*rep.faults->f2);
            std::cout << "\n";
        }
        if (!rep.bound_holds) std::cerr << "warning: measured p_N fell below the closed-form bound\n";
        return Outcome{exit_ok, rep.points.size(), 0};
    };
}

Runner cmd_render(Context &ctx) {
    reject_unknown(ctx.config, {"input", "render", "output", "description"});
    if (!ctx.config.contains("input")) throw dqa::ConfigError("render config needs an \"input\" result file");
    const auto input = ctx.config["input"].get<std::string>();
    auto res = dqa::result_from_json(read_json_file(input));
    const json spec = ctx.config.value("render", json{{"kind", "curves"}});
    check_render_spec(spec);
    return [&ctx, res = std::move(res), spec] {
        ctx.write_text(".svg", render_result(res, spec));
        std::cout << "rendered " << res.rows.size() << " rows\n";
        return Outcome{exit_ok, res.rows.size(), 0};
    };
}

// Subcommands that take seed and threads from the config, and the field names.
bool accepts(const std::string &sub, const std::string &field) {
    static const std::map<std::string, std::set<std::string>> table{
        {"anneal", {"threads"}},          {"trotter", {"seed", "threads"}}, {"sweep", {"seed", "threads"}},
        {"beta-fit", {"seed", "threads"}}, {"compare", {"threads"}}};
    const auto it = table.find(sub);
    return it != table.end() && it->second.contains(field);
}

json conventions() {
    return {{"qubit_order", "little-endian"},
            {"lie_norm", dqa::to_string(dqa::default_norm_convention())},
            {"readout", "projection onto the aligned subspace, renormalized"},
            {"energy_reference", "logical H_F of the source problem"},
            {"log_negativity", "-log10(p)"},
            {"telegate_cost", "2 per nonlocal two-qubit exponential"},
            {"csv_schema", dqa::csv_schema_version}};
}

int run(const Invocation &inv) {
    Context ctx;
    ctx.inv = inv;
    Runner runner;
    try {
        json doc = read_json_file(inv.config_path);
        json manifest_prefix = nullptr;
        if (doc.is_object() && doc.contains("dqa_manifest")) {
            if (doc.value("subcommand", std::string{}) != inv.subcommand)
                throw dqa::ConfigError("manifest " + inv.config_path + " was written by '" +
                                       doc.value("subcommand", std::string{}) + "'");
            manifest_prefix = doc.value("output_prefix", json(nullptr));
            doc = doc.at("config");
        }
        if (inv.seed) {
            if (!accepts(inv.subcommand, "seed")) throw dqa::ConfigError("--seed does not apply to " + inv.subcommand);
            doc["seed"] = *inv.seed;
        }
        if (inv.threads) {
            if (*inv.threads < 1) throw dqa::ConfigError("--threads must be at least 1");
            if (accepts(inv.subcommand, "threads")) doc["threads"] = *inv.threads;
        }
        ctx.config = doc;
        if (!inv.out.empty())
            ctx.prefix = inv.out;
        else if (manifest_prefix.is_string())
            ctx.prefix = manifest_prefix.get<std::string>();
        else if (doc.is_object() && doc.contains("output"))
            ctx.prefix = doc["output"].get<std::string>();
        else
            ctx.prefix = doc.is_object() ? doc.value("name", inv.subcommand) : inv.subcommand;

        static const std::map<std::string, Runner (*)(Context &)> table{
            {"anneal", cmd_anneal}, {"trotter", cmd_trotter},   {"split", cmd_split},     {"bound", cmd_bound},
            {"sweep", cmd_sweep},   {"beta-fit", cmd_beta_fit}, {"compare", cmd_compare}, {"render", cmd_render}};
        runner = table.at(inv.subcommand)(ctx);
    } catch (const dqa::Error &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const json::exception &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    }

    Outcome outcome;
    std::string failure;
    try {
        outcome = runner();
    } catch (const std::exception &e) {
        failure = e.what();
        outcome.code = exit_runtime;
        std::cerr << "error: " << failure << "\n";
    }

    const auto manifest_path = ctx.prefix + ".manifest.json";
    json manifest = {{"dqa_manifest", "v1"},
                     {"tool", "dqa"},
                     {"version", dqa::version},
                     {"subcommand", inv.subcommand},
                     {"argv", inv.argv},
                     {"config_path", inv.config_path},
                     {"config", ctx.config},
                     {"seed", ctx.config.value("seed", std::uint64_t{0})},
                     {"threads", ctx.config.value("threads", std::size_t{1})},
                     {"output_prefix", ctx.prefix},
                     {"outputs", ctx.outputs},
                     {"modules", dqa::module_versions()},
                     {"conventions", conventions()},
                     {"status",
                      {{"exit_code", outcome.code}, {"points", outcome.total}, {"failed", outcome.failed}}}};
    if (!failure.empty()) manifest["status"]["error"] = failure;
    try {
        Context::ensure_parent(manifest_path);
        std::ofstream os(manifest_path, std::ios::binary);
        os << manifest.dump(2) << "\n";
    } catch (const std::exception &e) {
        std::cerr << "cannot write manifest " << manifest_path << ": " << e.what() << "\n";
        if (outcome.code == exit_ok) outcome.code = exit_runtime;
    }
    if (outcome.code == exit_partial)
        std::cerr << outcome.failed << " of " << outcome.total << " points failed\n";
    return outcome.code;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Distributed quantum annealing simulator"};
    app.set_version_flag("--version", dqa::version);
    app.require_subcommand(1);

    Invocation inv;
    for (int i = 0; i < argc; ++i) inv.argv.emplace_back(argv[i]);
    std::size_t threads = 0;
    std::uint64_t seed = 0;

    const std::vector<std::pair<std::string, std::string>> subs{
        {"anneal", "continuous reference evolution over a t_F list"},
        {"trotter", "one Trotterized run, ideal and optionally noisy"},
        {"split", "partition a problem and write the partition JSON"},
        {"bound", "convergence step dt_M and the Trotter error series"},
        {"sweep", "grid sweep to CSV, JSON and SVG"},
        {"beta-fit", "p_N(delta) curves, fitted and directly measured beta"},
        {"compare", "A0, A1, D0, D1 annealing-curve comparison"},
        {"render", "render an SVG from a stored result JSON"}};
    for (const auto &[name, help] : subs) {
        auto *sub = app.add_subcommand(name, help);
        sub->add_option("--config", inv.config_path, "JSON config or a run manifest")->required();
        sub->add_option("--out", inv.out, "output path prefix");
        sub->add_option("--threads", threads, "worker threads");
        sub->add_option("--seed", seed, "64-bit seed");
        sub->callback([&inv, &threads, &seed, sub, name = name] {
            inv.subcommand = name;
            if (sub->count("--threads")) inv.threads = threads;
            if (sub->count("--seed")) inv.seed = seed;
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }
    return run(inv);
}
