#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "beta.hpp"
#include "error.hpp"
#include "evolution.hpp"
#include "metrics.hpp"
#include "models.hpp"
#include "parallel.hpp"
#include "partition.hpp"

namespace dqa {

inline constexpr const char *csv_schema_version = "dqa-sweep-csv v1";
inline constexpr double nan = std::numeric_limits<double>::quiet_NaN();

// Grid axes

/// An axis is a list of numbers, {"log": [lo, hi, count]} or
/// {"linear": [lo, hi, count]}. Integer axes round and drop duplicates.
[[nodiscard]] inline std::vector<double> parse_axis(const json &a, const std::string &name, bool integer = false) {
    std::vector<double> v;
    if (a.is_array()) {
        for (const auto &x : a) {
            if (!x.is_number()) throw ConfigError("axis '" + name + "' must contain numbers");
            v.push_back(x.get<double>());
        }
    } else if (a.is_object() && (a.contains("log") || a.contains("linear"))) {
        const bool log = a.contains("log");
        const auto spec = a.at(log ? "log" : "linear");
        if (!spec.is_array() || spec.size() != 3) throw ConfigError("axis '" + name + "' range needs [lo, hi, count]");
        const double lo = spec[0].get<double>(), hi = spec[1].get<double>();
        const auto count = spec[2].get<std::size_t>();
        if (count == 0) throw ConfigError("axis '" + name + "' is empty");
        if (log && !(lo > 0.0 && hi > 0.0)) throw ConfigError("log axis '" + name + "' needs positive bounds");
        for (std::size_t i = 0; i < count; ++i) {
            const double f = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
            v.push_back(log ? lo * std::pow(hi / lo, f) : lo + (hi - lo) * f);
        }
    } else {
        throw ConfigError("axis '" + name + "' must be a list or a {log|linear: [lo, hi, count]} range");
    }
    if (v.empty()) throw ConfigError("axis '" + name + "' is empty");
    if (integer) {
        std::vector<double> r;
        for (double x : v) {
            const double k = std::round(x);
            if (k < 1.0) throw ConfigError("axis '" + name + "' needs positive integers");
            if (r.empty() || r.back() != k) r.push_back(k);
        }
        v = std::move(r);
    }
    return v;
}

// Sweep configuration

struct SweepConfig {
    std::string name = "sweep";
    json model;
    json split = json{{"method", "none"}};
    std::vector<double> t_f, m, dt, f_phi, delta, j_m;
    bool run_a = true, run_ideal = false, run_noisy = false;
    NoisyMode::Kind noise_kind = NoisyMode::Kind::ExactDensity;
    std::size_t trajectories = 1000;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    TrotterOptions trotter;
    std::optional<NormConvention> convention;
    double tolerance = 1e-9;
    std::string output;
    json raw;

    [[nodiscard]] bool trotterized() const { return run_ideal || run_noisy; }
    [[nodiscard]] std::size_t trotter_axis_size() const { return trotterized() ? (m.empty() ? dt.size() : m.size()) : 1; }
    [[nodiscard]] std::size_t noise_axis_size() const {
        return run_noisy ? (f_phi.empty() ? delta.size() : f_phi.size()) : 1;
    }
    [[nodiscard]] std::size_t jm_axis_size() const { return j_m.empty() ? 1 : j_m.size(); }
    [[nodiscard]] std::size_t points() const {
        return t_f.size() * trotter_axis_size() * noise_axis_size() * jm_axis_size();
    }
};

[[nodiscard]] inline SweepConfig sweep_config_from_json(const json &doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> known{"name", "model", "split", "grid", "evolutions", "noise_mode",
                                             "trajectories", "seed", "threads", "local_mode", "endpoint",
                                             "norm_convention", "tolerance", "output", "render", "description"};
    for (const auto &[k, v] : doc.items())
        if (!known.contains(k)) throw ConfigError("unknown config field '" + k + "'");
    SweepConfig c;
    c.raw = doc;
    c.name = doc.value("name", c.name);
    if (!doc.contains("model")) throw ConfigError("config needs a \"model\"");
    c.model = doc["model"];
    if (doc.contains("split")) c.split = doc["split"];
    if (!doc.contains("grid") || !doc["grid"].is_object()) throw ConfigError("config needs a \"grid\" object");
    const auto &g = doc["grid"];
    for (const auto &[k, v] : g.items()) {
        static const std::set<std::string> axes{"t_F", "M", "dt", "F_phi", "delta", "J_M"};
        if (!axes.contains(k)) throw ConfigError("unknown grid axis '" + k + "'");
    }
    if (!g.contains("t_F")) throw ConfigError("grid needs a t_F axis");
    c.t_f = parse_axis(g["t_F"], "t_F");
    for (double t : c.t_f)
        if (!(t > 0.0)) throw ConfigError("t_F values must be positive");
    if (g.contains("M")) c.m = parse_axis(g["M"], "M", true);
    if (g.contains("dt")) c.dt = parse_axis(g["dt"], "dt");
    if (g.contains("F_phi")) c.f_phi = parse_axis(g["F_phi"], "F_phi");
    if (g.contains("delta")) c.delta = parse_axis(g["delta"], "delta");
    if (g.contains("J_M")) c.j_m = parse_axis(g["J_M"], "J_M");
    if (!c.m.empty() && !c.dt.empty()) throw ConfigError("grid may specify M or dt, not both");
    if (!c.f_phi.empty() && !c.delta.empty()) throw ConfigError("grid may specify F_phi or delta, not both");

    c.run_a = c.run_ideal = c.run_noisy = false;
    const auto evolutions = doc.value("evolutions", json::array({"A"}));
    if (!evolutions.is_array() || evolutions.empty()) throw ConfigError("\"evolutions\" must be a non-empty list");
    for (const auto &e : evolutions) {
        const auto s = e.get<std::string>();
        if (s == "A")
            c.run_a = true;
        else if (s == "T_ideal")
            c.run_ideal = true;
        else if (s == "T_noisy")
            c.run_noisy = true;
        else
            throw ConfigError("unknown evolution '" + s + "'");
    }
    if (c.trotterized() && c.m.empty() && c.dt.empty()) throw ConfigError("Trotter evolutions need an M or dt axis");
    if (c.run_noisy && c.f_phi.empty() && c.delta.empty())
        throw ConfigError("T_noisy needs an F_phi or delta axis");
    const auto mode = doc.value("noise_mode", std::string("exact-density"));
    if (mode == "exact-density")
        c.noise_kind = NoisyMode::Kind::ExactDensity;
    else if (mode == "trajectories")
        c.noise_kind = NoisyMode::Kind::Trajectories;
    else
        throw ConfigError("unknown noise_mode '" + mode + "'");
    c.trajectories = doc.value("trajectories", c.trajectories);
    if (c.trajectories < 1) throw ConfigError("trajectories must be at least 1");
    c.seed = doc.value("seed", c.seed);
    c.threads = doc.value("threads", c.threads);
    const auto local = doc.value("local_mode", std::string("exact"));
    if (local != "exact" && local != "split") throw ConfigError("local_mode must be exact or split");
    c.trotter.local = local == "exact" ? LocalMode::Exact : LocalMode::Split;
    const auto endpoint = doc.value("endpoint", std::string("left"));
    if (endpoint != "left" && endpoint != "midpoint") throw ConfigError("endpoint must be left or midpoint");
    c.trotter.endpoint = endpoint == "left" ? Endpoint::Left : Endpoint::Midpoint;
    if (doc.contains("norm_convention")) c.convention = norm_convention_from_string(doc["norm_convention"]);
    c.tolerance = doc.value("tolerance", c.tolerance);
    c.output = doc.value("output", std::string{});
    if (!c.j_m.empty()) {
        for (double v : c.j_m)
            if (!(v < 0.0)) throw ConfigError("J_M values must be negative");
    }
    json probe = c.model;
    if (!c.j_m.empty()) probe["J_M"] = c.j_m.front();
    (void)partition_from_plan(model_from_json(probe), c.split);
    return c;
}

// Result rows

struct SweepRow {
    std::size_t index = 0;
    std::string model;
    double t_f = nan, m = nan, dt = nan, f_phi = nan, delta = nan, j_m = nan;
    double eps_a0 = nan, eps_t0 = nan, eps_ta = nan, p_a0 = nan, p_t0 = nan, p_n = nan, sigma_stat = nan;
    double m_d = nan, dt_m = nan, aligned = nan;
    std::string status = "ok";
    std::string error;
    double wall_time = 0.0;
};

inline const std::vector<std::string> &csv_columns() {
    static const std::vector<std::string> cols{
        "index", "model", "t_F",   "M",     "dt",  "F_phi", "delta",       "J_M",       "eps_A0",
        "eps_T0", "eps_TA", "p_A0", "p_T0", "p_N", "sigma_stat", "M_D", "dt_M", "aligned_probability",
        "status", "error", "wall_time"};
    return cols;
}

/// Numeric column by CSV name; NaN when absent.
[[nodiscard]] inline double column(const SweepRow &r, const std::string &name) {
    static const std::map<std::string, double SweepRow::*> fields{
        {"t_F", &SweepRow::t_f},       {"M", &SweepRow::m},         {"dt", &SweepRow::dt},
        {"F_phi", &SweepRow::f_phi},   {"delta", &SweepRow::delta}, {"J_M", &SweepRow::j_m},
        {"eps_A0", &SweepRow::eps_a0}, {"eps_T0", &SweepRow::eps_t0}, {"eps_TA", &SweepRow::eps_ta},
        {"p_A0", &SweepRow::p_a0},     {"p_T0", &SweepRow::p_t0},   {"p_N", &SweepRow::p_n},
        {"sigma_stat", &SweepRow::sigma_stat}, {"M_D", &SweepRow::m_d}, {"dt_M", &SweepRow::dt_m},
        {"aligned_probability", &SweepRow::aligned}, {"wall_time", &SweepRow::wall_time}};
    if (name == "index") return static_cast<double>(r.index);
    auto it = fields.find(name);
    if (it == fields.end()) throw ConfigError("unknown result column '" + name + "'");
    return r.*(it->second);
}

namespace detail {

inline std::string fmt_double(double v) {
    if (std::isnan(v)) return "";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_escape(const std::string &s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch == '\n' ? ' ' : ch;
    }
    return out + "\"";
}

struct Fnv1a {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    void add(const std::string &s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
    }
    [[nodiscard]] std::string hex() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }
};

} // namespace detail

/// CSV line without the trailing wall_time column.
[[nodiscard]] inline std::string csv_stable_fields(const SweepRow &r) {
    using detail::fmt_double;
    std::string s = std::to_string(r.index) + "," + detail::csv_escape(r.model);
    for (double v : {r.t_f, r.m, r.dt, r.f_phi, r.delta, r.j_m, r.eps_a0, r.eps_t0, r.eps_ta, r.p_a0, r.p_t0, r.p_n,
                     r.sigma_stat, r.m_d, r.dt_m, r.aligned})
        s += "," + fmt_double(v);
    s += "," + r.status + "," + detail::csv_escape(r.error);
    return s;
}

/// Append-only CSV stream: a versioned comment line, the header, rows in
/// order, then a footer with an FNV-1a checksum of every line except the
/// wall_time column.
class CsvWriter {
  public:
    explicit CsvWriter(std::ostream &os) : os_(os) {
        const std::string version = std::string("# ") + csv_schema_version + "; qubit order little-endian";
        std::string header;
        for (const auto &c : csv_columns()) header += (header.empty() ? "" : ",") + c;
        os_ << version << "\n" << header << "\n";
        sum_.add(version + "\n");
        sum_.add(header + "\n");
        os_.flush();
    }

    void write(const SweepRow &r) {
        const auto stable = csv_stable_fields(r);
        sum_.add(stable + "\n");
        os_ << stable << "," << detail::fmt_double(r.wall_time) << "\n";
        os_.flush();
        ++rows_;
    }

    void close() {
        os_ << "# rows " << rows_ << "; checksum fnv1a64 (excluding wall_time) " << sum_.hex() << "\n";
        os_.flush();
    }

  private:
    std::ostream &os_;
    detail::Fnv1a sum_;
    std::size_t rows_ = 0;
};

/// Writes rows to a stream in index order as soon as the next one is ready.
class OrderedSink {
  public:
    OrderedSink(std::size_t count, CsvWriter *csv) : ready_(count, false), rows_(count), csv_(csv) {}

    void put(SweepRow row) {
        std::lock_guard lock(mutex_);
        const auto i = row.index;
        rows_[i] = std::move(row);
        ready_[i] = true;
        while (next_ < ready_.size() && ready_[next_]) {
            if (csv_) csv_->write(rows_[next_]);
            ++next_;
        }
    }

    [[nodiscard]] std::vector<SweepRow> take() { return std::move(rows_); }

  private:
    std::mutex mutex_;
    std::vector<bool> ready_;
    std::vector<SweepRow> rows_;
    std::size_t next_ = 0;
    CsvWriter *csv_;
};

struct SweepResult {
    std::string name;
    std::vector<SweepRow> rows;
    std::size_t failed = 0;
    json metadata = json::object();

    [[nodiscard]] double failure_fraction() const {
        return rows.empty() ? 0.0 : static_cast<double>(failed) / static_cast<double>(rows.size());
    }
};

[[nodiscard]] inline json row_to_json(const SweepRow &r) {
    json j = {{"index", r.index}, {"model", r.model}, {"status", r.status}};
    for (const auto &c : csv_columns()) {
        if (c == "index" || c == "model" || c == "status" || c == "error") continue;
        const double v = column(r, c);
        j[c] = std::isnan(v) ? json(nullptr) : (std::isinf(v) ? json("inf") : json(v));
    }
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

[[nodiscard]] inline json result_to_json(const SweepResult &res) {
    json rows = json::array();
    for (const auto &r : res.rows) rows.push_back(row_to_json(r));
    return {{"name", res.name}, {"schema", csv_schema_version}, {"metadata", res.metadata},
            {"failed", res.failed}, {"rows", rows}};
}

[[nodiscard]] inline SweepResult result_from_json(const json &doc) {
    SweepResult res;
    res.name = doc.value("name", std::string{});
    res.metadata = doc.value("metadata", json::object());
    static const std::map<std::string, double SweepRow::*> fields{
        {"t_F", &SweepRow::t_f},       {"M", &SweepRow::m},         {"dt", &SweepRow::dt},
        {"F_phi", &SweepRow::f_phi},   {"delta", &SweepRow::delta}, {"J_M", &SweepRow::j_m},
        {"eps_A0", &SweepRow::eps_a0}, {"eps_T0", &SweepRow::eps_t0}, {"eps_TA", &SweepRow::eps_ta},
        {"p_A0", &SweepRow::p_a0},     {"p_T0", &SweepRow::p_t0},   {"p_N", &SweepRow::p_n},
        {"sigma_stat", &SweepRow::sigma_stat}, {"M_D", &SweepRow::m_d}, {"dt_M", &SweepRow::dt_m},
        {"aligned_probability", &SweepRow::aligned}, {"wall_time", &SweepRow::wall_time}};
    for (const auto &j : doc.at("rows")) {
        SweepRow r;
        r.index = j.at("index").get<std::size_t>();
        r.model = j.value("model", std::string{});
        r.status = j.value("status", std::string("ok"));
        r.error = j.value("error", std::string{});
        for (const auto &[name, ptr] : fields) {
            if (!j.contains(name) || j[name].is_null()) continue;
            r.*ptr = j[name].is_string() ? std::numeric_limits<double>::infinity() : j[name].get<double>();
        }
        if (r.status != "ok") ++res.failed;
        res.rows.push_back(std::move(r));
    }
    return res;
}

// Sweep execution

namespace detail {

struct PointSpec {
    double t_f = 0.0;
    std::optional<std::size_t> m;
    std::optional<double> dt;
    std::optional<double> f_phi, delta;
    std::optional<double> j_m;
};

inline std::vector<PointSpec> expand_grid(const SweepConfig &c) {
    std::vector<PointSpec> pts;
    for (double t : c.t_f)
        for (std::size_t a = 0; a < c.trotter_axis_size(); ++a)
            for (std::size_t b = 0; b < c.noise_axis_size(); ++b)
                for (std::size_t d = 0; d < c.jm_axis_size(); ++d) {
                    PointSpec p;
                    p.t_f = t;
                    if (c.trotterized()) {
                        if (!c.m.empty())
                            p.m = static_cast<std::size_t>(c.m[a]);
                        else
                            p.dt = c.dt[a];
                    }
                    if (c.run_noisy) {
                        if (!c.f_phi.empty())
                            p.f_phi = c.f_phi[b];
                        else
                            p.delta = c.delta[b];
                    }
                    if (!c.j_m.empty()) p.j_m = c.j_m[d];
                    pts.push_back(p);
                }
    return pts;
}

inline json model_for(const SweepConfig &c, const std::optional<double> &j_m) {
    json m = c.model;
    if (j_m) m["J_M"] = *j_m;
    return m;
}

} // namespace detail

/// Executes every grid point on a bounded worker pool. Per-point failures
/// become error rows; rows stream to `csv` in grid order.
[[nodiscard]] inline SweepResult run_sweep(const SweepConfig &c, CsvWriter *csv = nullptr) {
    const auto points = detail::expand_grid(c);
    const NormConvention conv = c.convention.value_or(default_norm_convention());

    // Continuous references depend only on (t_F, J_M).
    std::map<std::pair<double, double>, std::size_t> ref_index;
    std::vector<std::pair<double, std::optional<double>>> ref_keys;
    if (c.run_a)
        for (const auto &p : points) {
            const auto key = std::make_pair(p.t_f, p.j_m.value_or(0.0));
            if (ref_index.emplace(key, ref_keys.size()).second) ref_keys.emplace_back(p.t_f, p.j_m);
        }
    struct RefOutcome {
        std::optional<EvolutionResult> result;
        std::string error;
    };
    std::vector<RefOutcome> refs(ref_keys.size());
    parallel_for(ref_keys.size(), c.threads, [&](std::size_t i) {
        try {
            const auto problem = model_from_json(detail::model_for(c, ref_keys[i].second));
            const auto part = partition_from_plan(problem, c.split);
            ReferenceOptions opt;
            opt.tolerance = c.tolerance;
            refs[i].result = anneal_reference(part, ref_keys[i].first, opt);
        } catch (const std::exception &e) {
            refs[i].error = e.what();
        }
    });

    OrderedSink sink(points.size(), csv);
    parallel_for(points.size(), c.threads, [&](std::size_t i) {
        const auto &pt = points[i];
        SweepRow row;
        row.index = i;
        row.t_f = pt.t_f;
        if (pt.j_m) row.j_m = *pt.j_m;
        detail::Stopwatch clock;
        try {
            const auto problem = model_from_json(detail::model_for(c, pt.j_m));
            row.model = problem.name();
            const auto part = partition_from_plan(problem, c.split);
            const ReadoutMap readout(part);
            const double e0 = readout.ground_states().energy;
            const double e_mix = mixed_energy(problem);
            std::optional<double> e_a;
            if (c.run_a) {
                const auto &ref = refs[ref_index.at({pt.t_f, pt.j_m.value_or(0.0)})];
                if (!ref.result) throw ConvergenceError("reference evolution failed: " + ref.error);
                e_a = ref.result->energy;
                row.eps_a0 = energy_error(*e_a, e0, e_mix);
                row.p_a0 = ref.result->fidelity_gs;
                row.aligned = ref.result->aligned_probability;
            }
            if (c.trotterized()) {
                const std::size_t m = pt.m ? *pt.m : steps_for(pt.t_f, *pt.dt);
                const auto plan = compile_trotter_plan(part, pt.t_f, m, c.trotter);
                row.m = static_cast<double>(m);
                row.dt = plan.dt;
                row.m_d = static_cast<double>(plan.m_d);
                row.dt_m = convergence_step(part, m, conv);
                const auto ideal = run_trotter_ideal(part, plan);
                double e_t = ideal.energy;
                row.p_t0 = ideal.fidelity_gs;
                row.aligned = ideal.aligned_probability;
                if (c.run_noisy) {
                    const auto res = pt.f_phi ? BellResource::from_fidelity(*pt.f_phi)
                                              : BellResource::from_infidelity(*pt.delta);
                    row.f_phi = res.fidelity();
                    row.delta = res.delta();
                    NoisyMode mode;
                    if (c.noise_kind == NoisyMode::Kind::Trajectories)
                        mode = NoisyMode::sampled(c.trajectories, CounterRng(c.seed, i).next(), 1);
                    const auto noisy = run_trotter_noisy(part, plan, res, mode, &ideal.statevector());
                    e_t = noisy.evolution.energy;
                    row.p_t0 = noisy.evolution.fidelity_gs;
                    row.p_n = noisy.p_n;
                    row.sigma_stat = noisy.p_n_sigma;
                    row.aligned = noisy.evolution.aligned_probability;
                }
                row.eps_t0 = energy_error(e_t, e0, e_mix);
                if (e_a) row.eps_ta = energy_error(e_t, *e_a, e_mix);
            }
        } catch (const std::exception &e) {
            row.status = "error";
            row.error = e.what();
        }
        row.wall_time = clock.seconds();
        sink.put(std::move(row));
    });

    SweepResult res;
    res.name = c.name;
    res.rows = sink.take();
    for (const auto &r : res.rows)
        if (r.status != "ok") ++res.failed;
    const auto cal = calibrate_lie_norm();
    json cal_json = json::object();
    for (const auto &[k, v] : cal.dt_m) cal_json[to_string(k)] = v;
    res.metadata = {{"lie_norm", to_string(conv)},
                    {"lie_norm_calibration", {{"toy_dt_M", cal_json}, {"matched", cal.matched}}},
                    {"qubit_order", "little-endian"},
                    {"readout", "projection onto the aligned subspace, renormalized"},
                    {"energy_reference", "logical H_F of the source problem"},
                    {"E_mix", "<phi_0|H_F|phi_0>"},
                    {"local_mode", to_string(c.trotter.local)},
                    {"endpoint", to_string(c.trotter.endpoint)},
                    {"noise_mode", c.noise_kind == NoisyMode::Kind::ExactDensity ? "exact-density" : "trajectories"},
                    {"seed", c.seed},
                    {"telegate_cost", "2 per nonlocal two-qubit exponential, zero-weight factors skipped"}};
    return res;
}

// Model comparison

struct CompareConfig {
    std::string name = "compare_models";
    std::vector<double> t_f;
    std::vector<double> j_m{-1.0, -2.0, -4.0};
    std::vector<std::string> models{"A0", "A1", "D0", "D1"};
    double j = 1.0;
    double tolerance = 1e-9;
    std::size_t threads = 1;
    std::string output;
    json raw;
};

[[nodiscard]] inline CompareConfig compare_config_from_json(const json &doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> known{"name", "t_F", "J_M", "models", "J", "tolerance",
                                             "threads", "output", "render", "description"};
    for (const auto &[k, v] : doc.items())
        if (!known.contains(k)) throw ConfigError("unknown config field '" + k + "'");
    CompareConfig c;
    c.raw = doc;
    c.name = doc.value("name", c.name);
    if (!doc.contains("t_F")) throw ConfigError("comparison config needs a t_F axis");
    c.t_f = parse_axis(doc["t_F"], "t_F");
    if (doc.contains("J_M")) c.j_m = parse_axis(doc["J_M"], "J_M");
    for (double v : c.j_m)
        if (!(v < 0.0)) throw ConfigError("J_M values must be negative");
    if (doc.contains("models")) c.models = doc["models"].get<std::vector<std::string>>();
    if (c.models.empty()) throw ConfigError("comparison needs at least one model");
    for (const auto &m : c.models)
        if (m != "A0" && m != "A1" && m != "D0" && m != "D1") throw ConfigError("unknown comparison model '" + m + "'");
    c.j = doc.value("J", c.j);
    c.tolerance = doc.value("tolerance", c.tolerance);
    c.threads = doc.value("threads", c.threads);
    c.output = doc.value("output", std::string{});
    return c;
}

/// Continuous annealing curves eps_A0(t_F) for A0, A1 (per J_M), D0 and D1.
[[nodiscard]] inline SweepResult run_comparison(const CompareConfig &c, CsvWriter *csv = nullptr) {
    struct Job {
        std::string model;
        std::optional<double> j_m;
        double t_f;
    };
    std::vector<Job> jobs;
    for (const auto &m : c.models) {
        if (m == "A1") {
            for (double jm : c.j_m)
                for (double t : c.t_f) jobs.push_back({m, jm, t});
        } else {
            for (double t : c.t_f) jobs.push_back({m, std::nullopt, t});
        }
    }
    OrderedSink sink(jobs.size(), csv);
    parallel_for(jobs.size(), c.threads, [&](std::size_t i) {
        const auto &job = jobs[i];
        SweepRow row;
        row.index = i;
        row.model = job.model;
        row.t_f = job.t_f;
        if (job.j_m) row.j_m = *job.j_m;
        detail::Stopwatch clock;
        try {
            const auto models = build_comparison_models(job.j_m.value_or(-1.0), c.j);
            const ModelInstance &inst = job.model == "A0"   ? models.a0
                                        : job.model == "A1" ? models.a1
                                        : job.model == "D0" ? models.d0
                                                            : models.d1;
            ReferenceOptions opt;
            opt.tolerance = c.tolerance;
            const auto r = anneal_reference(inst.partition, job.t_f, opt);
            const ReadoutMap readout(inst.partition);
            row.eps_a0 = energy_error(r.energy, readout.ground_states().energy, mixed_energy(inst.problem));
            row.p_a0 = r.fidelity_gs;
            row.aligned = r.aligned_probability;
        } catch (const std::exception &e) {
            row.status = "error";
            row.error = e.what();
        }
        row.wall_time = clock.seconds();
        sink.put(std::move(row));
    });
    SweepResult res;
    res.name = c.name;
    res.rows = sink.take();
    for (const auto &r : res.rows)
        if (r.status != "ok") ++res.failed;
    res.metadata = {{"A0", "K4, J on all edges"},
                    {"A1", "K4 on a 3x3 square grid, chains b, c, d, chain coupling J_M"},
                    {"D0", "all four vertices duplicated over two nodes"},
                    {"D1", "edge split {a,b} | {c,d}"},
                    {"J", c.j},
                    {"evolution", "continuous reference (A)"},
                    {"qubit_order", "little-endian"}};
    return res;
}

// Complexity

struct ComplexityRow {
    std::size_t index = 0;
    double runs = 0.0, time = 0.0, ebits = 0.0;
    bool infinite = false;
};

/// runs = 1/p_N, time = t_F/p_N, ebits = M_D/p_N per row. Rows without p_N
/// fall back to the closed-form bound at `delta` when given.
[[nodiscard]] inline std::vector<ComplexityRow> run_complexity_report(const SweepResult &res,
                                                                      std::optional<double> delta = std::nullopt) {
    std::vector<ComplexityRow> out;
    for (const auto &r : res.rows) {
        if (r.status != "ok") continue;
        double p = r.p_n;
        if (std::isnan(p)) {
            if (!delta || std::isnan(r.m_d)) continue;
            p = pn_bound(*delta, static_cast<std::uint64_t>(r.m_d));
        }
        ComplexityRow c;
        c.index = r.index;
        if (p <= 0.0) {
            c.infinite = true;
            c.runs = c.time = c.ebits = std::numeric_limits<double>::infinity();
        } else {
            c.runs = 1.0 / p;
            c.time = r.t_f / p;
            c.ebits = (std::isnan(r.m_d) ? 0.0 : r.m_d) / p;
        }
        out.push_back(c);
    }
    return out;
}

[[nodiscard]] inline json complexity_to_json(const std::vector<ComplexityRow> &rows) {
    json out = json::array();
    for (const auto &c : rows) {
        if (c.infinite)
            out.push_back({{"index", c.index}, {"runs", "inf"}, {"time", "inf"}, {"ebits", "inf"},
                           {"warning", "p_N = 0"}});
        else
            out.push_back({{"index", c.index}, {"runs", c.runs}, {"time", c.time}, {"ebits", c.ebits}});
    }
    return out;
}

// Transition locator

/// Delta t at which eps_T0 first crosses `level` along increasing Delta t for
/// one t_F row, by linear interpolation in log Delta t. NaN when no crossing.
[[nodiscard]] inline double transition_dt(std::vector<std::pair<double, double>> dt_eps, double level = 0.5) {
    std::sort(dt_eps.begin(), dt_eps.end());
    for (std::size_t i = 0; i + 1 < dt_eps.size(); ++i) {
        const auto [d0, e0] = dt_eps[i];
        const auto [d1, e1] = dt_eps[i + 1];
        if (e0 < level && e1 >= level) {
            const double f = (level - e0) / (e1 - e0);
            return std::exp(std::log(d0) + f * (std::log(d1) - std::log(d0)));
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

/// Transition Delta t for every t_F row of a sweep with a Trotter axis,
/// keyed by t_F. Rows that never cross map to NaN.
[[nodiscard]] inline std::map<double, double> transition_by_row(const SweepResult &res, double level = 0.5,
                                                                const std::string &value = "eps_T0") {
    std::map<double, std::vector<std::pair<double, double>>> rows;
    for (const auto &r : res.rows)
        if (r.status == "ok" && !std::isnan(r.dt) && !std::isnan(column(r, value)))
            rows[r.t_f].emplace_back(r.dt, column(r, value));
    std::map<double, double> out;
    for (auto &[t, pts] : rows) out[t] = transition_dt(std::move(pts), level);
    return out;
}

// Beta experiments

struct BetaConfig {
    std::string name = "beta";
    json model;
    json split = json{{"method", "none"}};
    double t_f = 0.0;
    std::size_t m = 0;
    std::vector<double> delta;
    std::string fit_on = "p_T0_normalized";
    bool direct_beta = true;
    bool second_order = false;
    TrotterOptions trotter;
    std::size_t threads = 1;
    std::uint64_t seed = 0;
    std::string output;
    json raw;
};

[[nodiscard]] inline BetaConfig beta_config_from_json(const json &doc) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> known{"name",        "model", "split",    "t_F",     "M",      "dt",
                                             "delta",       "fit_on", "direct_beta", "f2", "threads", "seed",
                                             "local_mode", "endpoint", "output", "description"};
    for (const auto &[k, v] : doc.items())
        if (!known.contains(k)) throw ConfigError("unknown config field '" + k + "'");
    BetaConfig c;
    c.raw = doc;
    c.name = doc.value("name", c.name);
    if (!doc.contains("model")) throw ConfigError("config needs a \"model\"");
    c.model = doc["model"];
    if (doc.contains("split")) c.split = doc["split"];
    if (!doc.contains("t_F") || !doc["t_F"].is_number()) throw ConfigError("beta config needs a numeric t_F");
    c.t_f = doc["t_F"].get<double>();
    if (!(c.t_f > 0.0)) throw ConfigError("t_F must be positive");
    if (doc.contains("M") == doc.contains("dt")) throw ConfigError("beta config needs exactly one of M or dt");
    c.m = doc.contains("M") ? doc["M"].get<std::size_t>() : steps_for(c.t_f, doc["dt"].get<double>());
    if (c.m < 1) throw ConfigError("M must be positive");
    if (!doc.contains("delta")) throw ConfigError("beta config needs a delta axis");
    c.delta = parse_axis(doc["delta"], "delta");
    for (double d : c.delta)
        if (!(d > 0.0 && d <= 0.75)) throw ConfigError("delta values must lie in (0, 3/4]");
    c.fit_on = doc.value("fit_on", c.fit_on);
    if (c.fit_on != "p_T0_normalized" && c.fit_on != "p_N") throw ConfigError("fit_on must be p_T0_normalized or p_N");
    c.direct_beta = doc.value("direct_beta", c.direct_beta);
    c.second_order = doc.value("f2", c.second_order);
    c.threads = doc.value("threads", c.threads);
    c.seed = doc.value("seed", c.seed);
    const auto local = doc.value("local_mode", std::string("exact"));
    if (local != "exact" && local != "split") throw ConfigError("local_mode must be exact or split");
    c.trotter.local = local == "exact" ? LocalMode::Exact : LocalMode::Split;
    const auto endpoint = doc.value("endpoint", std::string("left"));
    if (endpoint != "left" && endpoint != "midpoint") throw ConfigError("endpoint must be left or midpoint");
    c.trotter.endpoint = endpoint == "left" ? Endpoint::Left : Endpoint::Midpoint;
    c.output = doc.value("output", std::string{});
    (void)partition_from_plan(model_from_json(c.model), c.split);
    return c;
}

struct BetaPoint {
    double delta = 0.0;
    double p_n = 0.0;
    double p_t0 = 0.0;
    double bound = 0.0;
};

struct BetaReport {
    std::string name;
    std::size_t m_d = 0;
    std::size_t num_qubits = 0;
    std::size_t degeneracy = 0;
    double p_t0_ideal = 0.0;
    std::vector<BetaPoint> points;
    BetaFit fit_p_n, fit_p_t0;
    std::string default_fit;
    std::optional<FaultLevels> faults;
    bool bound_holds = true;
};

/// Exact-density p_N(delta) and p_T0(delta) curves for one plan, both fits,
/// and optionally the directly measured fault levels.
[[nodiscard]] inline BetaReport run_beta_experiment(const BetaConfig &c) {
    const auto problem = model_from_json(c.model);
    const auto part = partition_from_plan(problem, c.split);
    const auto plan = compile_trotter_plan(part, c.t_f, c.m, c.trotter);
    const auto ideal = run_trotter_ideal(part, plan);
    const ReadoutMap readout(part);
    BetaReport rep;
    rep.name = c.name;
    rep.m_d = plan.m_d;
    rep.num_qubits = part.size();
    rep.degeneracy = readout.ground_states().degeneracy();
    rep.p_t0_ideal = ideal.fidelity_gs;
    rep.points.resize(c.delta.size());
    parallel_for(c.delta.size(), c.threads, [&](std::size_t i) {
        const auto res = BellResource::from_infidelity(c.delta[i]);
        const auto noisy = run_trotter_noisy(part, plan, res, NoisyMode::exact(), &ideal.statevector());
        rep.points[i] = {c.delta[i], noisy.p_n, noisy.evolution.fidelity_gs, pn_bound(c.delta[i], plan.m_d)};
    });
    for (const auto &p : rep.points) rep.bound_holds = rep.bound_holds && p.p_n >= p.bound;

    std::vector<FitPoint> pn, pt;
    for (const auto &p : rep.points) {
        pn.push_back({p.delta, p.p_n, 0.0});
        pt.push_back({p.delta, p.p_t0 / rep.p_t0_ideal, 0.0});
    }
    const double dim = std::ldexp(1.0, static_cast<int>(part.source.size()));
    const double pn_floor = 2.0 / std::ldexp(1.0, static_cast<int>(part.size()));
    const double pt_floor = 2.0 * static_cast<double>(rep.degeneracy) / dim / rep.p_t0_ideal;
    rep.fit_p_n = fit_beta(pn, plan.m_d, pn_floor);
    rep.fit_p_t0 = fit_beta(pt, plan.m_d, pt_floor);
    rep.default_fit = c.fit_on;
    if (c.direct_beta) {
        FaultOptions fo;
        fo.second_order = c.second_order;
        fo.seed = c.seed;
        fo.threads = c.threads;
        rep.faults = measure_fault_levels(part, plan, fo);
    }
    return rep;
}

[[nodiscard]] inline const BetaFit &default_fit(const BetaReport &r) {
    return r.default_fit == "p_N" ? r.fit_p_n : r.fit_p_t0;
}

[[nodiscard]] inline json beta_report_to_json(const BetaReport &r) {
    std::vector<FitPoint> pn, pt;
    json pts = json::array();
    for (const auto &p : r.points) {
        pn.push_back({p.delta, p.p_n, 0.0});
        pt.push_back({p.delta, p.p_t0 / r.p_t0_ideal, 0.0});
        pts.push_back({{"delta", p.delta}, {"p_N", p.p_n}, {"p_T0", p.p_t0}, {"bound", p.bound},
                       {"log_negativity_p_N", log_negativity(p.p_n)}});
    }
    json out = {{"name", r.name},
                {"M_D", r.m_d},
                {"register_qubits", r.num_qubits},
                {"degeneracy", r.degeneracy},
                {"p_T0_ideal", r.p_t0_ideal},
                {"points", pts},
                {"fit_p_N", fit_to_json(r.fit_p_n, r.m_d, pn)},
                {"fit_p_T0_normalized", fit_to_json(r.fit_p_t0, r.m_d, pt)},
                {"default_fit", r.default_fit},
                {"beta_hat", default_fit(r).beta_hat},
                {"bound_holds", r.bound_holds},
                {"log_negativity", "-log10(p)"},
                {"mode", "exact-density"}};
    if (r.faults) {
        json f = {{"f0", 1.0}, {"f1", r.faults->f1}, {"beta_direct", r.faults->f1}};
        if (r.faults->f2) {
            f["f2"] = *r.faults->f2;
            f["f2_patterns"] = r.faults->f2_patterns;
            f["f2_sampled"] = r.faults->f2_sampled;
            f["monotone"] = *r.faults->f2 <= r.faults->f1 && r.faults->f1 <= 1.0;
        }
        out["fault_levels"] = f;
    }
    return out;
}

} // namespace dqa
