#include "starnoma/experiment.hpp"

#include <yaml-cpp/yaml.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace starnoma {

namespace {

using nlohmann::json;

std::string fmt_sci(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.9e", v);
    return buf;
}

// Round-trips a double through the 10-significant-digit text form so CSV
// and JSON carry identical numeric values.
double canon10(double v) {
    return std::strtod(fmt_sci(v).c_str(), nullptr);
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a(s.data(), s.size(), h);
}

// ---------- config parsing ----------

std::string mark_of(const YAML::Node& node) {
    if (node.Mark().line >= 0) return " (line " + std::to_string(node.Mark().line + 1) + ")";
    return "";
}

void require_known_keys(const YAML::Node& node, const std::string& path,
                        std::initializer_list<const char*> allowed) {
    if (!node.IsDefined() || node.IsNull()) return;
    if (!node.IsMap()) throw ConfigError("config: " + path + " must be a map" + mark_of(node));
    for (const auto& kv : node) {
        const std::string key = kv.first.as<std::string>();
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok)
            throw ConfigError("config: unknown key " + path + "." + key + mark_of(kv.first));
    }
}

template <typename T>
void read_scalar(const YAML::Node& node, const std::string& path, const char* key, T& out) {
    const YAML::Node v = node.IsDefined() && node.IsMap() ? node[key] : YAML::Node(YAML::NodeType::Undefined);
    if (!v.IsDefined() || v.IsNull()) return;
    try {
        out = v.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError("config: bad value for " + path + "." + key + mark_of(v));
    }
}

void read_vec3(const YAML::Node& node, const std::string& path, const char* key,
               Eigen::Vector3d& out) {
    const YAML::Node v = node.IsDefined() && node.IsMap() ? node[key] : YAML::Node(YAML::NodeType::Undefined);
    if (!v.IsDefined() || v.IsNull()) return;
    if (!v.IsSequence() || v.size() != 3)
        throw ConfigError("config: " + path + "." + key + " must be a 3-vector" + mark_of(v));
    for (int i = 0; i < 3; ++i) out[i] = v[i].as<double>();
}

std::pair<int, int> panel_from_count(int n, const YAML::Node& ctx) {
    const int r = int(std::lround(std::sqrt(double(n))));
    if (n < 1 || r * r != n)
        throw ConfigError("config: experiment.elements: " + std::to_string(n) +
                          " is not a perfect square; give an explicit [rows, cols] pair" +
                          mark_of(ctx));
    return {r, r};
}

// ---------- cells ----------

struct Cell {
    std::size_t slot = 0;
    std::pair<int, int> panel;
    ThresholdPair thr;
    int realization = 0;
    std::uint64_t seed = 0;
    std::string id;
};

std::uint64_t cell_key(const std::pair<int, int>& panel, const ThresholdPair& t,
                       int realization) {
    std::uint64_t h = fnv1a(&panel.first, sizeof panel.first);
    h = fnv1a(&panel.second, sizeof panel.second, h);
    h = fnv1a(&t.eps_c, sizeof t.eps_c, h);
    h = fnv1a(&t.eps_s, sizeof t.eps_s, h);
    h = fnv1a(&realization, sizeof realization, h);
    return h;
}

std::string cell_id(ExperimentKind kind, const std::pair<int, int>& panel,
                    const ThresholdPair& t, int realization) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "N%d-ec%.0e-es%.0e-r%03d", panel.first * panel.second,
                  t.eps_c, t.eps_s, realization);
    return kind_to_string(kind) + "-" + buf;
}

int worker_cap(std::size_t cells) {
    long cap = long(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("FBL_STAR_NOMA_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) cap = v;
    }
    return int(std::min<std::size_t>(std::size_t(cap), std::max<std::size_t>(cells, 1)));
}

json trace_record_json(const IterationRecord& rec) {
    return json{{"outer", rec.outer},
                {"inner", rec.inner},
                {"objective_omega_sc", rec.objective_omega_sc},
                {"eps_bar_sc", rec.eps_bar_sc},
                {"eps_sc", rec.eps_sc},
                {"delta_sc", rec.delta_sc},
                {"max_residual", rec.max_residual},
                {"wall_ms", rec.wall_ms}};
}

struct CellArtifacts {
    std::vector<ResultRow> rows;
    std::vector<std::pair<std::string, std::string>> files;  // name -> content
};

ResultRow base_row(const Cell& cell) {
    ResultRow row;
    row.experiment_id = cell.id;
    row.n_elements = cell.panel.first * cell.panel.second;
    row.eps_c = cell.thr.eps_c;
    row.eps_s = cell.thr.eps_s;
    row.seed = cell.seed;
    return row;
}

void fill_from_solution(ResultRow& row, const Solution& sol, const ChannelParams& chp) {
    row.status = "ok";
    row.a_c = sol.point.alloc.a_c;
    row.m = int(std::lround(sol.point.alloc.m));
    row.eps_cc = sol.performance.eps_cc;
    row.eps_ss = sol.performance.eps_ss;
    row.delta_sc = sol.performance.delta_sc;
    row.t_ms = sol.performance.t_s * 1e3;
    row.outer_iters = sol.outer_iterations;
    row.inner_iters_total = sol.inner_iterations_total;
    (void)chp;
}

CellArtifacts run_cell(const ExperimentConfig& cfg, const Cell& cell) {
    CellArtifacts art;
    const auto t0 = std::chrono::steady_clock::now();
    auto wall = [&] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    };

    SystemGeometry geo = cfg.geometry;
    geo.panel_rows = cell.panel.first;
    geo.panel_cols = cell.panel.second;
    const QosRequirements qos = cfg.cell_qos(cell.thr);

    RandomStream chan_rng(derive_seed(cell.seed, 0));
    const ChannelRealization chan =
        sample_rician(compute_geometry(geo), cfg.channel, geo, chan_rng);

    auto run_solver = [&](bool bcd) {
        ResultRow row = base_row(cell);
        std::optional<Solution> sol;
        RandomStream rng(derive_seed(cell.seed, bcd ? 2 : 1));
        try {
            sol = bcd ? bcd_optimize(chan, qos, cfg.channel, cfg.solver, rng)
                      : optimize(chan, qos, cfg.channel, cfg.solver, rng);
            fill_from_solution(row, *sol, cfg.channel);
        } catch (const InfeasibleError&) {
            row.status = "infeasible";
        } catch (const std::exception&) {
            row.status = "error";
        }
        row.wall_ms = wall();
        return std::make_pair(row, sol);
    };

    switch (cfg.kind) {
        case ExperimentKind::optimize_sweep: {
            art.rows.push_back(run_solver(false).first);
            break;
        }
        case ExperimentKind::convergence_compare: {
            auto [row_ao, sol_ao] = run_solver(false);
            row_ao.experiment_id += "-ao";
            auto [row_bcd, sol_bcd] = run_solver(true);
            row_bcd.experiment_id += "-bcd";
            art.rows.push_back(row_ao);
            art.rows.push_back(row_bcd);
            auto trace_file = [&](const char* suffix, const Solution& sol) {
                std::string text;
                for (const IterationRecord& rec : sol.trace)
                    text += trace_record_json(rec).dump() + "\n";
                art.files.emplace_back("trace-" + cell.id + suffix + ".jsonl", text);
            };
            if (sol_ao) trace_file("-ao", *sol_ao);
            if (sol_bcd) trace_file("-bcd", *sol_bcd);
            if (sol_ao && sol_bcd) {
                const TraceComparison cmp =
                    compare_traces(*sol_ao, *sol_bcd, cfg.solver.zeta1);
                art.files.emplace_back("compare-" + cell.id + ".json",
                                       comparison_to_json(cmp) + "\n");
            }
            break;
        }
        case ExperimentKind::tradeoff_grid: {
            ResultRow row = base_row(cell);
            RandomStream prof_rng(derive_seed(cell.seed, 3));
            const StarRisProfile profile = fixed_random_profile(geo.elements(), prof_rng);

            const int m_lo = int(min_blocklength(qos));
            const int m_hi = int(max_blocklength(qos, cfg.channel));
            std::vector<int> m_axis;
            for (int i = 0; i < cfg.grid_m_count; ++i) {
                const int m = m_lo + int(std::lround(double(i) * (m_hi - m_lo) /
                                                     std::max(1, cfg.grid_m_count - 1)));
                if (m_axis.empty() || m != m_axis.back()) m_axis.push_back(m);
            }
            std::vector<double> a_axis;
            for (int i = 0; i < cfg.grid_a_c_count; ++i)
                a_axis.push_back(0.5 + double(i + 1) * 0.5 / (cfg.grid_a_c_count + 1));

            const GridSweepResult grid =
                grid_sweep(chan, profile, m_axis, a_axis, qos, cfg.channel);

            std::string grid_text = "m,a_c,eps_cc,eps_ss,delta_sc,T_ms\n";
            bool found = false;
            double best_delta = std::numeric_limits<double>::infinity();
            std::size_t best_mi = 0, best_ai = 0;
            bool best_reliable = false;
            for (std::size_t mi = 0; mi < grid.m_values.size(); ++mi) {
                for (std::size_t ai = 0; ai < grid.a_c_values.size(); ++ai) {
                    const PerformanceTuple& perf = grid.at(mi, ai);
                    grid_text += std::to_string(grid.m_values[mi]) + "," +
                                 fmt_sci(grid.a_c_values[ai]) + "," + fmt_sci(perf.eps_cc) + "," +
                                 fmt_sci(perf.eps_ss) + "," + fmt_sci(perf.delta_sc) + "," +
                                 fmt_sci(perf.t_s * 1e3) + "\n";
                    const bool reliable = perf.eps_cc <= qos.eps_c && perf.eps_ss <= qos.eps_s &&
                                          perf.t_s <= qos.t_max_s;
                    const bool satisfactory = reliable && perf.delta_sc <= cfg.grid_delta_target;
                    if (satisfactory) found = true;
                    // Track the lowest-leakage node, preferring reliable ones.
                    if (std::make_pair(!reliable, perf.delta_sc) <
                        std::make_pair(!best_reliable, best_delta)) {
                        best_reliable = reliable;
                        best_delta = perf.delta_sc;
                        best_mi = mi;
                        best_ai = ai;
                    }
                }
            }
            const PerformanceTuple& best = grid.at(best_mi, best_ai);
            row.status = found ? "ok" : "infeasible";
            row.a_c = grid.a_c_values[best_ai];
            row.m = grid.m_values[best_mi];
            row.eps_cc = best.eps_cc;
            row.eps_ss = best.eps_ss;
            row.delta_sc = best.delta_sc;
            row.t_ms = best.t_s * 1e3;
            row.wall_ms = wall();
            art.rows.push_back(row);
            art.files.emplace_back("grid-" + cell.id + ".csv", grid_text);
            break;
        }
    }
    return art;
}

}  // namespace

std::string comparison_to_json(const TraceComparison& cmp) {
    return json{{"objective_a", cmp.objective_a},
                {"objective_b", cmp.objective_b},
                {"iterations_to_convergence_a", cmp.iterations_to_convergence_a},
                {"iterations_to_convergence_b", cmp.iterations_to_convergence_b}}
        .dump();
}

TraceComparison comparison_from_json(const std::string& text) {
    const json j = json::parse(text);
    TraceComparison cmp;
    cmp.objective_a = j.at("objective_a").get<std::vector<double>>();
    cmp.objective_b = j.at("objective_b").get<std::vector<double>>();
    cmp.iterations_to_convergence_a = j.at("iterations_to_convergence_a").get<int>();
    cmp.iterations_to_convergence_b = j.at("iterations_to_convergence_b").get<int>();
    return cmp;
}

std::string kind_to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::tradeoff_grid: return "tradeoff-grid";
        case ExperimentKind::optimize_sweep: return "optimize-sweep";
        case ExperimentKind::convergence_compare: return "convergence-compare";
    }
    return "unknown";
}

ExperimentKind kind_from_string(const std::string& s) {
    if (s == "tradeoff-grid") return ExperimentKind::tradeoff_grid;
    if (s == "optimize-sweep") return ExperimentKind::optimize_sweep;
    if (s == "convergence-compare") return ExperimentKind::convergence_compare;
    throw ConfigError("config: unknown experiment kind '" + s + "'");
}

void ExperimentConfig::validate() const {
    geometry.validate();
    channel.validate();
    qos.validate();
    solver.validate();
    if (m_max < 1) throw ConfigError("config: qos.m_max must be >= 1");
    if (realizations < 1) throw ConfigError("config: experiment.realizations must be >= 1");
    if (elements.empty()) throw ConfigError("config: experiment.elements must be non-empty");
    for (const auto& [rows, cols] : elements)
        if (rows < 1 || cols < 1)
            throw ConfigError("config: experiment.elements entries need N_v, N_h >= 1");
    for (const ThresholdPair& t : thresholds) {
        QosRequirements q = qos;
        q.eps_c = t.eps_c;
        q.eps_s = t.eps_s;
        q.validate();
    }
    if (grid_m_count < 2 || grid_a_c_count < 2)
        throw ConfigError("config: grid axes need at least 2 points");
    if (!(grid_delta_target > 0.0) || !(grid_delta_target < 1.0))
        throw ConfigError("config: grid.delta_target must lie in (0, 1)");
}

QosRequirements ExperimentConfig::cell_qos(const ThresholdPair& t) const {
    QosRequirements q = qos;
    q.eps_c = t.eps_c;
    q.eps_s = t.eps_s;
    q.t_max_s = std::min(q.t_max_s, double(m_max) / channel.bandwidth_hz);
    return q;
}

ExperimentConfig parse_config(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config: YAML parse failure: ") + e.what());
    }
    if (root.IsDefined() && !root.IsNull() && !root.IsMap())
        throw ConfigError("config: top level must be a map");

    ExperimentConfig cfg;
    require_known_keys(root, "", {"geometry", "channel", "qos", "solver", "experiment", "grid"});

    const YAML::Node geo = root["geometry"];
    require_known_keys(geo, "geometry",
                       {"source", "ris", "user_c", "user_s", "panel_rows", "panel_cols",
                        "spacing_ratio"});
    read_vec3(geo, "geometry", "source", cfg.geometry.source);
    read_vec3(geo, "geometry", "ris", cfg.geometry.ris);
    read_vec3(geo, "geometry", "user_c", cfg.geometry.user_c);
    read_vec3(geo, "geometry", "user_s", cfg.geometry.user_s);
    read_scalar(geo, "geometry", "panel_rows", cfg.geometry.panel_rows);
    read_scalar(geo, "geometry", "panel_cols", cfg.geometry.panel_cols);
    read_scalar(geo, "geometry", "spacing_ratio", cfg.geometry.spacing_ratio);

    const YAML::Node ch = root["channel"];
    require_known_keys(ch, "channel",
                       {"pathloss_ref_db", "pathloss_exp_sr", "pathloss_exp_ru", "rician_k_db",
                        "noise_power_dbm_c", "noise_power_dbm_s", "transmit_power_dbm",
                        "bandwidth_hz"});
    read_scalar(ch, "channel", "pathloss_ref_db", cfg.channel.pathloss_ref_db);
    read_scalar(ch, "channel", "pathloss_exp_sr", cfg.channel.pathloss_exp_sr);
    read_scalar(ch, "channel", "pathloss_exp_ru", cfg.channel.pathloss_exp_ru);
    read_scalar(ch, "channel", "rician_k_db", cfg.channel.rician_k_db);
    read_scalar(ch, "channel", "noise_power_dbm_c", cfg.channel.noise_power_dbm_c);
    read_scalar(ch, "channel", "noise_power_dbm_s", cfg.channel.noise_power_dbm_s);
    read_scalar(ch, "channel", "transmit_power_dbm", cfg.channel.transmit_power_dbm);
    read_scalar(ch, "channel", "bandwidth_hz", cfg.channel.bandwidth_hz);

    const YAML::Node qo = root["qos"];
    require_known_keys(qo, "qos",
                       {"eps_c", "eps_s", "t_max_ms", "packet_bits_c", "packet_bits_s", "m_max"});
    read_scalar(qo, "qos", "eps_c", cfg.qos.eps_c);
    read_scalar(qo, "qos", "eps_s", cfg.qos.eps_s);
    double t_max_ms = cfg.qos.t_max_s * 1e3;
    read_scalar(qo, "qos", "t_max_ms", t_max_ms);
    cfg.qos.t_max_s = t_max_ms * 1e-3;
    read_scalar(qo, "qos", "packet_bits_c", cfg.qos.d_c);
    read_scalar(qo, "qos", "packet_bits_s", cfg.qos.d_s);
    read_scalar(qo, "qos", "m_max", cfg.m_max);

    const YAML::Node so = root["solver"];
    require_known_keys(so, "solver",
                       {"zeta1", "zeta2", "iter_max", "inner_tol", "barrier_mu",
                        "line_search_shrink"});
    read_scalar(so, "solver", "zeta1", cfg.solver.zeta1);
    read_scalar(so, "solver", "zeta2", cfg.solver.zeta2);
    read_scalar(so, "solver", "iter_max", cfg.solver.iter_max);
    read_scalar(so, "solver", "inner_tol", cfg.solver.inner_tol);
    read_scalar(so, "solver", "barrier_mu", cfg.solver.barrier_mu);
    read_scalar(so, "solver", "line_search_shrink", cfg.solver.line_search_shrink);

    const YAML::Node ex = root["experiment"];
    require_known_keys(ex, "experiment",
                       {"kind", "elements", "thresholds", "realizations", "base_seed", "out_dir",
                        "format"});
    if (ex.IsDefined() && ex.IsMap()) {
        if (const YAML::Node k = ex["kind"]; k.IsDefined() && !k.IsNull())
            cfg.kind = kind_from_string(k.as<std::string>());
        if (const YAML::Node els = ex["elements"]; els.IsDefined() && !els.IsNull()) {
            if (!els.IsSequence())
                throw ConfigError("config: experiment.elements must be a sequence" + mark_of(els));
            cfg.elements.clear();
            for (const YAML::Node item : els) {
                if (item.IsSequence()) {
                    if (item.size() != 2)
                        throw ConfigError("config: experiment.elements pair must be [rows, cols]" +
                                          mark_of(item));
                    cfg.elements.emplace_back(item[0].as<int>(), item[1].as<int>());
                } else {
                    cfg.elements.push_back(panel_from_count(item.as<int>(), item));
                }
            }
        }
        if (const YAML::Node ths = ex["thresholds"]; ths.IsDefined() && !ths.IsNull()) {
            if (!ths.IsSequence())
                throw ConfigError("config: experiment.thresholds must be a sequence" +
                                  mark_of(ths));
            cfg.thresholds.clear();
            for (const YAML::Node item : ths) {
                require_known_keys(item, "experiment.thresholds[]", {"eps_c", "eps_s"});
                ThresholdPair t{cfg.qos.eps_c, cfg.qos.eps_s};
                read_scalar(item, "experiment.thresholds[]", "eps_c", t.eps_c);
                read_scalar(item, "experiment.thresholds[]", "eps_s", t.eps_s);
                cfg.thresholds.push_back(t);
            }
        }
        read_scalar(ex, "experiment", "realizations", cfg.realizations);
        read_scalar(ex, "experiment", "base_seed", cfg.base_seed);
        read_scalar(ex, "experiment", "out_dir", cfg.out_dir);
        if (const YAML::Node f = ex["format"]; f.IsDefined() && !f.IsNull()) {
            const std::string s = f.as<std::string>();
            if (s == "csv") cfg.format = OutputFormat::csv;
            else if (s == "json") cfg.format = OutputFormat::json;
            else throw ConfigError("config: experiment.format must be csv or json" + mark_of(f));
        }
    }

    const YAML::Node gr = root["grid"];
    require_known_keys(gr, "grid", {"m_count", "a_c_count", "delta_target"});
    read_scalar(gr, "grid", "m_count", cfg.grid_m_count);
    read_scalar(gr, "grid", "a_c_count", cfg.grid_a_c_count);
    read_scalar(gr, "grid", "delta_target", cfg.grid_delta_target);

    try {
        cfg.validate();
    } catch (const std::domain_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

namespace {

void emit_double(YAML::Emitter& out, const char* key, double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << YAML::Key << key << YAML::Value << std::string(buf);
}

}  // namespace

std::string serialize_config(const ExperimentConfig& cfg) {
    YAML::Emitter out;
    out << YAML::BeginMap;

    out << YAML::Key << "geometry" << YAML::Value << YAML::BeginMap;
    auto emit_vec = [&](const char* key, const Eigen::Vector3d& v) {
        out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (int i = 0; i < 3; ++i) {
            char buf[48];
            std::snprintf(buf, sizeof buf, "%.17g", v[i]);
            out << std::string(buf);
        }
        out << YAML::EndSeq;
    };
    emit_vec("source", cfg.geometry.source);
    emit_vec("ris", cfg.geometry.ris);
    emit_vec("user_c", cfg.geometry.user_c);
    emit_vec("user_s", cfg.geometry.user_s);
    out << YAML::Key << "panel_rows" << YAML::Value << cfg.geometry.panel_rows;
    out << YAML::Key << "panel_cols" << YAML::Value << cfg.geometry.panel_cols;
    emit_double(out, "spacing_ratio", cfg.geometry.spacing_ratio);
    out << YAML::EndMap;

    out << YAML::Key << "channel" << YAML::Value << YAML::BeginMap;
    emit_double(out, "pathloss_ref_db", cfg.channel.pathloss_ref_db);
    emit_double(out, "pathloss_exp_sr", cfg.channel.pathloss_exp_sr);
    emit_double(out, "pathloss_exp_ru", cfg.channel.pathloss_exp_ru);
    emit_double(out, "rician_k_db", cfg.channel.rician_k_db);
    emit_double(out, "noise_power_dbm_c", cfg.channel.noise_power_dbm_c);
    emit_double(out, "noise_power_dbm_s", cfg.channel.noise_power_dbm_s);
    emit_double(out, "transmit_power_dbm", cfg.channel.transmit_power_dbm);
    emit_double(out, "bandwidth_hz", cfg.channel.bandwidth_hz);
    out << YAML::EndMap;

    out << YAML::Key << "qos" << YAML::Value << YAML::BeginMap;
    emit_double(out, "eps_c", cfg.qos.eps_c);
    emit_double(out, "eps_s", cfg.qos.eps_s);
    emit_double(out, "t_max_ms", cfg.qos.t_max_s * 1e3);
    out << YAML::Key << "packet_bits_c" << YAML::Value << cfg.qos.d_c;
    out << YAML::Key << "packet_bits_s" << YAML::Value << cfg.qos.d_s;
    out << YAML::Key << "m_max" << YAML::Value << cfg.m_max;
    out << YAML::EndMap;

    out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
    emit_double(out, "zeta1", cfg.solver.zeta1);
    emit_double(out, "zeta2", cfg.solver.zeta2);
    out << YAML::Key << "iter_max" << YAML::Value << cfg.solver.iter_max;
    emit_double(out, "inner_tol", cfg.solver.inner_tol);
    emit_double(out, "barrier_mu", cfg.solver.barrier_mu);
    emit_double(out, "line_search_shrink", cfg.solver.line_search_shrink);
    out << YAML::EndMap;

    out << YAML::Key << "experiment" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value << kind_to_string(cfg.kind);
    out << YAML::Key << "elements" << YAML::Value << YAML::BeginSeq;
    for (const auto& [rows, cols] : cfg.elements)
        out << YAML::Flow << YAML::BeginSeq << rows << cols << YAML::EndSeq;
    out << YAML::EndSeq;
    out << YAML::Key << "thresholds" << YAML::Value << YAML::BeginSeq;
    for (const ThresholdPair& t : cfg.thresholds) {
        out << YAML::BeginMap;
        emit_double(out, "eps_c", t.eps_c);
        emit_double(out, "eps_s", t.eps_s);
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "realizations" << YAML::Value << cfg.realizations;
    out << YAML::Key << "base_seed" << YAML::Value << cfg.base_seed;
    out << YAML::Key << "out_dir" << YAML::Value << cfg.out_dir;
    out << YAML::Key << "format" << YAML::Value
        << (cfg.format == OutputFormat::csv ? "csv" : "json");
    out << YAML::EndMap;

    out << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "m_count" << YAML::Value << cfg.grid_m_count;
    out << YAML::Key << "a_c_count" << YAML::Value << cfg.grid_a_c_count;
    emit_double(out, "delta_target", cfg.grid_delta_target);
    out << YAML::EndMap;

    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    // Canonical semantic string: everything that changes the numbers,
    // excluding output location and format.
    std::string s;
    char buf[64];
    auto add = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g;", v);
        s += buf;
    };
    auto addi = [&](long long v) {
        std::snprintf(buf, sizeof buf, "%lld;", v);
        s += buf;
    };
    for (const auto* vec :
         {&cfg.geometry.source, &cfg.geometry.ris, &cfg.geometry.user_c, &cfg.geometry.user_s})
        for (int i = 0; i < 3; ++i) add((*vec)[i]);
    addi(cfg.geometry.panel_rows);
    addi(cfg.geometry.panel_cols);
    add(cfg.geometry.spacing_ratio);
    add(cfg.channel.pathloss_ref_db);
    add(cfg.channel.pathloss_exp_sr);
    add(cfg.channel.pathloss_exp_ru);
    add(cfg.channel.rician_k_db);
    add(cfg.channel.noise_power_dbm_c);
    add(cfg.channel.noise_power_dbm_s);
    add(cfg.channel.transmit_power_dbm);
    add(cfg.channel.bandwidth_hz);
    add(cfg.qos.eps_c);
    add(cfg.qos.eps_s);
    add(cfg.qos.t_max_s);
    addi(cfg.qos.d_c);
    addi(cfg.qos.d_s);
    addi(cfg.m_max);
    add(cfg.solver.zeta1);
    add(cfg.solver.zeta2);
    addi(cfg.solver.iter_max);
    add(cfg.solver.inner_tol);
    add(cfg.solver.barrier_mu);
    add(cfg.solver.line_search_shrink);
    s += kind_to_string(cfg.kind) + ";";
    for (const auto& [rows, cols] : cfg.elements) {
        addi(rows);
        addi(cols);
    }
    for (const ThresholdPair& t : cfg.thresholds) {
        add(t.eps_c);
        add(t.eps_s);
    }
    addi(cfg.realizations);
    addi(static_cast<long long>(cfg.base_seed));
    addi(cfg.grid_m_count);
    addi(cfg.grid_a_c_count);
    add(cfg.grid_delta_target);
    return fnv1a(s);
}

std::string results_csv(const std::vector<ResultRow>& rows) {
    std::string out =
        "experiment_id,N,eps_c,eps_s,seed,status,a_c,m,eps_cc,eps_ss,delta_sc,T_ms,"
        "outer_iters,inner_iters_total,wall_ms\n";
    char buf[64];
    for (const ResultRow& r : rows) {
        out += csv_quote(r.experiment_id) + ",";
        out += std::to_string(r.n_elements) + ",";
        out += fmt_sci(r.eps_c) + ",";
        out += fmt_sci(r.eps_s) + ",";
        out += std::to_string(r.seed) + ",";
        out += csv_quote(r.status) + ",";
        out += fmt_sci(r.a_c) + ",";
        out += std::to_string(r.m) + ",";
        out += fmt_sci(r.eps_cc) + ",";
        out += fmt_sci(r.eps_ss) + ",";
        out += fmt_sci(r.delta_sc) + ",";
        out += fmt_sci(r.t_ms) + ",";
        out += std::to_string(r.outer_iters) + ",";
        out += std::to_string(r.inner_iters_total) + ",";
        std::snprintf(buf, sizeof buf, "%.3f", r.wall_ms);
        out += buf;
        out += "\n";
    }
    return out;
}

namespace {

json manifest_json(const ExperimentConfig& cfg) {
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    json cells = json::array();
    for (const auto& panel : cfg.elements) {
        const std::vector<ThresholdPair> thrs =
            cfg.thresholds.empty() ? std::vector<ThresholdPair>{{cfg.qos.eps_c, cfg.qos.eps_s}}
                                   : cfg.thresholds;
        for (const ThresholdPair& t : thrs)
            for (int r = 0; r < cfg.realizations; ++r)
                cells.push_back(json{
                    {"id", cell_id(cfg.kind, panel, t, r)},
                    {"seed", derive_seed(cfg.base_seed, cell_key(panel, t, r))}});
    }
    return json{{"tool", "starnoma"},
                {"config_hash", hash_hex},
                {"base_seed", cfg.base_seed},
                {"kind", kind_to_string(cfg.kind)},
                {"cells", cells}};
}

}  // namespace

std::string results_json(const std::vector<ResultRow>& rows, const ExperimentConfig& cfg) {
    json arr = json::array();
    for (const ResultRow& r : rows) {
        arr.push_back(json{{"experiment_id", r.experiment_id},
                           {"N", r.n_elements},
                           {"eps_c", canon10(r.eps_c)},
                           {"eps_s", canon10(r.eps_s)},
                           {"seed", r.seed},
                           {"status", r.status},
                           {"a_c", canon10(r.a_c)},
                           {"m", r.m},
                           {"eps_cc", canon10(r.eps_cc)},
                           {"eps_ss", canon10(r.eps_ss)},
                           {"delta_sc", canon10(r.delta_sc)},
                           {"T_ms", canon10(r.t_ms)},
                           {"outer_iters", r.outer_iters},
                           {"inner_iters_total", r.inner_iters_total},
                           {"wall_ms", canon10(r.wall_ms)}});
    }
    return json{{"manifest", manifest_json(cfg)}, {"results", arr}}.dump(2) + "\n";
}

std::vector<std::string> emit_results(const std::vector<ResultRow>& rows,
                                      const ExperimentConfig& cfg) {
    if (rows.empty()) throw std::domain_error("emit_results: no rows");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.out_dir);

    auto write = [&](const std::string& name, const std::string& content) {
        const fs::path p = fs::path(cfg.out_dir) / name;
        std::ofstream out(p, std::ios::binary);
        out << content;
        if (!out.good()) throw IoError("cannot write " + p.string());
        return p.string();
    };

    std::vector<std::string> paths;
    if (cfg.format == OutputFormat::csv)
        paths.push_back(write("results.csv", results_csv(rows)));
    else
        paths.push_back(write("results.json", results_json(rows, cfg)));
    paths.push_back(write("manifest.json", manifest_json(cfg).dump(2) + "\n"));
    return paths;
}

ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();

    const std::vector<ThresholdPair> thrs =
        cfg.thresholds.empty() ? std::vector<ThresholdPair>{{cfg.qos.eps_c, cfg.qos.eps_s}}
                               : cfg.thresholds;

    std::vector<Cell> cells;
    for (const auto& panel : cfg.elements)
        for (const ThresholdPair& t : thrs)
            for (int r = 0; r < cfg.realizations; ++r) {
                Cell c;
                c.slot = cells.size();
                c.panel = panel;
                c.thr = t;
                c.realization = r;
                c.seed = derive_seed(cfg.base_seed, cell_key(panel, t, r));
                c.id = cell_id(cfg.kind, panel, t, r);
                cells.push_back(c);
            }

    std::vector<CellArtifacts> slots(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            try {
                slots[i] = run_cell(cfg, cells[i]);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };

    const int workers = worker_cap(cells.size());
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);

    ExperimentSummary summary;
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.out_dir);

    for (std::size_t i = 0; i < slots.size(); ++i) {
        for (const ResultRow& row : slots[i].rows) {
            summary.rows.push_back(row);
            if (row.status == "ok") ++summary.cells_ok;
            else if (row.status == "infeasible") ++summary.cells_infeasible;
            else ++summary.cells_error;
        }
        for (const auto& [name, content] : slots[i].files) {
            const fs::path p = fs::path(cfg.out_dir) / name;
            std::ofstream out(p, std::ios::binary);
            out << content;
            if (!out.good()) throw IoError("cannot write " + p.string());
        }
    }

    const std::vector<std::string> paths = emit_results(summary.rows, cfg);
    summary.results_path = paths.at(0);
    summary.manifest_path = paths.at(1);
    return summary;
}

}  // namespace starnoma
