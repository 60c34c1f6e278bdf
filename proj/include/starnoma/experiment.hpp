#ifndef STARNOMA_EXPERIMENT_HPP
#define STARNOMA_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "starnoma/benchmarks.hpp"
#include "starnoma/channel.hpp"
#include "starnoma/fbl.hpp"
#include "starnoma/optimizer.hpp"

namespace starnoma {

enum class ExperimentKind { tradeoff_grid, optimize_sweep, convergence_compare };
enum class OutputFormat { csv, json };

struct ThresholdPair {
    double eps_c = 1e-3;
    double eps_s = 1e-3;
};

// One sweep configuration. Defaults reproduce the reference parameter set
// (coordinates, -30 dB unit path loss, exponents 2.5, K = 3 dB, B = 1.4 MHz,
// N = 16, -80 dBm noise, 30 dBm transmit power, 1e-3 thresholds,
// T_max = 0.715 ms, m_max = 1000, d = 100/100, zeta1 = 1e-4, zeta2 = 1e-10,
// Iter_max = 30).
struct ExperimentConfig {
    SystemGeometry geometry;
    ChannelParams channel;
    QosRequirements qos;
    SolverConfig solver;
    int m_max = 1000;

    ExperimentKind kind = ExperimentKind::optimize_sweep;
    std::vector<std::pair<int, int>> elements = {{4, 4}};  // (N_v, N_h) per sweep value
    std::vector<ThresholdPair> thresholds;                 // empty -> single pair from qos
    int realizations = 50;
    std::uint64_t base_seed = 1;
    std::string out_dir = "results";
    OutputFormat format = OutputFormat::csv;

    // tradeoff-grid axes
    int grid_m_count = 50;
    int grid_a_c_count = 50;
    double grid_delta_target = 0.1;

    void validate() const;
    // QoS with the thresholds substituted and the latency cap tightened to
    // min(t_max, m_max/B).
    QosRequirements cell_qos(const ThresholdPair& t) const;
};

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// YAML config ingestion: unspecified fields take the defaults above,
// unknown keys and invariant violations raise ConfigError with the key path
// (and source line when available).
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& yaml_text);
std::string serialize_config(const ExperimentConfig& cfg);

// FNV-1a over the canonical serialization of the semantically meaningful
// fields (output location and format excluded).
std::uint64_t config_hash(const ExperimentConfig& cfg);

struct ResultRow {
    std::string experiment_id;
    int n_elements = 0;
    double eps_c = 0.0;
    double eps_s = 0.0;
    std::uint64_t seed = 0;
    std::string status;  // ok | infeasible | error
    double a_c = 0.0;
    int m = 0;
    double eps_cc = 0.0;
    double eps_ss = 0.0;
    double delta_sc = 0.0;
    double t_ms = 0.0;
    int outer_iters = 0;
    long inner_iters_total = 0;
    double wall_ms = 0.0;
};

struct ExperimentSummary {
    std::vector<ResultRow> rows;
    int cells_ok = 0;
    int cells_infeasible = 0;
    int cells_error = 0;
    std::string results_path;
    std::string manifest_path;
};

// Runs every (N, threshold-pair, realization) cell of the sweep on a
// bounded worker pool (FBL_STAR_NOMA_THREADS caps the width), collects one
// row per cell (two for convergence comparisons), and writes the results
// table, manifest and per-run trace/grid artifacts under out_dir.
// Per-cell infeasibility lands in the status column; I/O failures raise
// IoError.
ExperimentSummary run_experiment(const ExperimentConfig& cfg);

// Deterministic row serialization shared by both formats: every floating
// column is rendered in scientific notation with 10 significant digits and
// the JSON mirrors those exact values.
std::string results_csv(const std::vector<ResultRow>& rows);
std::string results_json(const std::vector<ResultRow>& rows, const ExperimentConfig& cfg);
std::vector<std::string> emit_results(const std::vector<ResultRow>& rows,
                                      const ExperimentConfig& cfg);

std::string kind_to_string(ExperimentKind kind);
ExperimentKind kind_from_string(const std::string& s);

// Lossless JSON round trip for convergence-comparison records.
std::string comparison_to_json(const TraceComparison& cmp);
TraceComparison comparison_from_json(const std::string& text);

}  // namespace starnoma

#endif
