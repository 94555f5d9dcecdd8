#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpotb/accounting.hpp"
#include "dpotb/conversion.hpp"
#include "dpotb/problems.hpp"

namespace dpotb::harness {

struct ExperimentConfig {
    nlohmann::json instance;             // problems::describe schema
    std::string variant = "plain";
    int k = 1;
    std::string learner = "osd";
    double rho = accounting::kRhoInfinity;
    double delta = 1e-6;
    std::vector<double> alpha_grid;      // empty -> default
    std::vector<int> horizons;
    int seeds = 1;
    std::uint64_t master_seed = 1;
    std::string out_dir;
    bool trace = false;
    int workers = 0;                     // 0 -> hardware concurrency
    double pf_delta_prob = 0.1;
    double pf_C = 1.0;

    // compare mode: either >= 2 variants, or >= 2 optimum offsets (fractions
    // of D) on the parameter-free variant.
    std::vector<std::string> compare_variants;
    std::vector<double> compare_offsets;

    static ExperimentConfig from_json(const nlohmann::json& j);
    [[nodiscard]] nlohmann::json to_json() const;
    void validate() const;  // throws with a field-level message
};

struct RunRow {
    std::string variant;
    int k = 1;
    int T = 0;
    int seed = 0;
    double gap = 0.0;
    double regret = 0.0;          // linear regret vs x*
    double regret_ledger = 0.0;   // regularizers included
    double eps = accounting::kRhoInfinity;
    long clips = 0;
    double wall_ms = 0.0;
    bool decomposition_ok = true;
    std::string error;            // nonempty iff the run aborted on an assertion
};

struct Aggregate {
    int T = 0;
    double mean_gap = 0.0;
    double median_gap = 0.0;
    double mean_regret = 0.0;
    double median_regret = 0.0;
    double mean_regret_ledger = 0.0;
};

struct RateFit {
    double slope = 0.0;
    double slope_stderr = 0.0;
    int points_used = 0;
    std::vector<std::string> warnings;
};

// Ordinary least squares on (log T, log gap). Non-positive gaps are dropped
// with a warning; fewer than 4 usable points is an error.
RateFit fit_rate(const std::vector<double>& T_list, const std::vector<double>& gaps);

struct RunResult {
    std::vector<RunRow> rows;
    std::vector<Aggregate> aggregates;
    std::optional<RateFit> fit;
    accounting::BudgetReport budget;
    bool all_decomposition_ok = true;
    long total_clips = 0;
    std::vector<std::string> errors;  // per-run assertion failures

    [[nodiscard]] bool all_ok() const { return errors.empty() && all_decomposition_ok; }
};

// Executes seeds x horizons conversion runs (parallel across runs) and, when
// out_dir is set, writes raw.csv + aggregate.json (+ per-run traces with
// `trace`). Fully deterministic given (config, master_seed), except for the
// wall_ms timing column.
RunResult run_suite(const ExperimentConfig& config);

// Matched-seed comparison across variants or optimum offsets; one RunResult
// per arm, in the order requested.
struct CompareArm {
    std::string label;
    RunResult result;
};
std::vector<CompareArm> compare_variants(const ExperimentConfig& config);

// Per-run seed derivation: hashing by horizon value and seed index keeps
// existing runs stable when horizons are added and matches seeds across arms.
std::uint64_t run_seed(std::uint64_t master_seed, int horizon, int seed_index);

std::string rows_to_csv(const std::vector<RunRow>& rows);
std::string format_csv_double(double v);  // %.17g, "inf" for infinities
nlohmann::json aggregate_to_json(const RunResult& result, const ExperimentConfig& config);
std::string trace_to_csv(const std::vector<conversion::TraceRow>& trace);

// ---- verification checks (shared by `verify` and the acceptance suite) ----

struct CheckResult {
    std::string name;
    bool pass = false;
    double margin = 0.0;   // how much head-room the check had (>= 0 when passing)
    std::string details;
};

namespace checks {

CheckResult index_partition(int t_max = 4096);
CheckResult renyi_quadrature();
CheckResult rdp_to_dp_grid();
CheckResult calibration_identity(int t_max = 10000);
CheckResult sensitivity_probe(int T, int triples, std::uint64_t seed);
CheckResult martingale_bound(int trials, std::uint64_t seed);
CheckResult variance_bound(int seeds, int T, std::uint64_t seed);
CheckResult decomposition_spot(std::uint64_t seed);
CheckResult determinism(std::uint64_t seed);

}  // namespace checks

enum class VerifyLevel { Fast, Full };

struct VerifyReport {
    std::vector<CheckResult> checks;
    [[nodiscard]] bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

VerifyReport verify_all(VerifyLevel level);

}  // namespace dpotb::harness
