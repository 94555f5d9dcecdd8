#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpotb/harness.hpp"
#include "dpotb/tree_noise.hpp"

namespace {

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

void print_aggregates(const dpotb::harness::RunResult& result) {
    std::printf("%8s %14s %14s %14s\n", "T", "mean_gap", "median_gap", "mean_regret");
    for (const auto& a : result.aggregates)
        std::printf("%8d %14.6g %14.6g %14.6g\n", a.T, a.mean_gap, a.median_gap, a.mean_regret);
    if (result.fit)
        std::printf("fitted log-log slope: %.4f (stderr %.4f, %d points)\n", result.fit->slope,
                    result.fit->slope_stderr, result.fit->points_used);
    if (std::isfinite(result.budget.epsilon))
        std::printf("privacy: rho=%.4g delta=%.3g -> epsilon=%.4g (alpha*=%.4g)\n",
                    result.budget.rho, result.budget.delta, result.budget.epsilon,
                    result.budget.alpha_star);
    else
        std::printf("privacy: non-private (rho=inf)\n");
}

int cmd_run(const std::string& config_path, int seeds_override, const std::string& out_override,
            bool trace, int workers) {
    auto cfg = dpotb::harness::ExperimentConfig::from_json(load_json(config_path));
    if (seeds_override > 0) cfg.seeds = seeds_override;
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (trace) cfg.trace = true;
    if (workers > 0) cfg.workers = workers;

    const auto result = dpotb::harness::run_suite(cfg);
    print_aggregates(result);
    if (result.total_clips > 0)
        std::printf("gradient clips: %ld across all runs\n", result.total_clips);
    if (!cfg.out_dir.empty()) std::printf("wrote %s/raw.csv and aggregate.json\n", cfg.out_dir.c_str());
    for (const auto& err : result.errors) std::fprintf(stderr, "error: %s\n", err.c_str());
    if (!result.errors.empty()) return 1;
    if (!result.all_decomposition_ok) {
        std::fprintf(stderr, "error: decomposition inequality violated on at least one run\n");
        return 1;
    }
    return 0;
}

int cmd_verify(const std::string& level) {
    const auto lvl = level == "full" ? dpotb::harness::VerifyLevel::Full
                                     : dpotb::harness::VerifyLevel::Fast;
    const auto report = dpotb::harness::verify_all(lvl);
    for (const auto& c : report.checks) {
        if (c.margin != 0.0)
            std::printf("[%s] %-22s margin %-10.3g %s\n", c.pass ? "PASS" : "FAIL",
                        c.name.c_str(), c.margin, c.details.c_str());
        else
            std::printf("[%s] %-22s %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                        c.details.c_str());
    }
    return report.all_pass() ? 0 : 1;
}

int cmd_compare(const std::string& config_path, const std::string& out_override) {
    auto cfg = dpotb::harness::ExperimentConfig::from_json(load_json(config_path));
    if (!out_override.empty()) cfg.out_dir = out_override;
    const auto arms = dpotb::harness::compare_variants(cfg);

    std::printf("%-24s", "arm");
    for (const auto& a : arms.front().result.aggregates) std::printf(" %14s", ("T=" + std::to_string(a.T)).c_str());
    std::printf("\n");
    for (const auto& arm : arms) {
        std::printf("%-24s", arm.label.c_str());
        for (const auto& a : arm.result.aggregates) std::printf(" %14.6g", a.median_gap);
        std::printf("\n");
    }

    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        std::string csv = "arm,T,median_gap,mean_gap,mean_regret\n";
        for (const auto& arm : arms)
            for (const auto& a : arm.result.aggregates)
                csv += arm.label + "," + std::to_string(a.T) + "," +
                       dpotb::harness::format_csv_double(a.median_gap) + "," +
                       dpotb::harness::format_csv_double(a.mean_gap) + "," +
                       dpotb::harness::format_csv_double(a.mean_regret) + "\n";
        std::ofstream out(std::filesystem::path(cfg.out_dir) / "compare.csv", std::ios::binary);
        out << csv;
        std::printf("wrote %s/compare.csv\n", cfg.out_dir.c_str());
    }
    return 0;
}

int cmd_budget(const std::string& rho_text, double delta, int horizon) {
    dpotb::accounting::PrivacyBudget budget;
    budget.delta = delta;
    budget.rho = (rho_text == "inf" || rho_text == "infinity")
                     ? dpotb::accounting::kRhoInfinity
                     : std::stod(rho_text);
    const auto report = dpotb::accounting::budget_over_grid(budget);

    int max_in = 0;
    for (const auto& nodes : dpotb::tree_noise::in_sets(horizon))
        max_in = std::max(max_in, static_cast<int>(nodes.size()));

    nlohmann::json j;
    j["rho"] = std::isfinite(report.rho) ? nlohmann::json(report.rho) : nlohmann::json("inf");
    j["delta"] = report.delta;
    j["alpha_star"] = report.alpha_star;
    j["epsilon"] = std::isfinite(report.epsilon) ? nlohmann::json(report.epsilon) : nlohmann::json("inf");
    j["per_node_max_IN"] = max_in;
    if (report.grid_widened) j["grid_widened"] = true;
    std::printf("%s\n", j.dump(2).c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dpotb: differentially private online-to-batch conversion benchmark"};
    app.require_subcommand(1);

    std::string config_path, out_dir, level = "fast", rho_text = "1.0";
    int seeds = 0, horizon = 1024, workers = 0;
    double delta = 1e-6;
    bool trace = false;

    auto* run = app.add_subcommand("run", "execute an experiment suite from a JSON config");
    run->add_option("--config", config_path, "path to the experiment config")->required();
    run->add_option("--seeds", seeds, "override the seed count");
    run->add_option("--out", out_dir, "override the output directory");
    run->add_option("--workers", workers, "override the worker-pool size");
    run->add_flag("--trace", trace, "write per-round trace CSVs");

    auto* verify = app.add_subcommand("verify", "run the property verification suites");
    verify->add_option("--level", level, "fast or full")
        ->check(CLI::IsMember({"fast", "full"}));

    auto* compare = app.add_subcommand("compare", "matched-seed comparison across variants");
    compare->add_option("--config", config_path, "path to the comparison config")->required();
    compare->add_option("--out", out_dir, "override the output directory");

    auto* budget = app.add_subcommand("budget", "RDP -> (eps, delta) budget report");
    budget->add_option("--rho", rho_text, "RDP scale rho (or 'inf')")->required();
    budget->add_option("--delta", delta, "target delta")->required();
    budget->add_option("--horizon", horizon, "horizon for the per-node IN bound");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, seeds, out_dir, trace, workers);
        if (verify->parsed()) return cmd_verify(level);
        if (compare->parsed()) return cmd_compare(config_path, out_dir);
        if (budget->parsed()) return cmd_budget(rho_text, delta, horizon);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
