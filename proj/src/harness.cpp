#include "dpotb/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "dpotb/learners.hpp"

namespace dpotb::harness {

namespace {

[[noreturn]] void config_error(const std::string& field, const std::string& why) {
    throw std::invalid_argument("config field '" + field + "': " + why);
}

template <typename T>
T get_field(const nlohmann::json& j, const std::string& field) {
    if (!j.contains(field)) config_error(field, "missing");
    try {
        return j.at(field).get<T>();
    } catch (const nlohmann::json::exception&) {
        config_error(field, "wrong type");
    }
}

template <typename T>
T get_field_or(const nlohmann::json& j, const std::string& field, T fallback) {
    if (!j.contains(field)) return fallback;
    try {
        return j.at(field).get<T>();
    } catch (const nlohmann::json::exception&) {
        config_error(field, "wrong type");
    }
}

double parse_rho(const nlohmann::json& j) {
    if (!j.contains("rho") || j.at("rho").is_null()) return accounting::kRhoInfinity;
    if (j.at("rho").is_string()) {
        const auto s = j.at("rho").get<std::string>();
        if (s == "inf" || s == "infinity") return accounting::kRhoInfinity;
        config_error("privacy.rho", "string value must be \"inf\"");
    }
    const double rho = j.at("rho").get<double>();
    if (rho <= 0.0) config_error("privacy.rho", "must be > 0 (or \"inf\")");
    return rho;
}

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string format_csv_double(double v) { return format_double(v); }

namespace {

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    cfg.instance = get_field<nlohmann::json>(j, "instance");
    cfg.variant = get_field_or<std::string>(j, "variant", "plain");
    cfg.k = get_field_or<int>(j, "k", 1);
    cfg.learner = get_field_or<std::string>(j, "learner", "osd");
    if (j.contains("privacy")) {
        const auto& p = j.at("privacy");
        cfg.rho = parse_rho(p);
        cfg.delta = get_field_or<double>(p, "delta", 1e-6);
        cfg.alpha_grid = get_field_or<std::vector<double>>(p, "alpha_grid", {});
    }
    cfg.horizons = get_field<std::vector<int>>(j, "horizons");
    cfg.seeds = get_field_or<int>(j, "seeds", 1);
    cfg.master_seed = get_field_or<std::uint64_t>(j, "master_seed", 1);
    cfg.out_dir = get_field_or<std::string>(j, "out", "");
    cfg.trace = get_field_or<bool>(j, "trace", false);
    cfg.workers = get_field_or<int>(j, "workers", 0);
    cfg.pf_delta_prob = get_field_or<double>(j, "pf_delta_prob", 0.1);
    cfg.pf_C = get_field_or<double>(j, "pf_C", 1.0);
    cfg.compare_variants = get_field_or<std::vector<std::string>>(j, "compare_variants", {});
    cfg.compare_offsets = get_field_or<std::vector<double>>(j, "compare_offsets", {});
    cfg.validate();
    return cfg;
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["instance"] = instance;
    j["variant"] = variant;
    j["k"] = k;
    j["learner"] = learner;
    j["privacy"]["rho"] = std::isfinite(rho) ? nlohmann::json(rho) : nlohmann::json("inf");
    j["privacy"]["delta"] = delta;
    if (!alpha_grid.empty()) j["privacy"]["alpha_grid"] = alpha_grid;
    j["horizons"] = horizons;
    j["seeds"] = seeds;
    j["master_seed"] = master_seed;
    if (!out_dir.empty()) j["out"] = out_dir;
    j["trace"] = trace;
    j["pf_delta_prob"] = pf_delta_prob;
    j["pf_C"] = pf_C;
    if (!compare_variants.empty()) j["compare_variants"] = compare_variants;
    if (!compare_offsets.empty()) j["compare_offsets"] = compare_offsets;
    return j;
}

void ExperimentConfig::validate() const {
    conversion::variant_from_name(variant);  // throws on unknown
    if (k < 1) config_error("k", "must be >= 1");
    if (variant == "parameter_free" && k != 3) config_error("k", "parameter_free requires k = 3");
    if (horizons.empty()) config_error("horizons", "must list at least one T");
    for (int T : horizons)
        if (T < 1) config_error("horizons", "every T must be >= 1");
    if (seeds < 1) config_error("seeds", "must be >= 1");
    if (delta <= 0.0 || delta >= 1.0) config_error("privacy.delta", "must be in (0,1)");
    if (pf_delta_prob <= 0.0 || pf_delta_prob >= 1.0)
        config_error("pf_delta_prob", "must be in (0,1)");
    if (pf_C <= 0.0) config_error("pf_C", "must be > 0");
    if (workers < 0) config_error("workers", "must be >= 0");
    const auto inst = problems::from_descriptor(instance);  // throws with the offending field
    if (variant == "strongly_convex" && inst.mu <= 0.0)
        config_error("variant", "strongly_convex requires an instance with mu > 0");
}

std::uint64_t run_seed(std::uint64_t master_seed, int horizon, int seed_index) {
    return geometry::mix64(master_seed,
                           geometry::mix64(static_cast<std::uint64_t>(horizon),
                                           static_cast<std::uint64_t>(seed_index)));
}

RateFit fit_rate(const std::vector<double>& T_list, const std::vector<double>& gaps) {
    if (T_list.size() != gaps.size())
        throw std::invalid_argument("fit_rate: T_list and gaps must have equal length");
    RateFit fit;
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < T_list.size(); ++i) {
        if (!(gaps[i] > 0.0)) {  // also excludes NaN
            fit.warnings.push_back("excluded non-positive gap at T=" + std::to_string(T_list[i]));
            continue;
        }
        xs.push_back(std::log(T_list[i]));
        ys.push_back(std::log(gaps[i]));
    }
    const auto n = static_cast<int>(xs.size());
    if (n < 4) throw std::invalid_argument("fit_rate: fewer than 4 usable points");

    const double xm = mean_of(xs);
    const double ym = mean_of(ys);
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (xs[i] - xm) * (xs[i] - xm);
        sxy += (xs[i] - xm) * (ys[i] - ym);
    }
    fit.slope = sxy / sxx;
    const double intercept = ym - fit.slope * xm;
    double ssr = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = ys[i] - (intercept + fit.slope * xs[i]);
        ssr += r * r;
    }
    fit.slope_stderr = n > 2 ? std::sqrt(ssr / (n - 2) / sxx) : 0.0;
    fit.points_used = n;
    return fit;
}

namespace {

RunRow execute_one(const ExperimentConfig& cfg, const problems::ProblemInstance& instance,
                   int T, int seed_index, double eps,
                   std::vector<conversion::TraceRow>* trace_out) {
    const std::uint64_t rs = run_seed(cfg.master_seed, T, seed_index);
    geometry::Rng base(rs);
    geometry::Rng data_rng = base.split(0xDA7AULL);
    geometry::Rng noise_rng = base.split(0x9015EULL);

    const problems::Dataset dataset = problems::make_dataset(instance, T, data_rng);

    conversion::RunConfig rc;
    rc.k = cfg.k;
    rc.rho = cfg.rho;
    rc.variant.mode = conversion::variant_from_name(cfg.variant);
    rc.variant.mu = instance.mu;
    rc.variant.delta_prob = cfg.pf_delta_prob;
    rc.variant.C = cfg.pf_C;
    rc.record_trace = trace_out != nullptr;
    rc.evaluate_gap_per_round = trace_out != nullptr;

    const geometry::NoiseDistribution dist = geometry::NoiseDistribution::gaussian(instance.dim);

    double pf_cap = 0.0;
    if (rc.variant.mode == conversion::Variant::ParameterFree) {
        const auto pf = conversion::pf_constants(instance.G, instance.H, instance.D(),
                                                 instance.dim, T, cfg.pf_delta_prob, cfg.pf_C,
                                                 dist.sub_gaussian_sigma, cfg.rho);
        pf_cap = pf.cap.back();
    }
    auto learner = learners::make_learner(cfg.learner, instance.domain, pf_cap);

    const auto start = std::chrono::steady_clock::now();
    conversion::RunOutput out = conversion::run(instance, dataset, *learner, rc, dist, noise_rng);
    const auto stop = std::chrono::steady_clock::now();

    if (trace_out) *trace_out = std::move(out.trace);

    RunRow row;
    row.variant = cfg.variant;
    row.k = cfg.k;
    row.T = T;
    row.seed = seed_index;
    row.gap = out.gap;
    row.regret = out.regret_linear;
    row.regret_ledger = out.regret_ledger;
    row.eps = eps;
    row.clips = out.clip_count;
    row.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    row.decomposition_ok = out.decomposition_ok();
    return row;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

std::string rows_to_csv(const std::vector<RunRow>& rows) {
    std::string csv = "variant,k,T,seed,gap,regret,eps,clips,wall_ms\n";
    for (const auto& r : rows) {
        csv += r.variant;
        csv += ',';
        csv += std::to_string(r.k);
        csv += ',';
        csv += std::to_string(r.T);
        csv += ',';
        csv += std::to_string(r.seed);
        csv += ',';
        csv += format_double(r.gap);
        csv += ',';
        csv += format_double(r.regret);
        csv += ',';
        csv += format_double(r.eps);
        csv += ',';
        csv += std::to_string(r.clips);
        csv += ',';
        csv += format_double(r.wall_ms);
        csv += '\n';
    }
    return csv;
}

std::string trace_to_csv(const std::vector<conversion::TraceRow>& trace) {
    std::string csv = "t,gap,g_norm,gamma_norm,sigma,delta_norm,max_disp,clip\n";
    for (const auto& r : trace) {
        csv += std::to_string(r.t);
        csv += ',';
        csv += format_double(r.gap);
        csv += ',';
        csv += format_double(r.g_norm);
        csv += ',';
        csv += format_double(r.gamma_norm);
        csv += ',';
        csv += format_double(r.sigma);
        csv += ',';
        csv += format_double(r.delta_norm);
        csv += ',';
        csv += format_double(r.max_disp);
        csv += ',';
        csv += std::to_string(r.clip);
        csv += '\n';
    }
    return csv;
}

nlohmann::json aggregate_to_json(const RunResult& result, const ExperimentConfig& config) {
    nlohmann::json j;
    j["config"] = config.to_json();
    j["budget"] = {{"rho", std::isfinite(result.budget.rho) ? nlohmann::json(result.budget.rho)
                                                            : nlohmann::json("inf")},
                   {"delta", result.budget.delta},
                   {"alpha_star", result.budget.alpha_star},
                   {"epsilon", std::isfinite(result.budget.epsilon)
                                   ? nlohmann::json(result.budget.epsilon)
                                   : nlohmann::json("inf")}};
    j["aggregates"] = nlohmann::json::array();
    for (const auto& a : result.aggregates) {
        j["aggregates"].push_back({{"T", a.T},
                                   {"mean_gap", a.mean_gap},
                                   {"median_gap", a.median_gap},
                                   {"mean_regret", a.mean_regret},
                                   {"median_regret", a.median_regret},
                                   {"mean_regret_ledger", a.mean_regret_ledger}});
    }
    if (result.fit) {
        j["fit"] = {{"slope", result.fit->slope},
                    {"stderr", result.fit->slope_stderr},
                    {"points_used", result.fit->points_used},
                    {"warnings", result.fit->warnings}};
    }
    j["all_decomposition_ok"] = result.all_decomposition_ok;
    j["total_clips"] = result.total_clips;
    if (!result.errors.empty()) j["errors"] = result.errors;
    return j;
}

RunResult run_suite(const ExperimentConfig& config) {
    config.validate();
    const problems::ProblemInstance instance = problems::from_descriptor(config.instance);

    RunResult result;
    accounting::PrivacyBudget budget{config.rho, config.delta, config.alpha_grid};
    result.budget = accounting::budget_over_grid(budget);
    const double eps = result.budget.epsilon;

    struct Job {
        int T;
        int seed;
        std::size_t slot;
    };
    std::vector<Job> jobs;
    for (int ti = 0; ti < static_cast<int>(config.horizons.size()); ++ti)
        for (int s = 0; s < config.seeds; ++s)
            jobs.push_back({config.horizons[static_cast<std::size_t>(ti)], s, jobs.size()});

    result.rows.resize(jobs.size());
    std::vector<std::vector<conversion::TraceRow>> traces(config.trace ? jobs.size() : 0);

    int worker_count = config.workers > 0
                           ? config.workers
                           : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    worker_count = std::min<int>(worker_count, static_cast<int>(jobs.size()));

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= jobs.size()) return;
            const Job& job = jobs[idx];
            try {
                result.rows[job.slot] =
                    execute_one(config, instance, job.T, job.seed, eps,
                                config.trace ? &traces[job.slot] : nullptr);
            } catch (const std::exception& e) {
                // An invariant assertion aborts this run only; the failure is
                // recorded on its row and surfaced by the caller.
                RunRow& row = result.rows[job.slot];
                row.variant = config.variant;
                row.k = config.k;
                row.T = job.T;
                row.seed = job.seed;
                row.gap = std::numeric_limits<double>::quiet_NaN();
                row.regret = std::numeric_limits<double>::quiet_NaN();
                row.regret_ledger = std::numeric_limits<double>::quiet_NaN();
                row.eps = eps;
                row.decomposition_ok = false;
                row.error = e.what();
            }
        }
    };
    if (worker_count <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(worker_count));
        for (int i = 0; i < worker_count; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (const auto& row : result.rows) {
        result.all_decomposition_ok = result.all_decomposition_ok && row.decomposition_ok;
        result.total_clips += row.clips;
        if (!row.error.empty())
            result.errors.push_back("run (T=" + std::to_string(row.T) +
                                    ", seed=" + std::to_string(row.seed) + "): " + row.error);
    }

    for (int T : config.horizons) {
        std::vector<double> gaps, regrets, ledgers;
        for (const auto& row : result.rows) {
            if (row.T != T || !row.error.empty()) continue;
            gaps.push_back(row.gap);
            regrets.push_back(row.regret);
            ledgers.push_back(row.regret_ledger);
        }
        Aggregate a;
        a.T = T;
        a.mean_gap = mean_of(gaps);
        a.median_gap = median_of(gaps);
        a.mean_regret = mean_of(regrets);
        a.median_regret = median_of(regrets);
        a.mean_regret_ledger = mean_of(ledgers);
        result.aggregates.push_back(a);
    }

    if (config.horizons.size() >= 4) {
        std::vector<double> ts, gs;
        for (const auto& a : result.aggregates) {
            ts.push_back(static_cast<double>(a.T));
            gs.push_back(a.mean_gap);
        }
        try {
            result.fit = fit_rate(ts, gs);
        } catch (const std::invalid_argument&) {
            // too few positive gaps; leave fit empty
        }
    }

    if (!config.out_dir.empty()) {
        const std::filesystem::path dir(config.out_dir);
        std::filesystem::create_directories(dir);
        write_file(dir / "raw.csv", rows_to_csv(result.rows));
        write_file(dir / "aggregate.json", aggregate_to_json(result, config).dump(2) + "\n");
        if (config.trace) {
            for (std::size_t i = 0; i < jobs.size(); ++i) {
                const auto& job = jobs[i];
                const std::string stem =
                    "trace_" + std::to_string(job.T) + "_" + std::to_string(job.seed);
                write_file(dir / (stem + ".csv"), trace_to_csv(traces[i]));
                nlohmann::json header;
                header["variant"] = config.variant;
                header["k"] = config.k;
                header["rho"] = std::isfinite(config.rho) ? nlohmann::json(config.rho)
                                                          : nlohmann::json("inf");
                header["alpha"] = result.budget.alpha_star;
                header["delta"] = config.delta;
                header["seed"] = job.seed;
                header["run_seed"] = run_seed(config.master_seed, job.T, job.seed);
                header["instance"] = config.instance;
                write_file(dir / (stem + ".json"), header.dump(2) + "\n");
            }
        }
    }
    return result;
}

std::vector<CompareArm> compare_variants(const ExperimentConfig& config) {
    std::vector<CompareArm> arms;
    if (!config.compare_offsets.empty()) {
        if (config.compare_offsets.size() < 2)
            config_error("compare_offsets", "need at least 2 offsets");
        for (double offset : config.compare_offsets) {
            ExperimentConfig arm_cfg = config;
            arm_cfg.instance["optimum_offset"] = offset;
            arm_cfg.out_dir.clear();
            arm_cfg.compare_offsets.clear();
            CompareArm arm;
            arm.label = "offset=" + std::to_string(offset);
            arm.result = run_suite(arm_cfg);
            arms.push_back(std::move(arm));
        }
        return arms;
    }

    if (config.compare_variants.size() < 2)
        config_error("compare_variants", "need at least 2 variants (or compare_offsets)");
    for (const auto& variant : config.compare_variants) {
        ExperimentConfig arm_cfg = config;
        arm_cfg.variant = variant;
        arm_cfg.out_dir.clear();
        arm_cfg.compare_variants.clear();
        if (variant == "plain") arm_cfg.learner = "osd";
        if (variant == "optimistic") arm_cfg.learner = "optimistic_omd";
        if (variant == "strongly_convex") arm_cfg.learner = "sc_osd";
        if (variant == "parameter_free") {
            arm_cfg.learner = "parameter_free";
            arm_cfg.k = 3;
        }
        CompareArm arm;
        arm.label = variant;
        arm.result = run_suite(arm_cfg);
        arms.push_back(std::move(arm));
    }
    return arms;
}

}  // namespace dpotb::harness
