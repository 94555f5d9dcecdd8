#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "dpotb/harness.hpp"
#include "dpotb/learners.hpp"
#include "dpotb/tree_noise.hpp"

namespace dpotb::harness::checks {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// Greedy oracle for the index set: repeatedly add the largest power of two
// that fits in the remainder. Independent of the bit-prefix implementation.
std::vector<int> index_set_oracle(int t) {
    std::vector<int> members;
    int s = 0;
    while (s < t) {
        int p = 1;
        while (2 * p <= t - s) p *= 2;
        s += p;
        members.push_back(s);
    }
    return members;
}

// 1-D Renyi divergence between N(0, sigma^2) and N(gap, sigma^2) by composite
// Simpson quadrature of (1/(alpha-1)) log int P^alpha Q^(1-alpha), evaluated
// in log space so large alpha*gap^2/sigma^2 cannot overflow.
double renyi_quadrature_oracle(double gap, double sigma, double alpha) {
    const double mu_p = 0.0;
    const double mu_q = gap;
    const double center = alpha * mu_p + (1.0 - alpha) * mu_q;
    const double half_width = 50.0 * sigma;
    const int n = 40000;  // even
    const double a = center - half_width;
    const double h = 2.0 * half_width / n;
    const double log_norm = -std::log(sigma * std::sqrt(2.0 * M_PI));

    auto log_integrand = [&](double x) {
        const double lp = log_norm - 0.5 * (x - mu_p) * (x - mu_p) / (sigma * sigma);
        const double lq = log_norm - 0.5 * (x - mu_q) * (x - mu_q) / (sigma * sigma);
        return alpha * lp + (1.0 - alpha) * lq;
    };

    double log_max = -std::numeric_limits<double>::infinity();
    std::vector<double> logs(static_cast<std::size_t>(n) + 1);
    for (int i = 0; i <= n; ++i) {
        logs[static_cast<std::size_t>(i)] = log_integrand(a + h * i);
        log_max = std::max(log_max, logs[static_cast<std::size_t>(i)]);
    }
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double weight = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        sum += weight * std::exp(logs[static_cast<std::size_t>(i)] - log_max);
    }
    const double log_integral = log_max + std::log(sum * h / 3.0);
    return log_integral / (alpha - 1.0);
}

problems::ProblemInstance probe_instance(std::uint64_t seed) {
    return problems::make_quadratic(3, 2.0, 1.0, 0.5, seed);
}

}  // namespace

CheckResult index_partition(int t_max) {
    CheckResult result;
    result.name = "index_partition";
    std::vector<char> covered(static_cast<std::size_t>(t_max) + 1);
    for (int t = 1; t <= t_max; ++t) {
        const auto set = tree_noise::index_set(t);
        if (set.members != index_set_oracle(t)) {
            result.details = "index_set(" + std::to_string(t) + ") disagrees with greedy oracle";
            return result;
        }
        if (set.members.back() != t) {
            result.details = "max(I_t) != t at t=" + std::to_string(t);
            return result;
        }
        const double card_bound = std::log2(2.0 * t);
        if (static_cast<double>(set.members.size()) > card_bound) {
            result.details = "|I_t| exceeds log2(2t) at t=" + std::to_string(t);
            return result;
        }
        std::fill(covered.begin(), covered.begin() + t + 1, 0);
        for (int i : set.members) {
            const auto interval = tree_noise::node_interval(i);
            for (int q = interval.first; q <= interval.last; ++q) {
                if (q < 1 || q > t || covered[static_cast<std::size_t>(q)]) {
                    result.details = "intervals fail to partition [t] at t=" + std::to_string(t);
                    return result;
                }
                covered[static_cast<std::size_t>(q)] = 1;
            }
        }
        for (int q = 1; q <= t; ++q) {
            if (!covered[static_cast<std::size_t>(q)]) {
                result.details = "round " + std::to_string(q) + " uncovered at t=" + std::to_string(t);
                return result;
            }
        }
    }
    result.pass = true;
    result.details = "exact for all t <= " + std::to_string(t_max);
    return result;
}

CheckResult renyi_quadrature() {
    CheckResult result;
    result.name = "renyi_quadrature";
    const double alphas[] = {1.5, 2.0, 4.0, 16.0};
    const double gaps[] = {0.0, 0.5, 1.0, 3.0};
    const double sigmas[] = {0.5, 1.0, 2.0};
    double worst = 0.0;
    int points = 0;
    for (double alpha : alphas) {
        for (double gap : gaps) {
            for (double sigma : sigmas) {
                const Vec mu{0.0};
                const Vec mu_prime{gap};
                const double closed = geometry::gaussian_renyi_divergence(mu, mu_prime, sigma, alpha);
                const double quad = renyi_quadrature_oracle(gap, sigma, alpha);
                worst = std::max(worst, std::abs(closed - quad));
                ++points;
            }
        }
    }
    result.pass = worst <= 1e-6;
    result.margin = 1e-6 - worst;
    result.details = std::to_string(points) + " grid points, max |closed - quadrature| = " + fmt(worst);
    return result;
}

CheckResult rdp_to_dp_grid() {
    CheckResult result;
    result.name = "rdp_to_dp_grid";
    const double rhos[] = {0.25, 0.5, 1.0, 2.0};
    const double deltas[] = {1e-3, 1e-5, 1e-8};
    double worst_excess = 0.0;
    for (double rho : rhos) {
        for (double delta : deltas) {
            const auto report = accounting::budget_over_grid({rho, delta, {}});
            const double closed = 2.0 * rho * std::sqrt(std::log(1.0 / delta));
            const double continuous_min =
                rho * rho / 2.0 + rho * std::sqrt(2.0 * std::log(1.0 / delta));
            if (report.epsilon < continuous_min - 1e-9) {
                result.details = "grid epsilon below the continuous optimum (rho=" + fmt(rho) +
                                 ", delta=" + fmt(delta) + ")";
                return result;
            }
            worst_excess = std::max(worst_excess, report.epsilon / closed - 1.0);
        }
    }
    if (worst_excess > 0.01) {
        result.details = "grid epsilon exceeds 2 rho sqrt(log(1/delta)) by " + fmt(100.0 * worst_excess) + "%";
        return result;
    }

    // Pinned point: rho = 1, delta = 1/e gives exactly 2 on the default grid.
    const auto pinned = accounting::budget_over_grid({1.0, std::exp(-1.0), {}});
    if (pinned.epsilon < 2.0 - 1e-9 || pinned.epsilon > 2.001) {
        result.details = "pinned point (rho=1, delta=1/e) epsilon = " + fmt(pinned.epsilon);
        return result;
    }
    result.pass = true;
    result.margin = 0.01 - worst_excess;
    result.details = "12-point grid within tolerance; pinned epsilon = " + fmt(pinned.epsilon);
    return result;
}

CheckResult calibration_identity(int t_max) {
    CheckResult result;
    result.name = "calibration_identity";
    const double params[][3] = {{1.0, 0.0, 0.0}, {2.5, 1.0, 0.7}, {1.0, 3.0, 2.0}};
    const double rhos[] = {0.5, 1.0, 2.0};
    const int T = t_max;
    const double log2_2T = std::log2(2.0 * T);
    long checked = 0;
    for (int k = 1; k <= 3; ++k) {
        for (const auto& p : params) {
            for (double rho : rhos) {
                for (int t = 1; t <= t_max; ++t) {
                    const double sigma_sq =
                        tree_noise::sigma_schedule_sq(t, k, rho, p[0], p[1], p[2], T);
                    const double delta = accounting::delta_sensitivity(t, k, p[0], p[1], p[2]);
                    const double expected = delta * delta * log2_2T / (rho * rho);
                    if (sigma_sq != expected) {
                        result.details = "mismatch at t=" + std::to_string(t) + ", k=" + std::to_string(k);
                        return result;
                    }
                    ++checked;
                }
            }
        }
    }
    result.pass = true;
    result.details = std::to_string(checked) + " exact floating-point equalities";
    return result;
}

CheckResult sensitivity_probe(int T, int triples, std::uint64_t seed) {
    CheckResult result;
    result.name = "sensitivity_probe";
    const auto instance = probe_instance(seed);
    const double rho = 1.0;
    const double alpha = 2.0;
    const auto dist = geometry::NoiseDistribution::gaussian(instance.dim);
    geometry::Rng trial_rng = geometry::Rng(seed).split(0x9206e);

    double worst_budget = 0.0;
    for (int trial = 0; trial < triples; ++trial) {
        const int k = 1 + trial % 2;  // alternate weight exponents
        const conversion::WeightSchedule schedule(k, T);
        const std::uint64_t ts = trial_rng.next_u64();
        geometry::Rng base(ts);
        geometry::Rng data_rng = base.split(1);
        geometry::Rng swap_rng = base.split(2);
        geometry::Rng noise_rng = base.split(3);
        const int q = 1 + static_cast<int>(base.next_u64() % static_cast<std::uint64_t>(T));

        const auto Z = problems::make_dataset(instance, T, data_rng);
        const auto Zp = problems::neighbor_dataset(instance, Z, q, swap_rng);

        conversion::RunConfig rc;
        rc.k = k;
        rc.rho = rho;
        rc.keep_vectors = true;
        learners::Osd learner(instance.domain);
        const auto out = conversion::run(instance, Z, learner, rc, dist, noise_rng);

        // Conditional replay: recompute every delta on the first run's
        // trajectory with the neighboring data.
        std::vector<Vec> delta_prime(static_cast<std::size_t>(T));
        for (int t = 1; t <= T; ++t) {
            const Vec& x_t = out.x_hist[static_cast<std::size_t>(t - 1)];
            const Vec x_prev = t > 1 ? out.x_hist[static_cast<std::size_t>(t - 2)]
                                     : zeros(static_cast<std::size_t>(instance.dim));
            delta_prime[static_cast<std::size_t>(t - 1)] = conversion::gradient_difference(
                instance, x_t, x_prev, Zp.at_round(t), schedule.beta(t),
                t > 1 ? schedule.beta(t - 1) : 0.0);
        }

        double renyi_sum = 0.0;
        int in_count = 0;
        for (int i = 1; i <= T; ++i) {
            const auto interval = tree_noise::node_interval(i);
            Vec f = zeros(static_cast<std::size_t>(instance.dim));
            Vec f_prime = zeros(static_cast<std::size_t>(instance.dim));
            for (int j = interval.first; j <= interval.last; ++j) {
                axpy(1.0, out.delta_hist[static_cast<std::size_t>(j - 1)], f);
                axpy(1.0, delta_prime[static_cast<std::size_t>(j - 1)], f_prime);
            }
            const auto& node = out.sensitivity.nodes[static_cast<std::size_t>(i - 1)];
            if (!interval.contains(q)) {
                if (std::memcmp(f.data(), f_prime.data(), f.size() * sizeof(double)) != 0) {
                    result.details = "node " + std::to_string(i) + " not bit-identical (q=" +
                                     std::to_string(q) + ")";
                    return result;
                }
            } else {
                ++in_count;
                const double diff = dist2(f, f_prime);
                if (diff > node.delta_bound) {
                    result.details = "node " + std::to_string(i) + " sensitivity " + fmt(diff) +
                                     " exceeds ledger bound " + fmt(node.delta_bound);
                    return result;
                }
                renyi_sum += geometry::gaussian_renyi_divergence(f, f_prime, node.sigma, alpha);
            }
        }
        if (static_cast<double>(in_count) > std::log2(2.0 * T)) {
            result.details = "|IN(q)| exceeds log2(2T)";
            return result;
        }
        const double budget_cap = alpha * rho * rho / 2.0;
        if (renyi_sum > budget_cap) {
            result.details = "accumulated Renyi budget " + fmt(renyi_sum) + " exceeds " + fmt(budget_cap);
            return result;
        }
        worst_budget = std::max(worst_budget, renyi_sum / budget_cap);
    }
    result.pass = true;
    result.margin = 1.0 - worst_budget;
    result.details = std::to_string(triples) + " coupled triples at T=" + std::to_string(T) +
                     "; worst budget fraction " + fmt(worst_budget);
    return result;
}

CheckResult martingale_bound(int trials, std::uint64_t seed) {
    CheckResult result;
    result.name = "martingale_bound";
    const double lambda = 2.0;
    const double slack = 1.0 + 4.0 / std::sqrt(static_cast<double>(trials));
    const int rounds = 48;
    const std::size_t dim = 16;

    // Family (a): independent scaled Gaussians. Family (b): history-dependent
    // directions with Rademacher signs. Both have known per-step second
    // moments, so the bound (2/lambda) sum E||X_t||^2 is fully pinned.
    double worst_ratio = 0.0;
    for (int family = 0; family < 2; ++family) {
        geometry::Rng rng = geometry::Rng(seed).split(0x3a7 + static_cast<std::uint64_t>(family));
        double expected_sum = 0.0;
        std::vector<double> sigmas(static_cast<std::size_t>(rounds));
        for (int t = 0; t < rounds; ++t) {
            sigmas[static_cast<std::size_t>(t)] = 0.5 + static_cast<double>(t % 4);
            expected_sum += family == 0
                                ? sigmas[static_cast<std::size_t>(t)] * sigmas[static_cast<std::size_t>(t)] *
                                      static_cast<double>(dim)
                                : 1.0;
        }
        const double bound = (2.0 / lambda) * expected_sum;

        double acc = 0.0;
        for (int trial = 0; trial < trials; ++trial) {
            Vec sum = zeros(dim);
            for (int t = 0; t < rounds; ++t) {
                if (family == 0) {
                    Vec x = rng.normal_vec(dim);
                    scale(x, sigmas[static_cast<std::size_t>(t)]);
                    axpy(1.0, x, sum);
                } else {
                    // Unit direction chosen from the running sum (or e_1),
                    // multiplied by an independent fair sign.
                    Vec dir = sum;
                    const double n = norm2(dir);
                    if (n > 1e-12) {
                        scale(dir, 1.0 / n);
                    } else {
                        dir = zeros(dim);
                        dir[0] = 1.0;
                    }
                    const double sign = (rng.next_u64() & 1ULL) ? 1.0 : -1.0;
                    axpy(sign, dir, sum);
                }
            }
            acc += norm2_sq(sum);
        }
        const double empirical = acc / static_cast<double>(trials);
        const double ratio = empirical / (bound * slack);
        worst_ratio = std::max(worst_ratio, ratio);
        if (ratio > 1.0) {
            result.details = "family " + std::to_string(family) + " empirical " + fmt(empirical) +
                             " exceeds bound*" + fmt(slack) + " = " + fmt(bound * slack);
            return result;
        }
    }
    result.pass = true;
    result.margin = 1.0 - worst_ratio;
    result.details = std::to_string(trials) + " trials; worst empirical/bound fraction " + fmt(worst_ratio);
    return result;
}

CheckResult variance_bound(int seeds, int T, std::uint64_t seed) {
    CheckResult result;
    result.name = "variance_bound";
    const auto instance = problems::make_quadratic(5, 2.0, 1.0, 0.5, seed);
    const auto dist = geometry::NoiseDistribution::gaussian(instance.dim);
    const double lambda = 2.0;
    const double slack = 1.0 + 4.0 / std::sqrt(static_cast<double>(seeds));
    const int checkpoints[] = {T / 4, T / 2, T};

    double worst_ratio = 0.0;
    for (int k : {1, 3}) {
        double acc[3] = {0.0, 0.0, 0.0};
        for (int s = 0; s < seeds; ++s) {
            const std::uint64_t rs = run_seed(seed, T + k, s);
            geometry::Rng base(rs);
            geometry::Rng data_rng = base.split(0xDA7AULL);
            geometry::Rng noise_rng = base.split(0x9015EULL);
            const auto dataset = problems::make_dataset(instance, T, data_rng);
            conversion::RunConfig rc;
            rc.k = k;
            rc.keep_vectors = true;
            learners::Osd learner(instance.domain);
            const auto out = conversion::run(instance, dataset, learner, rc, dist, noise_rng);
            for (int c = 0; c < 3; ++c) {
                const int t = checkpoints[c];
                const Vec& x_t = out.x_hist[static_cast<std::size_t>(t - 1)];
                const Vec& g_t = out.g_hist[static_cast<std::size_t>(t - 1)];
                Vec err = instance.population_grad(x_t);
                scale(err, ipow(static_cast<double>(t), k));
                axpy(-1.0, g_t, err);
                acc[c] += norm2_sq(err);
            }
        }
        for (int c = 0; c < 3; ++c) {
            const int t = checkpoints[c];
            const double empirical = acc[c] / static_cast<double>(seeds);
            const double bound = 4.0 * (k + 1) * (k + 1) *
                                 (instance.sigma_G * instance.sigma_G +
                                  instance.D() * instance.D() * instance.sigma_H * instance.sigma_H) *
                                 ipow(static_cast<double>(t), 2 * k - 1) / lambda;
            const double ratio = empirical / (bound * slack);
            worst_ratio = std::max(worst_ratio, ratio);
            if (ratio > 1.0) {
                result.details = "k=" + std::to_string(k) + ", t=" + std::to_string(t) +
                                 ": empirical " + fmt(empirical) + " exceeds bound*slack " +
                                 fmt(bound * slack);
                return result;
            }
        }
    }
    result.pass = true;
    result.margin = 1.0 - worst_ratio;
    result.details = std::to_string(seeds) + " seeds, T=" + std::to_string(T) +
                     ", k in {1,3}; worst empirical/bound fraction " + fmt(worst_ratio);
    return result;
}

CheckResult decomposition_spot(std::uint64_t seed) {
    CheckResult result;
    result.name = "decomposition";
    struct Case {
        conversion::Variant mode;
        int k;
        double rho;
    };
    const Case cases[] = {{conversion::Variant::Plain, 1, 1.0},
                          {conversion::Variant::Optimistic, 1, accounting::kRhoInfinity},
                          {conversion::Variant::StronglyConvex, 2, 2.0},
                          {conversion::Variant::ParameterFree, 3, accounting::kRhoInfinity}};
    const auto instance = problems::make_quadratic(4, 2.0, 1.0, 0.5, seed);
    const auto dist = geometry::NoiseDistribution::gaussian(instance.dim);
    const int T = 128;

    for (const auto& c : cases) {
        geometry::Rng base(geometry::mix64(seed, static_cast<std::uint64_t>(c.k)));
        const auto dataset = problems::make_dataset(instance, T, base.split(1));
        conversion::RunConfig rc;
        rc.k = c.k;
        rc.rho = c.rho;
        rc.variant.mode = c.mode;
        rc.variant.mu = instance.mu;

        std::unique_ptr<learners::OnlineLearner> learner;
        switch (c.mode) {
            case conversion::Variant::Plain:
                learner = std::make_unique<learners::Osd>(instance.domain);
                break;
            case conversion::Variant::Optimistic:
                learner = std::make_unique<learners::OptimisticOmd>(instance.domain);
                break;
            case conversion::Variant::StronglyConvex:
                learner = std::make_unique<learners::ScOsd>(instance.domain);
                break;
            case conversion::Variant::ParameterFree: {
                const auto pf =
                    conversion::pf_constants(instance.G, instance.H, instance.D(), instance.dim,
                                             T, rc.variant.delta_prob, rc.variant.C,
                                             dist.sub_gaussian_sigma, c.rho);
                learner = std::make_unique<learners::ParameterFreeKt>(instance.domain, pf.cap.back());
                break;
            }
        }
        const auto out = conversion::run(instance, dataset, *learner, rc, dist, base.split(2));
        if (!out.decomposition_ok()) {
            result.details = conversion::variant_name(c.mode) + ": decomposition violated (lhs=" +
                             fmt(out.decomposition_lhs) + ", rhs=" + fmt(out.decomposition_rhs) + ")";
            return result;
        }
        if (out.max_stability_violation > 1e-9) {
            result.details = conversion::variant_name(c.mode) + ": stability identity off by " +
                             fmt(out.max_stability_violation);
            return result;
        }
        const double ledger_diff = std::abs(out.regret_ledger - out.regret_recomputed) /
                                   std::max(1.0, std::abs(out.regret_ledger));
        if (ledger_diff > 1e-9) {
            result.details = conversion::variant_name(c.mode) + ": ledger recomputation off by " +
                             fmt(ledger_diff);
            return result;
        }
        if (!out.sensitivity.calibrated()) {
            result.details = conversion::variant_name(c.mode) + ": sigma ledger not calibrated";
            return result;
        }
    }
    result.pass = true;
    result.details = "decomposition, stability, ledger and calibration hold on all four variants";
    return result;
}

CheckResult determinism(std::uint64_t seed) {
    CheckResult result;
    result.name = "determinism";
    ExperimentConfig cfg;
    cfg.instance = problems::describe(problems::make_quadratic(4, 2.0, 1.0, 0.5, seed));
    cfg.variant = "plain";
    cfg.k = 1;
    cfg.learner = "osd";
    cfg.rho = 1.0;
    cfg.delta = 1e-6;
    cfg.horizons = {64, 128};
    cfg.seeds = 5;
    cfg.master_seed = seed;

    auto mask_wall = [](std::vector<RunRow> rows) {
        for (auto& r : rows) r.wall_ms = 0.0;
        return rows_to_csv(rows);
    };
    const auto first = run_suite(cfg);
    const auto second = run_suite(cfg);
    if (mask_wall(first.rows) != mask_wall(second.rows)) {
        result.details = "raw rows differ between repeated runs";
        return result;
    }
    result.pass = true;
    result.details = "two runs byte-identical (wall_ms timing column masked)";
    return result;
}

}  // namespace dpotb::harness::checks

namespace dpotb::harness {

VerifyReport verify_all(VerifyLevel level) {
    const bool full = level == VerifyLevel::Full;
    VerifyReport report;
    report.checks.push_back(checks::index_partition(4096));
    report.checks.push_back(checks::renyi_quadrature());
    report.checks.push_back(checks::rdp_to_dp_grid());
    report.checks.push_back(checks::calibration_identity(full ? 10000 : 4096));
    report.checks.push_back(checks::sensitivity_probe(full ? 256 : 64, full ? 10 : 3, 20260808));
    report.checks.push_back(checks::martingale_bound(full ? 1000 : 300, 20260809));
    report.checks.push_back(checks::variance_bound(full ? 500 : 80, full ? 512 : 256, 20260810));
    report.checks.push_back(checks::decomposition_spot(20260811));
    report.checks.push_back(checks::determinism(20260812));
    return report;
}

}  // namespace dpotb::harness
