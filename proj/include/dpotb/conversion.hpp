#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpotb/accounting.hpp"
#include "dpotb/learners.hpp"
#include "dpotb/problems.hpp"
#include "dpotb/tree_noise.hpp"

namespace dpotb::conversion {

// beta_t = t^k with exact prefix sums (integers below 2^53 at desk scale).
class WeightSchedule {
public:
    WeightSchedule(int k, int horizon) : k_(k) {
        if (k < 1) throw std::invalid_argument("WeightSchedule: k must be >= 1");
        if (horizon < 1) throw std::invalid_argument("WeightSchedule: horizon must be >= 1");
        prefix_.resize(static_cast<std::size_t>(horizon) + 1, 0.0);
        for (int t = 1; t <= horizon; ++t)
            prefix_[static_cast<std::size_t>(t)] =
                prefix_[static_cast<std::size_t>(t) - 1] + ipow(static_cast<double>(t), k);
    }

    [[nodiscard]] int k() const { return k_; }
    [[nodiscard]] double beta(int t) const { return ipow(static_cast<double>(t), k_); }
    [[nodiscard]] double prefix(int t) const { return prefix_.at(static_cast<std::size_t>(t)); }

private:
    int k_;
    std::vector<double> prefix_;
};

enum class Variant { Plain, Optimistic, StronglyConvex, ParameterFree };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct VariantConfig {
    Variant mode = Variant::Plain;
    double mu = 0.0;         // StronglyConvex: strong convexity of the population loss
    double delta_prob = 0.1; // ParameterFree: high-probability failure budget
    double C = 1.0;          // ParameterFree: universal concentration constant
};

// x_t = (beta_{1:t-1} x_{t-1} + beta_t w_t) / beta_{1:t}
inline Vec step_average(const Vec& x_prev, const Vec& w_t, double beta_prefix_prev,
                        double beta_t) {
    if (beta_t <= 0.0) throw std::invalid_argument("step_average: beta_t must be > 0");
    const double total = beta_prefix_prev + beta_t;
    Vec x(x_prev.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = (beta_prefix_prev * x_prev[i] + beta_t * w_t[i]) / total;
    return x;
}

// delta_t = beta_t grad(x_t, z_t) - beta_{t-1} grad(x_{t-1}, z_t), beta_0 = 0.
inline Vec gradient_difference(const problems::ProblemInstance& instance, const Vec& x_t,
                               const Vec& x_prev, const problems::Datum& z, double beta_t,
                               double beta_prev) {
    Vec delta = instance.grad(x_t, z);
    scale(delta, beta_t);
    if (beta_prev > 0.0) {
        Vec prev_grad = instance.grad(x_prev, z);
        axpy(-beta_prev, prev_grad, delta);
    }
    return delta;
}

inline Vec loss_gradient_plain(const Vec& g, const Vec& gamma) { return add(g, gamma); }

// Gradient of the regularized loss <g + gamma, w> + (beta_t mu / 4)||w - x_t||^2
// at w; its per-round strong convexity is beta_t mu / 2.
inline Vec loss_gradient_sc(const Vec& g, const Vec& gamma, const Vec& w, const Vec& x_t,
                            double beta_t, double mu) {
    if (mu <= 0.0) throw std::invalid_argument("loss_gradient_sc: mu must be > 0");
    Vec out = add(g, gamma);
    const double c = beta_t * mu / 2.0;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * (w[i] - x_t[i]);
    return out;
}

// Gradient of <g + gamma, w> + xi_t ||w - c|| + nu_t ||w - c||^2 at w, with the
// zero subgradient chosen at the norm's kink.
inline Vec loss_gradient_pf(const Vec& g, const Vec& gamma, const Vec& w, const Vec& center,
                            double xi_t, double nu_t) {
    Vec out = add(g, gamma);
    Vec offset = sub(w, center);
    const double n = norm2(offset);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double u = n > 0.0 ? offset[i] / n : 0.0;
        out[i] += xi_t * u + 2.0 * nu_t * offset[i];
    }
    return out;
}

// Constants of the parameter-free variant (k = 3 forced):
//   kappa = 1 + DH/G, Phi = sqrt(log(20 d T log(2 kappa T) / delta)),
//   A = 8 sqrt(2) C^2, A' = 8 sqrt(d) sigma_D C^2,
//   xi_t = A G Phi t^{5/2} + A'(G + DH) Phi log2(2T) t^2 / rho,
//   nu_t = 28 A H Phi t^{5/2},
//   cap_t = G t^3 + A (2G + 57 DH) Phi t^{5/2} + 2 A'(G + DH) Phi log2(2T) t^2 / rho.
struct PfConstants {
    double kappa = 0.0;
    double Phi = 0.0;
    double A = 0.0;
    double A_prime = 0.0;
    std::vector<double> xi;   // index t = 1..T (slot 0 unused)
    std::vector<double> nu;
    std::vector<double> cap;  // per-round gradient cap G_hat_t
};

PfConstants pf_constants(double G, double H, double D, int d, int T, double delta_prob,
                         double C, double sigma_D, double rho);

// Live state of the main loop, exposed for the hint rule and tests.
struct ConversionState {
    int t = 0;
    Vec x;         // x_t
    Vec x_prev;    // x_{t-1}
    Vec g;         // running gradient-difference sum
    Vec prev_lin;  // g_{t-1} + gamma_{t-1}
    double max_disp = 0.0;
};

// Optimistic hint for round state.t + 1: the previous round's full linear
// gradient (zero before the first round).
inline Vec hint_provider(const ConversionState& state) {
    return state.t >= 1 ? state.prev_lin : zeros(state.g.size());
}

struct RunConfig {
    int k = 1;
    VariantConfig variant;
    double rho = accounting::kRhoInfinity;
    bool static_noise_scale = false;  // calibrate with D instead of the running max
    bool record_trace = false;        // per-round scalar rows
    bool keep_vectors = false;        // per-round vectors, for probes and tests
    bool evaluate_gap_per_round = false;
};

struct TraceRow {
    int t = 0;
    double gap = std::numeric_limits<double>::quiet_NaN();
    double g_norm = 0.0;
    double gamma_norm = 0.0;
    double sigma = 0.0;
    double delta_norm = 0.0;
    double max_disp = 0.0;
    int clip = 0;
};

struct RunOutput {
    Vec x_final;
    double gap = 0.0;
    double regret_linear = 0.0;      // sum <g_t + gamma_t, w_t - x*>
    double regret_ledger = 0.0;      // incremental, regularizers included
    double regret_recomputed = 0.0;  // from the stored trace
    long clip_count = 0;
    int rounds = 0;
    double max_disp = 0.0;

    // Suboptimality decomposition, evaluated with the population-gradient oracle:
    // beta_{1:T} gap  <=  linear regret + sum <beta_t grad L(x_t) - lin_t, w_t - x*>.
    double decomposition_lhs = 0.0;
    double decomposition_rhs = 0.0;
    double max_stability_violation = 0.0;  // | ||x_t - x_{t-1}|| b_{1:t} - b_t ||w_t - x_{t-1}|| | (relative)

    accounting::SensitivityLedger sensitivity;
    std::vector<TraceRow> trace;

    // Populated when keep_vectors is set.
    std::vector<Vec> w_hist;
    std::vector<Vec> x_hist;
    std::vector<Vec> delta_hist;
    std::vector<Vec> g_hist;
    std::vector<Vec> lin_hist;  // g_t + gamma_t
    std::vector<double> sigma_hist;

    [[nodiscard]] bool decomposition_ok(double rel_slack = 1e-6) const {
        const double scale = std::max({1.0, std::abs(decomposition_lhs), std::abs(decomposition_rhs)});
        return decomposition_lhs <= decomposition_rhs + rel_slack * scale;
    }
};

// Algorithm main loop: runs the configured variant for the dataset's full
// horizon and returns the final averaged iterate with its bookkeeping.
RunOutput run(const problems::ProblemInstance& instance, const problems::Dataset& dataset,
              learners::OnlineLearner& learner, const RunConfig& config,
              const geometry::NoiseDistribution& noise_dist, geometry::Rng noise_rng);

}  // namespace dpotb::conversion
