#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpotb/vec.hpp"

namespace dpotb::accounting {

inline constexpr double kRhoInfinity = std::numeric_limits<double>::infinity();

// Sensitivity of the t-th tree node value F_t = sum of gradient differences
// over the node's interval: Delta_t = 2(k+1) t^{k-1} (G + H * max_disp).
inline double delta_sensitivity(int t, int k, double G, double H, double max_disp) {
    if (t < 1 || k < 1) throw std::invalid_argument("delta_sensitivity: t and k must be >= 1");
    return 2.0 * (k + 1) * ipow(static_cast<double>(t), k - 1) * (G + H * max_disp);
}

// Per-round norm bound on a single gradient difference:
// ||delta_t|| <= (k+1)(G + H*disp_t) t^{k-1}.
inline double delta_norm_bound(int t, int k, double G, double H, double disp) {
    return (k + 1) * (G + H * disp) * ipow(static_cast<double>(t), k - 1);
}

// RDP -> (eps, delta)-DP: eps = eps_rdp + log(1/delta) / (alpha - 1).
inline double rdp_to_dp(double alpha, double eps_rdp, double delta) {
    if (alpha <= 1.0) throw std::invalid_argument("rdp_to_dp: alpha must be > 1");
    if (delta <= 0.0 || delta >= 1.0) throw std::invalid_argument("rdp_to_dp: delta must be in (0,1)");
    return eps_rdp + std::log(1.0 / delta) / (alpha - 1.0);
}

struct PrivacyBudget {
    double rho = kRhoInfinity;          // infinity sentinel = non-private
    double delta = 1e-6;
    std::vector<double> alpha_grid;     // empty -> default grid

    [[nodiscard]] bool is_private() const { return std::isfinite(rho); }

    // Default grid {1 + 2^j / 8 : j = 0..12}; brackets the analytic
    // optimum for rho in [0.1, 10] and delta >= 1e-10.
    static std::vector<double> default_alpha_grid() {
        std::vector<double> grid;
        grid.reserve(13);
        for (int j = 0; j <= 12; ++j) grid.push_back(1.0 + ipow(2.0, j) / 8.0);
        return grid;
    }
};

struct BudgetReport {
    double rho = kRhoInfinity;
    double delta = 0.0;
    double alpha_star = 0.0;
    double epsilon = kRhoInfinity;
    bool grid_widened = false;
};

// Minimize alpha*rho^2/2 + log(1/delta)/(alpha-1) over the alpha grid.
// If the grid fails to bracket alpha* = 1 + sqrt(2 log(1/delta))/rho it is
// widened (and the report flags it).
inline BudgetReport budget_over_grid(const PrivacyBudget& budget) {
    BudgetReport report;
    report.rho = budget.rho;
    report.delta = budget.delta;
    if (!budget.is_private()) return report;  // epsilon stays infinite
    if (budget.rho <= 0.0) throw std::invalid_argument("budget_over_grid: rho must be > 0");

    std::vector<double> grid =
        budget.alpha_grid.empty() ? PrivacyBudget::default_alpha_grid() : budget.alpha_grid;
    std::sort(grid.begin(), grid.end());
    const double alpha_opt =
        1.0 + std::sqrt(2.0 * std::log(1.0 / budget.delta)) / budget.rho;
    while (grid.back() < alpha_opt) {
        grid.push_back(1.0 + 2.0 * (grid.back() - 1.0));
        report.grid_widened = true;
    }
    if (grid.front() > alpha_opt) {
        grid.insert(grid.begin(), 1.0 + 0.5 * (grid.front() - 1.0));
        report.grid_widened = true;
    }

    double best = kRhoInfinity;
    double best_alpha = grid.front();
    for (double alpha : grid) {
        const double eps = rdp_to_dp(alpha, alpha * budget.rho * budget.rho / 2.0, budget.delta);
        if (eps < best) {
            best = eps;
            best_alpha = alpha;
        }
    }
    report.alpha_star = best_alpha;
    report.epsilon = best;
    return report;
}

// Advanced composition over the tree: S = max_q sum_{t in IN(q)} alpha*rho_t^2/2,
// where in_sets[q] lists the nodes whose interval contains example q+1.
inline double tree_composition_budget(const std::vector<double>& rho_per_node,
                                      const std::vector<std::vector<int>>& in_sets,
                                      double alpha) {
    double worst = 0.0;
    for (const auto& nodes : in_sets) {
        double s = 0.0;
        for (int node : nodes) {
            const double r = rho_per_node.at(static_cast<std::size_t>(node - 1));
            s += alpha * r * r / 2.0;
        }
        worst = std::max(worst, s);
    }
    return worst;
}

// Per-node record kept while a conversion runs; the calibration invariant
// sigma^2 >= Delta^2 log2(2T) / rho^2 is checked against these entries.
struct SensitivityLedger {
    struct Node {
        int index = 0;
        double delta_bound = 0.0;
        double sigma = 0.0;
        double sigma_sq = 0.0;  // schedule output; authoritative for calibration
    };

    int horizon = 0;
    int k = 1;
    double rho = kRhoInfinity;
    std::vector<Node> nodes;

    void record(int index, double delta_bound, double sigma, double sigma_sq) {
        nodes.push_back({index, delta_bound, sigma, sigma_sq});
    }

    [[nodiscard]] bool calibrated() const {
        if (!std::isfinite(rho)) return true;  // sigma = 0 everywhere, nothing to check
        const double log2_2T = std::log2(2.0 * horizon);
        for (const auto& n : nodes) {
            if (n.sigma_sq < n.delta_bound * n.delta_bound * log2_2T / (rho * rho))
                return false;
        }
        return true;
    }
};

enum class BoundVariant { Plain, Optimistic, StronglyConvex };

struct BoundConstants {
    int k = 1;
    double lambda = 2.0;
    double D = 0.0;
    double G = 0.0;
    double H = 0.0;
    double sigma_G = 0.0;
    double sigma_H = 0.0;
    double mu = 0.0;       // StronglyConvex only
    double V = 0.0;        // noise second-moment constant (Gaussian: d)
    double rho = kRhoInfinity;
};

// Closed-form suboptimality bound of the matching convergence guarantee,
// with the regret term supplied from measurement.
inline double theoretical_gap_bound(BoundVariant variant, const BoundConstants& c,
                                    int T, double regret_estimate) {
    const double k1 = c.k + 1.0;
    const double Tk1 = ipow(static_cast<double>(T), c.k + 1);
    const double log2_2T = std::log2(2.0 * T);
    const double privacy_scale = std::isfinite(c.rho) ? 1.0 / c.rho : 0.0;
    switch (variant) {
        case BoundVariant::Plain:
        case BoundVariant::Optimistic: {
            const double regret_term = k1 * regret_estimate / Tk1;
            const double variance_term = (c.sigma_G + c.D * c.sigma_H) / std::sqrt(static_cast<double>(T));
            const double noise_term =
                std::sqrt(2.0 * c.V) * (c.G + c.D * c.H) * log2_2T * privacy_scale / T;
            return regret_term +
                   2.0 * k1 * k1 * c.D / std::sqrt(c.lambda) * (variance_term + noise_term);
        }
        case BoundVariant::StronglyConvex: {
            if (c.mu <= 0.0) throw std::invalid_argument("theoretical_gap_bound: mu must be > 0");
            const double regret_term = k1 * regret_estimate / Tk1;
            const double sg = c.sigma_G + c.D * c.sigma_H;
            const double gh = c.G + c.D * c.H;
            const double tail =
                sg * sg / T +
                2.0 * c.V * gh * gh * log2_2T * log2_2T * privacy_scale * privacy_scale / (static_cast<double>(T) * T);
            return regret_term + 16.0 * k1 * k1 * k1 / (c.lambda * c.mu) * tail;
        }
    }
    throw std::logic_error("theoretical_gap_bound: unknown variant");
}

}  // namespace dpotb::accounting
