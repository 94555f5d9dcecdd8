#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpotb/vec.hpp"

namespace dpotb::learners {

// Online convex optimization contract. predict() must return a point of the
// domain; receive() hands over the gradient of the t-th loss at that point,
// an optional hint for the next round (optimistic learners only), and the
// per-round strong convexity (sc learners only).
class OnlineLearner {
public:
    virtual ~OnlineLearner() = default;

    virtual Vec predict() = 0;
    virtual void receive(const Vec& gradient, const Vec* hint_next = nullptr,
                         double strong_convexity = 0.0) = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

using StepSchedule = std::function<double(int t, double grad_norm_max)>;

// Projected online subgradient descent, w_{t+1} = proj(w_t - eta_t g_t).
// Default schedule eta_t = D / (G_hat sqrt(t)) with G_hat the running max
// observed gradient norm.
class Osd final : public OnlineLearner {
public:
    explicit Osd(Ball domain, StepSchedule schedule = {})
        : domain_(std::move(domain)), w_(domain_.center), schedule_(std::move(schedule)) {}

    Vec predict() override { return w_; }

    void receive(const Vec& gradient, const Vec* /*hint_next*/ = nullptr,
                 double /*strong_convexity*/ = 0.0) override {
        ++t_;
        grad_max_ = std::max(grad_max_, norm2(gradient));
        const double eta = schedule_ ? schedule_(t_, grad_max_) : default_step();
        if (eta <= 0.0) throw std::invalid_argument("Osd: step must be > 0");
        Vec next = w_;
        axpy(-eta, gradient, next);
        w_ = domain_.project(std::move(next));
    }

    [[nodiscard]] std::string name() const override { return "osd"; }

private:
    [[nodiscard]] double default_step() const {
        const double g = std::max(grad_max_, 1e-12);
        return domain_.diameter() / (g * std::sqrt(static_cast<double>(t_)));
    }

    Ball domain_;
    Vec w_;
    StepSchedule schedule_;
    double grad_max_ = 0.0;
    int t_ = 0;
};

// Follow-the-regularized-leader with psi(w) = ||w - w_1||^2:
// w_{t+1} = proj(argmin <sum g_i, w> + psi(w)/eta) = proj(w_1 - eta/2 sum g_i).
// eta = 0 selects the adaptive default eta_t = D / (G_hat sqrt(t)).
class Ftrl final : public OnlineLearner {
public:
    explicit Ftrl(Ball domain, double eta = 0.0)
        : domain_(std::move(domain)), w1_(domain_.center), w_(w1_),
          theta_(zeros(w1_.size())), eta_(eta) {
        if (eta < 0.0) throw std::invalid_argument("Ftrl: eta must be >= 0");
    }

    Vec predict() override { return w_; }

    void receive(const Vec& gradient, const Vec* /*hint_next*/ = nullptr,
                 double /*strong_convexity*/ = 0.0) override {
        ++t_;
        grad_max_ = std::max(grad_max_, norm2(gradient));
        axpy(1.0, gradient, theta_);
        const double eta = eta_ > 0.0
                               ? eta_
                               : domain_.diameter() /
                                     (std::max(grad_max_, 1e-12) * std::sqrt(static_cast<double>(t_)));
        Vec next = w1_;
        axpy(-eta / 2.0, theta_, next);
        w_ = domain_.project(std::move(next));
    }

    [[nodiscard]] std::string name() const override { return "ftrl"; }

private:
    Ball domain_;
    Vec w1_;
    Vec w_;
    Vec theta_;  // running gradient sum
    double eta_;
    double grad_max_ = 0.0;
    int t_ = 0;
};

// Optimistic online mirror descent: the prediction leans on the hint, the
// secondary iterate follows the true gradient.
//   w_t       = proj(theta_t - eta_t * hint_t)
//   theta_t+1 = proj(theta_t - eta_t * g_t)
// with eta_t = D / sqrt(lambda (floor^2 + sum_{i<t} ||g_i - hint_i||^2)).
class OptimisticOmd final : public OnlineLearner {
public:
    explicit OptimisticOmd(Ball domain, double lambda = 2.0, double denom_floor = 1.0)
        : domain_(std::move(domain)), theta_(domain_.center),
          hint_(zeros(theta_.size())), lambda_(lambda), floor_sq_(denom_floor * denom_floor) {
        if (denom_floor <= 0.0) throw std::invalid_argument("OptimisticOmd: floor must be > 0");
    }

    Vec predict() override {
        if (!hint_set_) ++missing_hints_;  // treated as a zero hint
        eta_ = domain_.diameter() / std::sqrt(lambda_ * (floor_sq_ + hint_gap_sq_));
        Vec w = theta_;
        axpy(-eta_, hint_, w);
        return domain_.project(std::move(w));
    }

    void receive(const Vec& gradient, const Vec* hint_next = nullptr,
                 double /*strong_convexity*/ = 0.0) override {
        Vec next = theta_;
        axpy(-eta_, gradient, next);
        theta_ = domain_.project(std::move(next));
        const Vec err = sub(gradient, hint_);
        hint_gap_sq_ += norm2_sq(err);
        if (hint_next != nullptr) {
            hint_ = *hint_next;
            hint_set_ = true;
        } else {
            hint_ = zeros(theta_.size());
            hint_set_ = false;
        }
    }

    [[nodiscard]] int missing_hints() const { return missing_hints_; }
    [[nodiscard]] std::string name() const override { return "optimistic_omd"; }

private:
    Ball domain_;
    Vec theta_;
    Vec hint_;
    double lambda_;
    double floor_sq_;
    double hint_gap_sq_ = 0.0;
    double eta_ = 0.0;
    bool hint_set_ = true;  // the first hint is zero by definition
    int missing_hints_ = 0;
};

// OSD for per-round strongly convex losses: w_{t+1} = proj(w_t - g_t / sum mu_i).
class ScOsd final : public OnlineLearner {
public:
    explicit ScOsd(Ball domain) : domain_(std::move(domain)), w_(domain_.center) {}

    Vec predict() override { return w_; }

    void receive(const Vec& gradient, const Vec* /*hint_next*/ = nullptr,
                 double strong_convexity = 0.0) override {
        if (strong_convexity <= 0.0)
            throw std::invalid_argument("ScOsd: requires strong_convexity > 0 each round");
        mu_sum_ += strong_convexity;
        Vec next = w_;
        axpy(-1.0 / mu_sum_, gradient, next);
        w_ = domain_.project(std::move(next));
    }

    [[nodiscard]] std::string name() const override { return "sc_osd"; }

private:
    Ball domain_;
    Vec w_;
    double mu_sum_ = 0.0;
};

// Parameter-free learner: KT coin betting on the magnitude ||w - center||
// composed with an adaptive unit-ball direction learner. Gradients must
// satisfy ||g|| <= lipschitz_cap (the conversion driver clips).
class ParameterFreeKt final : public OnlineLearner {
public:
    ParameterFreeKt(Ball domain, Vec center, double lipschitz_cap)
        : domain_(std::move(domain)), center_(std::move(center)), cap_(lipschitz_cap),
          direction_(zeros(center_.size())) {
        if (cap_ <= 0.0) throw std::invalid_argument("ParameterFreeKt: cap must be > 0");
    }

    ParameterFreeKt(Ball domain, double lipschitz_cap)
        : ParameterFreeKt(domain, domain.center, lipschitz_cap) {}

    Vec predict() override {
        const double bet_fraction = coin_sum_ / static_cast<double>(t_ + 1);
        double m = bet_fraction * wealth_;
        m = std::clamp(m, -domain_.radius, domain_.radius);
        magnitude_played_ = m;
        direction_played_ = direction_;
        Vec w = center_;
        axpy(m, direction_, w);
        return domain_.project(std::move(w));
    }

    void receive(const Vec& gradient, const Vec* /*hint_next*/ = nullptr,
                 double /*strong_convexity*/ = 0.0) override {
        ++t_;
        double coin = -dot(gradient, direction_played_) / cap_;
        coin = std::clamp(coin, -1.0, 1.0);
        wealth_ += coin * magnitude_played_;
        coin_sum_ += coin;

        dir_grad_sq_ += norm2_sq(gradient) / (cap_ * cap_);
        const double step = std::sqrt(2.0) / (cap_ * std::sqrt(std::max(dir_grad_sq_, 1e-12)));
        Vec u = direction_;
        axpy(-step, gradient, u);
        const double n = norm2(u);
        if (n > 1.0) scale(u, 1.0 / n);
        direction_ = std::move(u);
    }

    [[nodiscard]] double wealth() const { return wealth_; }
    [[nodiscard]] std::string name() const override { return "parameter_free"; }

private:
    Ball domain_;
    Vec center_;
    double cap_;
    Vec direction_;       // unit-ball iterate
    Vec direction_played_;
    double magnitude_played_ = 0.0;
    double wealth_ = 1.0;
    double coin_sum_ = 0.0;
    double dir_grad_sq_ = 0.0;
    int t_ = 0;
};

// Exact bookkeeping of Regret_T(u) = sum ell_t(w_t) - ell_t(u) for the
// linear (plus optional regularizer) losses handed to a learner. Keeps an
// incremental total against a fixed competitor and the full trace so the
// regret can be recomputed for any competitor.
class RegretLedger {
public:
    explicit RegretLedger(Vec competitor) : competitor_(std::move(competitor)) {}

    void begin_round(const Vec& w, const Vec& linear_grad) {
        rounds_.push_back(Round{w, linear_grad, 0.0, {}, 0.0, 0.0});
        incremental_ += dot(linear_grad, w) - dot(linear_grad, competitor_);
    }

    // r_t(u) = weight * ||u - center||^2
    void add_quadratic_reg(double weight, const Vec& center) {
        Round& r = rounds_.back();
        r.quad_weight = weight;
        r.quad_center = center;
        incremental_ += reg_value_quad(r, r.w) - reg_value_quad(r, competitor_);
    }

    // r_t(u) = xi * ||u - center|| + nu * ||u - center||^2 with a shared center
    void add_norm_reg(double xi, double nu, const Vec& center) {
        norm_center_ = center;
        Round& r = rounds_.back();
        r.xi = xi;
        r.nu = nu;
        incremental_ += reg_value_norm(r, r.w) - reg_value_norm(r, competitor_);
    }

    [[nodiscard]] double incremental() const { return incremental_; }
    [[nodiscard]] const Vec& competitor() const { return competitor_; }
    [[nodiscard]] int rounds() const { return static_cast<int>(rounds_.size()); }

    // Full recomputation from the stored trace.
    [[nodiscard]] double recompute(const Vec& u) const {
        double total = 0.0;
        for (const Round& r : rounds_) {
            total += dot(r.lin, r.w) - dot(r.lin, u);
            total += reg_value_quad(r, r.w) - reg_value_quad(r, u);
            total += reg_value_norm(r, r.w) - reg_value_norm(r, u);
        }
        return total;
    }

private:
    struct Round {
        Vec w;
        Vec lin;
        double quad_weight = 0.0;
        Vec quad_center;
        double xi = 0.0;
        double nu = 0.0;
    };

    static double reg_value_quad(const Round& r, const Vec& u) {
        if (r.quad_weight == 0.0) return 0.0;
        const double d = dist2(u, r.quad_center);
        return r.quad_weight * d * d;
    }

    [[nodiscard]] double reg_value_norm(const Round& r, const Vec& u) const {
        if (r.xi == 0.0 && r.nu == 0.0) return 0.0;
        const double d = dist2(u, norm_center_);
        return r.xi * d + r.nu * d * d;
    }

    Vec competitor_;
    Vec norm_center_;
    std::vector<Round> rounds_;
    double incremental_ = 0.0;
};

inline std::unique_ptr<OnlineLearner> make_learner(const std::string& name, const Ball& domain,
                                                   double pf_cap = 0.0) {
    if (name == "osd") return std::make_unique<Osd>(domain);
    if (name == "ftrl") return std::make_unique<Ftrl>(domain);
    if (name == "optimistic_omd") return std::make_unique<OptimisticOmd>(domain);
    if (name == "sc_osd") return std::make_unique<ScOsd>(domain);
    if (name == "parameter_free") {
        if (pf_cap <= 0.0)
            throw std::invalid_argument("make_learner: parameter_free needs a gradient cap");
        return std::make_unique<ParameterFreeKt>(domain, pf_cap);
    }
    throw std::invalid_argument("make_learner: unknown learner '" + name + "'");
}

}  // namespace dpotb::learners
