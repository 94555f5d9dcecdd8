#include "dpotb/conversion.hpp"

#include <algorithm>

namespace dpotb::conversion {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Plain: return "plain";
        case Variant::Optimistic: return "optimistic";
        case Variant::StronglyConvex: return "strongly_convex";
        case Variant::ParameterFree: return "parameter_free";
    }
    throw std::logic_error("variant_name: unknown variant");
}

Variant variant_from_name(const std::string& name) {
    if (name == "plain") return Variant::Plain;
    if (name == "optimistic") return Variant::Optimistic;
    if (name == "strongly_convex") return Variant::StronglyConvex;
    if (name == "parameter_free") return Variant::ParameterFree;
    throw std::invalid_argument("variant_from_name: unknown variant '" + name + "'");
}

PfConstants pf_constants(double G, double H, double D, int d, int T, double delta_prob,
                         double C, double sigma_D, double rho) {
    if (G <= 0.0) throw std::invalid_argument("pf_constants: G must be > 0");
    if (delta_prob <= 0.0 || delta_prob >= 1.0)
        throw std::invalid_argument("pf_constants: delta_prob must be in (0,1)");
    if (C <= 0.0) throw std::invalid_argument("pf_constants: C must be > 0");
    if (d < 1 || T < 1) throw std::invalid_argument("pf_constants: d and T must be >= 1");

    PfConstants out;
    out.kappa = 1.0 + D * H / G;
    out.Phi = std::sqrt(std::log(20.0 * d * T * std::log(2.0 * out.kappa * T) / delta_prob));
    out.A = 8.0 * std::sqrt(2.0) * C * C;
    out.A_prime = 8.0 * std::sqrt(static_cast<double>(d)) * sigma_D * C * C;

    const double log2_2T = std::log2(2.0 * T);
    const double privacy_scale = std::isfinite(rho) ? 1.0 / rho : 0.0;
    out.xi.assign(static_cast<std::size_t>(T) + 1, 0.0);
    out.nu.assign(static_cast<std::size_t>(T) + 1, 0.0);
    out.cap.assign(static_cast<std::size_t>(T) + 1, 0.0);
    for (int t = 1; t <= T; ++t) {
        const double td = static_cast<double>(t);
        const double t52 = td * td * std::sqrt(td);
        const double noise_part = out.A_prime * (G + D * H) * out.Phi * log2_2T * td * td * privacy_scale;
        out.xi[static_cast<std::size_t>(t)] = out.A * G * out.Phi * t52 + noise_part;
        out.nu[static_cast<std::size_t>(t)] = 28.0 * out.A * H * out.Phi * t52;
        out.cap[static_cast<std::size_t>(t)] =
            G * td * td * td + out.A * (2.0 * G + 57.0 * D * H) * out.Phi * t52 + 2.0 * noise_part;
    }
    return out;
}

RunOutput run(const problems::ProblemInstance& instance, const problems::Dataset& dataset,
              learners::OnlineLearner& learner, const RunConfig& config,
              const geometry::NoiseDistribution& noise_dist, geometry::Rng noise_rng) {
    const int T = dataset.T();
    if (T < 1) throw std::invalid_argument("run: dataset is empty");
    if (noise_dist.dim != instance.dim)
        throw std::invalid_argument("run: noise dimension does not match the instance");

    const Variant mode = config.variant.mode;
    if (mode == Variant::StronglyConvex && config.variant.mu <= 0.0)
        throw std::invalid_argument("run: strongly convex variant needs mu > 0");
    int k = config.k;
    if (mode == Variant::ParameterFree) {
        if (k != 3) throw std::invalid_argument("run: parameter-free variant requires k = 3");
        if (noise_dist.sub_gaussian_sigma <= 0.0 && std::isfinite(config.rho))
            throw std::invalid_argument("run: parameter-free variant needs a sub-Gaussian noise distribution");
    }

    const WeightSchedule schedule(k, T);
    const double D = instance.D();
    const double G = instance.G;
    const double H = instance.H;
    const auto dim = static_cast<std::size_t>(instance.dim);

    PfConstants pf;
    if (mode == Variant::ParameterFree)
        pf = pf_constants(G, H, D, instance.dim, T, config.variant.delta_prob, config.variant.C,
                          noise_dist.sub_gaussian_sigma, config.rho);

    tree_noise::NoiseTree tree(noise_dist, noise_rng, T);
    learners::RegretLedger ledger(instance.optimum);

    RunOutput out;
    out.rounds = T;
    out.sensitivity.horizon = T;
    out.sensitivity.k = k;
    out.sensitivity.rho = config.rho;

    ConversionState state;
    state.x_prev = zeros(dim);  // x_0 = 0
    state.g = zeros(dim);
    state.prev_lin = zeros(dim);

    double decomp_sum = 0.0;
    const bool has_grad_oracle = static_cast<bool>(instance.population_grad);

    for (int t = 1; t <= T; ++t) {
        const double beta_t = schedule.beta(t);
        const double beta_prev = t > 1 ? schedule.beta(t - 1) : 0.0;
        const double prefix_prev = schedule.prefix(t - 1);
        const double prefix_cur = schedule.prefix(t);

        Vec w = learner.predict();
        if (!instance.domain.contains(w, 1e-9))
            throw std::logic_error("run: learner prediction escaped the domain");

        Vec x = step_average(state.x_prev, w, prefix_prev, beta_t);

        // Stability identity ||x_t - x_{t-1}|| b_{1:t} = b_t ||w_t - x_{t-1}||.
        const double disp = dist2(w, state.x_prev);
        {
            const double lhs = dist2(x, state.x_prev) * prefix_cur;
            const double rhs = beta_t * disp;
            const double rel = std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs));
            out.max_stability_violation = std::max(out.max_stability_violation, rel);
        }

        const problems::Datum& z = dataset.at_round(t);
        Vec delta = gradient_difference(instance, x, state.x_prev, z, beta_t, beta_prev);
        const double delta_norm = norm2(delta);
        const double delta_bound = accounting::delta_norm_bound(t, k, G, H, disp);
        if (delta_norm > delta_bound * (1.0 + 1e-9) + 1e-12)
            throw std::logic_error("run: gradient-difference bound violated; instance constants are wrong");

        axpy(1.0, delta, state.g);
        state.max_disp = std::max(state.max_disp, disp);

        const double scale_disp = config.static_noise_scale ? D : state.max_disp;
        const double sigma_sq =
            tree_noise::sigma_schedule_sq(t, k, config.rho, G, H, scale_disp, T);
        const double sigma = std::sqrt(sigma_sq);
        Vec gamma = tree.advance(t, sigma);
        out.sensitivity.record(t, accounting::delta_sensitivity(t, k, G, H, scale_disp), sigma,
                               sigma_sq);

        Vec lin = loss_gradient_plain(state.g, gamma);

        Vec learner_grad;
        double mu_t = 0.0;
        bool clipped = false;
        switch (mode) {
            case Variant::Plain:
            case Variant::Optimistic:
                learner_grad = lin;
                break;
            case Variant::StronglyConvex:
                mu_t = beta_t * config.variant.mu / 2.0;
                learner_grad = loss_gradient_sc(state.g, gamma, w, x, beta_t, config.variant.mu);
                break;
            case Variant::ParameterFree: {
                const double xi = pf.xi[static_cast<std::size_t>(t)];
                const double nu = pf.nu[static_cast<std::size_t>(t)];
                learner_grad =
                    loss_gradient_pf(state.g, gamma, w, instance.domain.center, xi, nu);
                const double cap = pf.cap[static_cast<std::size_t>(t)];
                const double n = norm2(learner_grad);
                if (n > cap) {
                    scale(learner_grad, cap / n);
                    ++out.clip_count;
                    clipped = true;
                }
                break;
            }
        }

        ledger.begin_round(w, lin);
        if (mode == Variant::StronglyConvex)
            ledger.add_quadratic_reg(beta_t * config.variant.mu / 4.0, x);
        if (mode == Variant::ParameterFree)
            ledger.add_norm_reg(pf.xi[static_cast<std::size_t>(t)],
                                pf.nu[static_cast<std::size_t>(t)], instance.domain.center);
        out.regret_linear += dot(lin, w) - dot(lin, instance.optimum);

        if (has_grad_oracle) {
            Vec pop_grad = instance.population_grad(x);
            double term = 0.0;
            for (std::size_t i = 0; i < dim; ++i)
                term += (beta_t * pop_grad[i] - lin[i]) * (w[i] - instance.optimum[i]);
            decomp_sum += term;
        }

        if (config.record_trace) {
            TraceRow row;
            row.t = t;
            if (config.evaluate_gap_per_round) row.gap = problems::population_gap(instance, x);
            row.g_norm = norm2(state.g);
            row.gamma_norm = norm2(gamma);
            row.sigma = sigma;
            row.delta_norm = delta_norm;
            row.max_disp = state.max_disp;
            row.clip = clipped ? 1 : 0;
            out.trace.push_back(row);
        }
        if (config.keep_vectors) {
            out.w_hist.push_back(w);
            out.x_hist.push_back(x);
            out.delta_hist.push_back(delta);
            out.g_hist.push_back(state.g);
            out.lin_hist.push_back(lin);
            out.sigma_hist.push_back(sigma);
        }

        learner.receive(learner_grad, mode == Variant::Optimistic ? &lin : nullptr, mu_t);

        state.t = t;
        state.x = x;
        state.x_prev = std::move(x);
        state.prev_lin = std::move(lin);
    }

    out.x_final = state.x_prev;
    out.gap = problems::population_gap(instance, out.x_final);
    out.regret_ledger = ledger.incremental();
    out.regret_recomputed = ledger.recompute(instance.optimum);
    out.max_disp = state.max_disp;
    if (has_grad_oracle) {
        out.decomposition_lhs = schedule.prefix(T) * out.gap;
        out.decomposition_rhs = out.regret_linear + decomp_sum;
    }
    return out;
}

}  // namespace dpotb::conversion
