#include <doctest.h>

#include <cmath>

#include "dpotb/conversion.hpp"
#include "dpotb/learners.hpp"

using namespace dpotb;
using namespace dpotb::conversion;

namespace {

problems::ProblemInstance linear_instance(int dim, double G) {
    // ell(x, z) = <z, x> with ||z|| <= G: gradients constant in x, so H = 0.
    problems::ProblemInstance p;
    p.family = "linear-test";
    p.dim = dim;
    p.domain = Ball{zeros(static_cast<std::size_t>(dim)), 1.0};
    p.G = G;
    p.H = 0.0;
    p.sigma_G = 2.0 * G;
    p.optimum = zeros(static_cast<std::size_t>(dim));
    p.sampler = [dim, G](geometry::Rng& rng) {
        problems::Datum z;
        z.a = rng.unit_vec(static_cast<std::size_t>(dim));
        scale(z.a, G * rng.uniform());
        return z;
    };
    p.grad = [](const Vec&, const problems::Datum& z) { return z.a; };
    p.population_loss = [](const Vec&) { return 0.0; };
    return p;
}

RunConfig plain_config(int k, double rho = accounting::kRhoInfinity) {
    RunConfig rc;
    rc.k = k;
    rc.rho = rho;
    return rc;
}

}  // namespace

TEST_CASE("weight schedule satisfies the beta_t = t^k inequalities") {
    for (int k = 1; k <= 3; ++k) {
        const WeightSchedule sched(k, 512);
        for (int t = 1; t <= 512; ++t) {
            const double td = static_cast<double>(t);
            CHECK(sched.prefix(t) >= ipow(td, k + 1) / (k + 1));
            if (t > 1)
                CHECK(sched.beta(t) - sched.beta(t - 1) <= k * ipow(td, k - 1) * (1 + 1e-12));
            CHECK(sched.beta(t) * sched.beta(t) / sched.prefix(t) <=
                  (k + 1) * ipow(td, k - 1) * (1 + 1e-12));
        }
    }
}

TEST_CASE("step_average") {
    SUBCASE("first round returns w_1 regardless of x_0") {
        const Vec x0{5.0, -3.0};
        const Vec w{0.25, 0.5};
        CHECK(step_average(x0, w, 0.0, 1.0) == w);
    }
    SUBCASE("unit weights give the arithmetic mean") {
        Vec x{1.0};
        const Vec w2{3.0}, w3{5.0};
        x = step_average(x, w2, 1.0, 1.0);
        CHECK(x[0] == doctest::Approx(2.0));
        x = step_average(x, w3, 2.0, 1.0);
        CHECK(x[0] == doctest::Approx(3.0));  // mean of 1, 3, 5
    }
    SUBCASE("k=1 stability: ||x_t - x_{t-1}|| <= 2 D / (t+1) when ||w - x|| <= D") {
        const double D = 2.0;
        geometry::Rng rng(17);
        const WeightSchedule sched(1, 64);
        Vec x = zeros(2);
        for (int t = 1; t <= 64; ++t) {
            Vec w = rng.unit_vec(2);  // within D of x for this domain size
            const Vec nx = step_average(x, w, sched.prefix(t - 1), sched.beta(t));
            CHECK(dist2(nx, x) <= 2.0 * D / (t + 1) + 1e-12);
            x = nx;
        }
    }
}

TEST_CASE("gradient_difference") {
    geometry::Rng rng(18);
    SUBCASE("t=1 uses beta_0 = 0: a single gradient evaluation") {
        auto inst = problems::make_quadratic(2, 2.0, 1.0, 0.5, 19);
        const auto z = inst.sampler(rng);
        const Vec x1{0.1, 0.2};
        const Vec delta = gradient_difference(inst, x1, zeros(2), z, 1.0, 0.0);
        Vec expected = inst.grad(x1, z);
        CHECK(delta == expected);
    }
    SUBCASE("H=0 family: delta_t = (beta_t - beta_{t-1}) grad, norm <= k t^{k-1} G") {
        auto inst = linear_instance(3, 1.5);
        const auto z = inst.sampler(rng);
        for (int k = 1; k <= 3; ++k) {
            const WeightSchedule sched(k, 32);
            for (int t = 2; t <= 32; ++t) {
                const Vec delta = gradient_difference(inst, zeros(3), zeros(3), z,
                                                      sched.beta(t), sched.beta(t - 1));
                Vec expected = inst.grad(zeros(3), z);
                scale(expected, sched.beta(t) - sched.beta(t - 1));
                CHECK(dist2(delta, expected) <= 1e-12 * std::max(1.0, norm2(expected)));
                CHECK(norm2(delta) <=
                      k * ipow(static_cast<double>(t), k - 1) * inst.G * (1 + 1e-12));
            }
        }
    }
    SUBCASE("norm bound formula: k=1, G=1, H=1, disp 0.5 -> 3") {
        CHECK(accounting::delta_norm_bound(7, 1, 1.0, 1.0, 0.5) == doctest::Approx(3.0));
    }
}

TEST_CASE("loss gradients") {
    const Vec g{1.0, 2.0};
    const Vec gamma{0.5, -0.5};
    SUBCASE("plain: gamma = 0 reduces to g") {
        CHECK(loss_gradient_plain(g, zeros(2)) == g);
        const Vec lin = loss_gradient_plain(g, gamma);
        CHECK(lin[0] == doctest::Approx(1.5));
        CHECK(lin[1] == doctest::Approx(1.5));
    }
    SUBCASE("strongly convex: regularizer vanishes at w = x_t") {
        const Vec w{0.3, 0.4};
        CHECK(loss_gradient_sc(g, gamma, w, w, 4.0, 2.0) == loss_gradient_plain(g, gamma));
    }
    SUBCASE("strongly convex 1-D: beta=1, mu=2, w - x = 0.5 -> extra 0.5") {
        const Vec out = loss_gradient_sc({0.0}, {0.0}, {0.5}, {0.0}, 1.0, 2.0);
        CHECK(out[0] == doctest::Approx(0.5));
        CHECK_THROWS_AS(loss_gradient_sc(g, gamma, {0.0, 0.0}, {0.0, 0.0}, 1.0, 0.0),
                        std::invalid_argument);
    }
    SUBCASE("strongly convex subgradient norm <= beta mu D / 2 over the ball") {
        const double beta = 8.0, mu = 1.5, D = 2.0;
        geometry::Rng rng(21);
        for (int i = 0; i < 200; ++i) {
            Vec w = rng.unit_vec(2);
            Vec x = rng.unit_vec(2);
            const Vec reg = sub(loss_gradient_sc(zeros(2), zeros(2), w, x, beta, mu), zeros(2));
            CHECK(norm2(reg) <= beta * mu * D / 2.0 * (1 + 1e-12));
        }
    }
    SUBCASE("parameter-free: zero subgradient at the kink, reduction at xi = nu = 0") {
        const Vec center = zeros(2);
        CHECK(loss_gradient_pf(g, gamma, center, center, 3.0, 5.0) == loss_gradient_plain(g, gamma));
        CHECK(loss_gradient_pf(g, gamma, {0.7, -0.1}, center, 0.0, 0.0) ==
              loss_gradient_plain(g, gamma));
        const Vec out = loss_gradient_pf(zeros(1), zeros(1), {2.0}, {0.0}, 3.0, 0.25);
        CHECK(out[0] == doctest::Approx(3.0 + 2.0 * 0.25 * 2.0));
    }
}

TEST_CASE("pf_constants") {
    SUBCASE("kappa = 1 + DH/G") {
        const auto pf = pf_constants(1.0, 2.0, 1.0, 4, 8, 0.1, 1.0, 1.0, 2.0);
        CHECK(pf.kappa == doctest::Approx(3.0));
    }
    SUBCASE("H = 0 kills every nu_t") {
        const auto pf = pf_constants(1.0, 0.0, 1.0, 4, 8, 0.1, 1.0, 1.0, 2.0);
        for (int t = 1; t <= 8; ++t) CHECK(pf.nu[static_cast<std::size_t>(t)] == 0.0);
    }
    SUBCASE("hand-checked xi_t at C=1, d=1, G=1, H=0, rho=inf, T=16, delta=0.1") {
        const auto pf =
            pf_constants(1.0, 0.0, 1.0, 1, 16, 0.1, 1.0, 1.0, accounting::kRhoInfinity);
        const double phi = std::sqrt(std::log(20.0 * 16.0 * std::log(2.0 * 16.0) / 0.1));
        CHECK(pf.Phi == doctest::Approx(phi).epsilon(1e-12));
        const double A = 8.0 * std::sqrt(2.0);
        for (int t : {1, 4, 16})
            CHECK(pf.xi[static_cast<std::size_t>(t)] ==
                  doctest::Approx(A * phi * std::pow(t, 2.5)).epsilon(1e-12));
    }
    SUBCASE("cap at t=1 with H=0, rho=inf, C=1 is G + 2 A G Phi") {
        const auto pf =
            pf_constants(1.5, 0.0, 1.0, 1, 16, 0.1, 1.0, 1.0, accounting::kRhoInfinity);
        const double A = 8.0 * std::sqrt(2.0);
        CHECK(pf.cap[1] == doctest::Approx(1.5 + A * 2.0 * 1.5 * pf.Phi).epsilon(1e-12));
    }
    SUBCASE("validation") {
        CHECK_THROWS_AS(pf_constants(0.0, 1.0, 1.0, 4, 8, 0.1, 1.0, 1.0, 1.0),
                        std::invalid_argument);
        CHECK_THROWS_AS(pf_constants(1.0, 1.0, 1.0, 4, 8, 1.5, 1.0, 1.0, 1.0),
                        std::invalid_argument);
    }
}

TEST_CASE("hint provider") {
    ConversionState state;
    state.g = zeros(2);
    SUBCASE("no history -> zero") {
        CHECK(hint_provider(state) == zeros(2));
    }
    SUBCASE("after a round, returns the previous linear gradient") {
        state.t = 3;
        state.prev_lin = Vec{1.0, -2.0};
        CHECK(hint_provider(state) == state.prev_lin);
    }
}

TEST_CASE("hint error identity: ||lin_t - lin_{t-1}||^2 <= 3(||delta||^2 + ||gamma_t||^2 + ||gamma_{t-1}||^2)") {
    auto inst = problems::make_quadratic(3, 2.0, 0.5, 0.25, 23);
    geometry::Rng rng(24);
    const int T = 64;
    const auto data = problems::make_dataset(inst, T, rng.split(1));
    RunConfig rc = plain_config(1, 1.0);
    rc.keep_vectors = true;
    learners::Osd learner(inst.domain);
    const auto out = conversion::run(inst, data, learner, rc,
                                     geometry::NoiseDistribution::gaussian(3), rng.split(2));
    for (int t = 2; t <= T; ++t) {
        const Vec& lin = out.lin_hist[static_cast<std::size_t>(t - 1)];
        const Vec& lin_prev = out.lin_hist[static_cast<std::size_t>(t - 2)];
        const Vec gamma_t = sub(lin, out.g_hist[static_cast<std::size_t>(t - 1)]);
        const Vec gamma_prev = sub(lin_prev, out.g_hist[static_cast<std::size_t>(t - 2)]);
        const double lhs = norm2_sq(sub(lin, lin_prev));
        const double rhs = 3.0 * (norm2_sq(out.delta_hist[static_cast<std::size_t>(t - 1)]) +
                                  norm2_sq(gamma_t) + norm2_sq(gamma_prev));
        CHECK(lhs <= rhs * (1 + 1e-9) + 1e-12);
    }
}

TEST_CASE("run: base cases and invariants") {
    auto inst = problems::make_quadratic(3, 2.0, 1.0, 0.5, 25);
    const auto dist = geometry::NoiseDistribution::gaussian(3);

    SUBCASE("T=1 returns the learner's first prediction") {
        geometry::Rng rng(26);
        const auto data = problems::make_dataset(inst, 1, rng);
        learners::Osd learner(inst.domain);
        const auto out = conversion::run(inst, data, learner, plain_config(1), dist, rng.split(9));
        CHECK(out.x_final == inst.domain.center);
    }

    SUBCASE("non-private mode reproduces bit-identical traces on a fixed seed") {
        for (int k : {1, 2}) {
            geometry::Rng rng(27);
            const auto data = problems::make_dataset(inst, 128, rng.split(1));
            RunConfig rc = plain_config(k);
            rc.record_trace = true;
            learners::Osd l1(inst.domain), l2(inst.domain);
            const auto a = conversion::run(inst, data, l1, rc, dist, rng.split(2));
            const auto b = conversion::run(inst, data, l2, rc, dist, rng.split(2));
            CHECK(a.x_final == b.x_final);
            REQUIRE(a.trace.size() == b.trace.size());
            for (std::size_t i = 0; i < a.trace.size(); ++i) {
                CHECK(a.trace[i].g_norm == b.trace[i].g_norm);
                CHECK(a.trace[i].gamma_norm == b.trace[i].gamma_norm);
                CHECK(a.trace[i].delta_norm == b.trace[i].delta_norm);
            }
            CHECK(a.trace.back().gamma_norm == 0.0);  // noise off
        }
    }

    SUBCASE("averaged iterate equals the weighted mean of predictions") {
        geometry::Rng rng(28);
        const auto data = problems::make_dataset(inst, 100, rng.split(1));
        RunConfig rc = plain_config(2, 1.0);
        rc.keep_vectors = true;
        learners::Osd learner(inst.domain);
        const auto out = conversion::run(inst, data, learner, rc, dist, rng.split(2));
        const WeightSchedule sched(2, 100);
        for (int t : {1, 7, 50, 100}) {
            Vec expected = zeros(3);
            for (int i = 1; i <= t; ++i)
                axpy(sched.beta(i) / sched.prefix(t), out.w_hist[static_cast<std::size_t>(i - 1)],
                     expected);
            CHECK(dist2(expected, out.x_hist[static_cast<std::size_t>(t - 1)]) <=
                  1e-9 * std::max(1.0, norm2(expected)));
            CHECK(inst.domain.contains(out.x_hist[static_cast<std::size_t>(t - 1)]));
        }
        CHECK(out.max_stability_violation <= 1e-9);
        CHECK(out.sensitivity.calibrated());
    }

    SUBCASE("gap decreases monotonically in T on the deterministic control arm") {
        auto det = problems::make_quadratic(3, 2.0, 1.0, 0.0, 29);
        double prev_gap = std::numeric_limits<double>::infinity();
        for (int p = 8; p <= 12; ++p) {
            const int T = 1 << p;
            geometry::Rng rng(30);
            const auto data = problems::make_dataset(det, T, rng.split(1));
            learners::Osd learner(det.domain);
            const auto out = conversion::run(det, data, learner, plain_config(1), dist, rng.split(2));
            CHECK(out.gap < prev_gap);
            prev_gap = out.gap;
        }
    }

    SUBCASE("decomposition inequality holds with and without noise") {
        for (double rho : {accounting::kRhoInfinity, 1.0}) {
            geometry::Rng rng(31);
            const auto data = problems::make_dataset(inst, 256, rng.split(1));
            learners::Osd learner(inst.domain);
            const auto out = conversion::run(inst, data, learner, plain_config(1, rho), dist,
                                             rng.split(2));
            CHECK(out.decomposition_ok());
        }
    }

    SUBCASE("lying about the Lipschitz constant trips the sensitivity assertion") {
        auto liar = inst;
        liar.G = inst.G / 100.0;
        geometry::Rng rng(32);
        const auto data = problems::make_dataset(liar, 64, rng.split(1));
        learners::Osd learner(liar.domain);
        CHECK_THROWS_AS(
            conversion::run(liar, data, learner, plain_config(1), dist, rng.split(2)),
            std::logic_error);
    }

    SUBCASE("configuration errors") {
        geometry::Rng rng(33);
        const auto data = problems::make_dataset(inst, 8, rng.split(1));
        learners::Osd learner(inst.domain);
        RunConfig pf = plain_config(2);
        pf.variant.mode = Variant::ParameterFree;
        CHECK_THROWS_AS(conversion::run(inst, data, learner, pf, dist, rng.split(2)),
                        std::invalid_argument);
        RunConfig sc = plain_config(1);
        sc.variant.mode = Variant::StronglyConvex;
        sc.variant.mu = 0.0;
        CHECK_THROWS_AS(conversion::run(inst, data, learner, sc, dist, rng.split(2)),
                        std::invalid_argument);
        // private parameter-free needs a sub-Gaussian distribution
        RunConfig pf_exp = plain_config(3, 1.0);
        pf_exp.variant.mode = Variant::ParameterFree;
        CHECK_THROWS_AS(conversion::run(inst, data, learner, pf_exp,
                                        geometry::NoiseDistribution::exponential_pure(3),
                                        rng.split(2)),
                        std::invalid_argument);
    }
}

TEST_CASE("aggregated noise magnitude under the calibrated schedule") {
    // E||gamma_t||^2 <= 8 (k+1)^2 V (G + DH)^2 log2^2(2T) t^{2k-2} / (lambda rho^2)
    auto inst = problems::make_quadratic(4, 2.0, 1.0, 0.5, 50);
    const auto dist = geometry::NoiseDistribution::gaussian(4);
    const int T = 64, seeds = 300, k = 1;
    const double rho = 1.0, lambda = 2.0;
    const int checkpoints[] = {16, 63, 64};

    double acc[3] = {0.0, 0.0, 0.0};
    for (int s = 0; s < seeds; ++s) {
        geometry::Rng base(geometry::mix64(51, static_cast<std::uint64_t>(s)));
        const auto data = problems::make_dataset(inst, T, base.split(1));
        RunConfig rc = plain_config(k, rho);
        rc.keep_vectors = true;
        learners::Osd learner(inst.domain);
        const auto out = conversion::run(inst, data, learner, rc, dist, base.split(2));
        for (int c = 0; c < 3; ++c) {
            const int t = checkpoints[c];
            acc[c] += norm2_sq(sub(out.lin_hist[static_cast<std::size_t>(t - 1)],
                                   out.g_hist[static_cast<std::size_t>(t - 1)]));
        }
    }
    const double slack = 1.0 + 4.0 / std::sqrt(static_cast<double>(seeds));
    const double gdh = inst.G + inst.D() * inst.H;
    const double log2_2T = std::log2(2.0 * T);
    for (int c = 0; c < 3; ++c) {
        const double t = checkpoints[c];
        const double bound = 8.0 * (k + 1) * (k + 1) * dist.rdp_variance_V * gdh * gdh *
                             log2_2T * log2_2T * ipow(t, 2 * k - 2) / (lambda * rho * rho);
        CHECK(acc[c] / seeds <= bound * slack);
    }
}

TEST_CASE("learner gradient second moment stays within the stated envelope") {
    // E||g_t + gamma_t||^2 <= 3 t^{2k} (G^2 + (4(k+1)^2/lambda)((sigma_G + D sigma_H)^2/t
    //                         + 2 V (G + DH)^2 log2^2(2T) / (rho^2 t^2)))
    auto inst = problems::make_quadratic(4, 2.0, 1.0, 0.5, 40);
    const auto dist = geometry::NoiseDistribution::gaussian(4);
    const int T = 64, seeds = 200, k = 1;
    const double rho = 1.0, lambda = 2.0;
    const int checkpoints[] = {16, 64};

    double acc[2] = {0.0, 0.0};
    for (int s = 0; s < seeds; ++s) {
        geometry::Rng base(geometry::mix64(41, static_cast<std::uint64_t>(s)));
        const auto data = problems::make_dataset(inst, T, base.split(1));
        RunConfig rc = plain_config(k, rho);
        rc.keep_vectors = true;
        learners::Osd learner(inst.domain);
        const auto out = conversion::run(inst, data, learner, rc, dist, base.split(2));
        for (int c = 0; c < 2; ++c)
            acc[c] += norm2_sq(out.lin_hist[static_cast<std::size_t>(checkpoints[c] - 1)]);
    }
    const double slack = 1.0 + 4.0 / std::sqrt(static_cast<double>(seeds));
    const double log2_2T = std::log2(2.0 * T);
    const double gdh = inst.G + inst.D() * inst.H;
    const double sgh = inst.sigma_G + inst.D() * inst.sigma_H;
    for (int c = 0; c < 2; ++c) {
        const double t = checkpoints[c];
        const double bound =
            3.0 * ipow(t, 2 * k) *
            (inst.G * inst.G +
             4.0 * (k + 1) * (k + 1) / lambda *
                 (sgh * sgh / t + 2.0 * 4.0 * gdh * gdh * log2_2T * log2_2T / (rho * rho * t * t)));
        CHECK(acc[c] / seeds <= bound * slack);
    }
}

TEST_CASE("strongly convex run satisfies the regularized decomposition") {
    auto inst = problems::make_quadratic(3, 2.0, 1.0, 0.5, 34);
    const auto dist = geometry::NoiseDistribution::gaussian(3);
    geometry::Rng rng(35);
    const int T = 256;
    const auto data = problems::make_dataset(inst, T, rng.split(1));

    RunConfig rc = plain_config(1, 2.0);
    rc.variant.mode = Variant::StronglyConvex;
    rc.variant.mu = inst.mu;
    rc.keep_vectors = true;
    learners::ScOsd learner(inst.domain);
    const auto out = conversion::run(inst, data, learner, rc, dist, rng.split(2));

    // beta_{1:T} (L(x_T) - L(x*)) <= Regret-bar + sum 2||beta_t grad L(x_t) - lin_t||^2 / (beta_t mu)
    const WeightSchedule sched(1, T);
    double tail = 0.0;
    for (int t = 1; t <= T; ++t) {
        Vec err = inst.population_grad(out.x_hist[static_cast<std::size_t>(t - 1)]);
        scale(err, sched.beta(t));
        axpy(-1.0, out.lin_hist[static_cast<std::size_t>(t - 1)], err);
        tail += 2.0 * norm2_sq(err) / (sched.beta(t) * inst.mu);
    }
    const double lhs = sched.prefix(T) * out.gap;
    const double rhs = out.regret_ledger + tail;
    CHECK(lhs <= rhs + 1e-6 * std::max({1.0, std::abs(lhs), std::abs(rhs)}));
    CHECK(out.decomposition_ok());
}

TEST_CASE("parameter-free run clips rarely and stays decomposition-consistent") {
    auto inst = problems::make_quadratic(4, 2.0, 1.0, 0.5, 36, 0.2);
    const auto dist = geometry::NoiseDistribution::gaussian(4);
    geometry::Rng rng(37);
    const int T = 256;
    const auto data = problems::make_dataset(inst, T, rng.split(1));

    RunConfig rc = plain_config(3);
    rc.variant.mode = Variant::ParameterFree;
    const auto pf = pf_constants(inst.G, inst.H, inst.D(), inst.dim, T, rc.variant.delta_prob,
                                 rc.variant.C, dist.sub_gaussian_sigma, rc.rho);
    learners::ParameterFreeKt learner(inst.domain, pf.cap.back());
    const auto out = conversion::run(inst, data, learner, rc, dist, rng.split(2));
    CHECK(out.clip_count == 0);
    CHECK(out.decomposition_ok());
    CHECK(out.gap >= 0.0);
}
