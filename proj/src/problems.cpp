#include "dpotb/problems.hpp"

#include <cmath>

namespace dpotb::problems {

Dataset make_dataset(const ProblemInstance& instance, int T, geometry::Rng rng) {
    Dataset data;
    data.items.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) data.items.push_back(instance.sampler(rng));
    return data;
}

Dataset neighbor_dataset(const ProblemInstance& instance, const Dataset& base, int q,
                         geometry::Rng rng) {
    if (q < 1 || q > base.T()) throw std::invalid_argument("neighbor_dataset: q out of range");
    Dataset copy = base;
    copy.items[static_cast<std::size_t>(q - 1)] = instance.sampler(rng);
    return copy;
}

ProblemInstance make_quadratic(int dim, double D, double H, double sigma_G,
                               std::uint64_t seed, double optimum_offset) {
    if (dim < 1) throw std::invalid_argument("make_quadratic: dim must be >= 1");
    if (D <= 0.0 || H <= 0.0) throw std::invalid_argument("make_quadratic: D and H must be > 0");
    if (sigma_G < 0.0) throw std::invalid_argument("make_quadratic: sigma_G must be >= 0");
    if (optimum_offset < 0.0 || optimum_offset >= 0.5)
        throw std::invalid_argument("make_quadratic: optimum_offset must be in [0, 0.5)");

    ProblemInstance p;
    p.family = "quadratic";
    p.dim = dim;
    p.domain = Ball{zeros(static_cast<std::size_t>(dim)), D / 2.0};
    p.H = H;
    p.sigma_G = sigma_G;
    p.sigma_H = 0.0;  // gradient differences are deterministic in z
    p.mu = H;
    p.seed = seed;
    p.optimum_offset = optimum_offset;

    geometry::Rng init = geometry::Rng(seed).split(0x716f);
    Vec opt = init.unit_vec(static_cast<std::size_t>(dim));
    scale(opt, optimum_offset * D);
    p.optimum = opt;

    // ||z|| = sigma_G / H exactly, so E||z||^2 = (sigma_G/H)^2 and the
    // effective gradient-noise bound equals sigma_G; G covers the extra
    // H*||z|| reach of the stochastic gradient.
    const double z_radius = sigma_G > 0.0 ? sigma_G / H : 0.0;
    p.G = H * D + sigma_G;

    p.sampler = [dim, z_radius](geometry::Rng& rng) {
        Datum z;
        if (z_radius > 0.0) {
            z.a = rng.unit_vec(static_cast<std::size_t>(dim));
            scale(z.a, z_radius);
        } else {
            z.a = zeros(static_cast<std::size_t>(dim));
        }
        return z;
    };
    p.grad = [opt, H](const Vec& x, const Datum& z) {
        Vec g(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) g[i] = H * (x[i] - opt[i] - z.a[i]);
        return g;
    };
    p.population_loss = [opt, H, z_radius](const Vec& x) {
        const double r = dist2(x, opt);
        return 0.5 * H * (r * r + z_radius * z_radius);
    };
    p.population_grad = [opt, H](const Vec& x) {
        Vec g(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) g[i] = H * (x[i] - opt[i]);
        return g;
    };
    p.optimum_loss = p.population_loss(p.optimum);
    return p;
}

namespace {

struct LogisticPopulation {
    std::vector<Datum> items;

    [[nodiscard]] double loss(const Vec& x) const {
        double total = 0.0;
        for (const auto& z : items) {
            const double margin = -z.y * dot(z.a, x);
            // log(1 + exp(m)) computed stably
            total += margin > 0.0 ? margin + std::log1p(std::exp(-margin))
                                  : std::log1p(std::exp(margin));
        }
        return total / static_cast<double>(items.size());
    }

    [[nodiscard]] Vec grad(const Vec& x) const {
        Vec g = zeros(x.size());
        for (const auto& z : items) {
            const double margin = -z.y * dot(z.a, x);
            const double s = 1.0 / (1.0 + std::exp(-margin));  // sigmoid(margin)
            axpy(-z.y * s / static_cast<double>(items.size()), z.a, g);
        }
        return g;
    }
};

Vec per_example_logistic_grad(const Vec& x, const Datum& z) {
    const double margin = -z.y * dot(z.a, x);
    const double s = 1.0 / (1.0 + std::exp(-margin));
    Vec g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = -z.y * s * z.a[i];
    return g;
}

// Deterministic projected full-batch descent with Nesterov momentum; used
// once at construction to pin the optimum.
Vec solve_logistic_optimum(const LogisticPopulation& pop, const Ball& domain, double H) {
    Vec x = domain.center;
    Vec y = x;
    double t_momentum = 1.0;
    const double step = 1.0 / H;
    for (int iter = 0; iter < 200000; ++iter) {
        Vec g = pop.grad(y);
        Vec x_next = y;
        axpy(-step, g, x_next);
        x_next = domain.project(std::move(x_next));

        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
        Vec y_next = x_next;
        const double c = (t_momentum - 1.0) / t_next;
        for (std::size_t i = 0; i < y_next.size(); ++i) y_next[i] += c * (x_next[i] - x[i]);
        y_next = domain.project(std::move(y_next));

        const double progress = dist2(x_next, x);
        x = std::move(x_next);
        y = std::move(y_next);
        t_momentum = t_next;
        if (progress < 1e-14 && iter > 100) break;
    }
    return x;
}

}  // namespace

ProblemInstance make_logistic(int dim, double D, std::uint64_t seed, double radius,
                              int population) {
    if (dim < 1) throw std::invalid_argument("make_logistic: dim must be >= 1");
    if (D <= 0.0 || radius <= 0.0)
        throw std::invalid_argument("make_logistic: D and radius must be > 0");
    if (population < 10) throw std::invalid_argument("make_logistic: population too small");

    ProblemInstance p;
    p.family = "logistic";
    p.dim = dim;
    p.domain = Ball{zeros(static_cast<std::size_t>(dim)), D / 2.0};
    p.G = radius;
    p.H = radius * radius / 4.0;
    p.sigma_G = 2.0 * radius;      // generic Lipschitz bound, Assumption 5
    p.sigma_H = 2.0 * p.H;         // generic smoothness bound, Assumption 6
    p.mu = 0.0;
    p.seed = seed;

    geometry::Rng gen = geometry::Rng(seed).split(0x106e);
    Vec truth = gen.unit_vec(static_cast<std::size_t>(dim));
    scale(truth, D);  // planted parameter, may sit outside W

    auto pop = std::make_shared<LogisticPopulation>();
    pop->items.reserve(static_cast<std::size_t>(population));
    for (int i = 0; i < population; ++i) {
        Datum z;
        z.a = gen.unit_vec(static_cast<std::size_t>(dim));
        scale(z.a, radius * gen.uniform());
        const double prob = 1.0 / (1.0 + std::exp(-dot(z.a, truth)));
        z.y = gen.uniform() < prob ? 1.0 : -1.0;
        pop->items.push_back(std::move(z));
    }

    p.optimum = solve_logistic_optimum(*pop, p.domain, p.H);
    p.sampler = [pop, population](geometry::Rng& rng) {
        const auto idx = static_cast<std::size_t>(rng.next_u64() % static_cast<std::uint64_t>(population));
        return pop->items[idx];
    };
    p.grad = [](const Vec& x, const Datum& z) { return per_example_logistic_grad(x, z); };
    p.population_loss = [pop](const Vec& x) { return pop->loss(x); };
    p.population_grad = [pop](const Vec& x) { return pop->grad(x); };
    p.optimum_loss = pop->loss(p.optimum);
    return p;
}

nlohmann::json describe(const ProblemInstance& instance) {
    nlohmann::json j;
    j["family"] = instance.family;
    j["dim"] = instance.dim;
    j["D"] = instance.D();
    j["seed"] = instance.seed;
    if (instance.family == "quadratic") {
        j["H"] = instance.H;
        j["sigma_G"] = instance.sigma_G;
        j["optimum_offset"] = instance.optimum_offset;
    } else if (instance.family == "logistic") {
        j["radius"] = instance.G;
    }
    return j;
}

ProblemInstance from_descriptor(const nlohmann::json& descriptor) {
    const std::string family = descriptor.at("family").get<std::string>();
    const int dim = descriptor.at("dim").get<int>();
    const double D = descriptor.at("D").get<double>();
    const auto seed = descriptor.at("seed").get<std::uint64_t>();
    if (family == "quadratic") {
        return make_quadratic(dim, D, descriptor.at("H").get<double>(),
                              descriptor.at("sigma_G").get<double>(), seed,
                              descriptor.value("optimum_offset", 0.3));
    }
    if (family == "logistic") {
        return make_logistic(dim, D, seed, descriptor.value("radius", 1.0));
    }
    throw std::invalid_argument("from_descriptor: unknown family '" + family + "'");
}

}  // namespace dpotb::problems
