#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpotb/rng.hpp"
#include "dpotb/vec.hpp"

namespace dpotb::problems {

// One example z. Quadratic family uses `a` as the gradient offset (label
// unused); logistic uses (a, y) with y in {-1, +1}.
struct Datum {
    Vec a;
    double y = 0.0;
};

// A stochastic convex problem with exact constants and a known optimum.
// Instances are immutable after construction and safe to share across
// threads; samplers take an explicit Rng.
struct ProblemInstance {
    std::string family;
    int dim = 0;
    Ball domain;                 // L2 ball, diameter D = 2 * radius
    double G = 0.0;              // Lipschitz bound on ||grad||
    double H = 0.0;              // smoothness
    double sigma_G = 0.0;        // gradient-noise second-moment bound
    double sigma_H = 0.0;        // gradient-difference noise bound
    double mu = 0.0;             // strong convexity of the population loss
    Vec optimum;
    double optimum_loss = 0.0;   // L(optimum), cached
    std::uint64_t seed = 0;
    double optimum_offset = 0.0; // distance ||x* - center|| / D

    std::function<Datum(geometry::Rng&)> sampler;
    std::function<Vec(const Vec&, const Datum&)> grad;
    std::function<double(const Vec&)> population_loss;
    std::function<Vec(const Vec&)> population_grad;

    [[nodiscard]] double D() const { return domain.diameter(); }
};

struct Dataset {
    std::vector<Datum> items;

    [[nodiscard]] int T() const { return static_cast<int>(items.size()); }
    [[nodiscard]] const Datum& at_round(int t) const {
        return items.at(static_cast<std::size_t>(t - 1));
    }
};

Dataset make_dataset(const ProblemInstance& instance, int T, geometry::Rng rng);

// Copy with exactly the q-th example (1-based) replaced by a fresh draw.
Dataset neighbor_dataset(const ProblemInstance& instance, const Dataset& base, int q,
                         geometry::Rng rng);

// Quadratic family: loss (H/2) ||x - x* - z||^2 with z = (sigma_G / H) times
// a uniform unit direction, so every constant is exact:
//   G = H*D + sigma_G,  sigma_H = 0,  mu = H,  gap(x) = (H/2) ||x - x*||^2.
// The optimum sits at distance optimum_offset * D from the center (seeded
// random direction).
ProblemInstance make_quadratic(int dim, double D, double H, double sigma_G,
                               std::uint64_t seed, double optimum_offset = 0.3);

// Logistic family over a fixed finite population of `population` examples
// with ||a|| <= radius: G = radius, H = radius^2 / 4, mu = 0. The optimum is
// computed once at construction by a deterministic full-batch solver, so
// population quantities are exact averages.
ProblemInstance make_logistic(int dim, double D, std::uint64_t seed,
                              double radius = 1.0, int population = 2000);

inline Vec project(const Vec& x, const ProblemInstance& instance) {
    return instance.domain.project(x);
}

// L(x) - L(x*), clamped at zero (tolerates at most -1e-10 of numerical
// undershoot near the optimum).
inline double population_gap(const ProblemInstance& instance, const Vec& x) {
    const double gap = instance.population_loss(x) - instance.optimum_loss;
    if (gap < -1e-10) throw std::logic_error("population_gap: optimum is not optimal");
    return gap < 0.0 ? 0.0 : gap;
}

// Replayable descriptor (constants + seed + family tag).
nlohmann::json describe(const ProblemInstance& instance);
ProblemInstance from_descriptor(const nlohmann::json& descriptor);

}  // namespace dpotb::problems
