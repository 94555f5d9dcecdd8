#pragma once

#include <stdexcept>
#include <string>

#include "dpotb/rng.hpp"
#include "dpotb/vec.hpp"

namespace dpotb::geometry {

// Norm machinery. Only the Euclidean norm ships; lambda is the strong
// convexity constant of the squared norm w.r.t. itself (2 for L2, where
// the dual norm coincides with the norm).
struct NormSpec {
    enum class Kind { EuclideanL2 };

    Kind kind = Kind::EuclideanL2;
    double lambda = 2.0;

    static NormSpec l2() { return NormSpec{Kind::EuclideanL2, 2.0}; }

    [[nodiscard]] double norm(const Vec& x) const { return norm2(x); }
    [[nodiscard]] double dual_norm(const Vec& x) const { return norm2(x); }
};

// Mean-zero noise distribution with a certified second-moment constant V
// and (for the Gaussian) a sub-Gaussian constant. The Gaussian kind drives
// the Renyi-DP mechanism; the exponential kind (density ~ exp(-||x||_2))
// drives the pure-DP extension.
struct NoiseDistribution {
    enum class Kind { GaussianRDP, ExponentialPureDP };

    Kind kind = Kind::GaussianRDP;
    int dim = 1;
    double rdp_variance_V = 1.0;
    double sub_gaussian_sigma = 1.0;

    static NoiseDistribution gaussian(int dim) {
        require_dim(dim);
        return {Kind::GaussianRDP, dim, static_cast<double>(dim), 1.0};
    }

    // V = E||R||^2 = d(d+1): the radius is Gamma(d,1), so E[r^2] = d(d+1).
    // Not sub-Gaussian; sub_gaussian_sigma = 0 marks it unusable for the
    // parameter-free variant.
    static NoiseDistribution exponential_pure(int dim) {
        require_dim(dim);
        const double d = static_cast<double>(dim);
        return {Kind::ExponentialPureDP, dim, d * (d + 1.0), 0.0};
    }

private:
    static void require_dim(int dim) {
        if (dim < 1) throw std::invalid_argument("NoiseDistribution: dim must be >= 1");
    }
};

// One unscaled draw from the distribution. Gaussian: standard multivariate
// normal. Exponential: radius ~ Gamma(d, 1) times a uniform unit direction,
// which realizes the density A*exp(-||x||_2).
inline Vec sample_noise(const NoiseDistribution& dist, Rng& rng) {
    const auto d = static_cast<std::size_t>(dist.dim);
    switch (dist.kind) {
        case NoiseDistribution::Kind::GaussianRDP:
            return rng.normal_vec(d);
        case NoiseDistribution::Kind::ExponentialPureDP: {
            const double r = rng.gamma(static_cast<double>(dist.dim));
            Vec v = rng.unit_vec(d);
            scale(v, r);
            return v;
        }
    }
    throw std::logic_error("sample_noise: unknown kind");
}

// D_alpha(N(mu, s^2 I) || N(mu', s^2 I)) = alpha * ||mu - mu'||^2 / (2 s^2).
inline double gaussian_renyi_divergence(const Vec& mu, const Vec& mu_prime,
                                        double sigma, double alpha) {
    if (sigma <= 0.0) throw std::invalid_argument("gaussian_renyi_divergence: sigma must be > 0");
    if (alpha <= 1.0) throw std::invalid_argument("gaussian_renyi_divergence: alpha must be > 1");
    const double gap = dist2(mu, mu_prime);
    return alpha * gap * gap / (2.0 * sigma * sigma);
}

// Pure-DP epsilon of the exponential distribution at scale sigma: the
// density ratio between means mu and mu' is at most exp(||mu - mu'|| / sigma).
inline double pure_dp_density_ratio_bound(const Vec& mu, const Vec& mu_prime,
                                          double sigma) {
    if (sigma <= 0.0) throw std::invalid_argument("pure_dp_density_ratio_bound: sigma must be > 0");
    return dist2(mu, mu_prime) / sigma;
}

}  // namespace dpotb::geometry
