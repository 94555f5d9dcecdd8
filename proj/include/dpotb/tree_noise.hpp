#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dpotb/accounting.hpp"
#include "dpotb/geometry.hpp"

namespace dpotb::tree_noise {

// I_t: the nonzero prefix sums of t's binary expansion, most significant
// bit first. Example: 7 = 4 + 2 + 1 gives {4, 6, 7}; 8 gives {8}.
struct IndexSet {
    int t = 0;
    std::vector<int> members;
};

inline IndexSet index_set(int t) {
    if (t < 1) throw std::invalid_argument("index_set: t must be >= 1");
    IndexSet set;
    set.t = t;
    int sum = 0;
    for (int bit = std::bit_width(static_cast<unsigned>(t)) - 1; bit >= 0; --bit) {
        if ((t >> bit) & 1) {
            sum += 1 << bit;
            set.members.push_back(sum);
        }
    }
    return set;
}

// S_i = {i - lowbit(i) + 1, ..., i}: the block of rounds covered by node i.
// For every t the blocks {S_i : i in I_t} partition [1, t].
struct NodeInterval {
    int first = 0;
    int last = 0;
    [[nodiscard]] bool contains(int q) const { return first <= q && q <= last; }
    [[nodiscard]] int size() const { return last - first + 1; }
};

inline NodeInterval node_interval(int i) {
    if (i < 1) throw std::invalid_argument("node_interval: index must be >= 1");
    const int low = i & -i;
    return {i - low + 1, i};
}

// IN(q) for q = 1..T: the nodes whose interval covers round q.
inline std::vector<std::vector<int>> in_sets(int T) {
    std::vector<std::vector<int>> result(static_cast<std::size_t>(T));
    for (int i = 1; i <= T; ++i) {
        const NodeInterval s = node_interval(i);
        for (int q = s.first; q <= s.last; ++q)
            result[static_cast<std::size_t>(q - 1)].push_back(i);
    }
    return result;
}

// Noise scale of Algorithm 1:
//   sigma_t^2 = Delta_t^2 * log2(2T) / rho^2,
//   Delta_t   = 2(k+1) t^{k-1} (G + H * max_disp).
// rho = infinity is the non-private sentinel (sigma = 0).
inline double sigma_schedule_sq(int t, int k, double rho, double G, double H,
                                double max_disp, int T) {
    if (!std::isfinite(rho)) return 0.0;
    if (rho <= 0.0) throw std::invalid_argument("sigma_schedule: rho must be > 0");
    if (T < t) throw std::invalid_argument("sigma_schedule: T must be >= t");
    const double delta = accounting::delta_sensitivity(t, k, G, H, max_disp);
    return delta * delta * std::log2(2.0 * T) / (rho * rho);
}

inline double sigma_schedule(int t, int k, double rho, double G, double H,
                             double max_disp, int T) {
    return std::sqrt(sigma_schedule_sq(t, k, rho, G, H, max_disp, T));
}

// Stored per-node noises R_i = sigma_i * R~_i. Strictly sequential: advance()
// must be called with t = 1, 2, ..., T, generates node t exactly once at the
// scale in force at that step, and returns gamma_t = sum_{i in I_t} R_i.
class NoiseTree {
public:
    NoiseTree(geometry::NoiseDistribution dist, geometry::Rng rng, int horizon)
        : dist_(dist), rng_(rng), horizon_(horizon) {
        if (horizon < 1) throw std::invalid_argument("NoiseTree: horizon must be >= 1");
        nodes_.reserve(static_cast<std::size_t>(horizon));
        sigmas_.reserve(static_cast<std::size_t>(horizon));
    }

    [[nodiscard]] int horizon() const { return horizon_; }
    [[nodiscard]] int rounds_done() const { return static_cast<int>(nodes_.size()); }

    Vec advance(int t, double sigma_t) {
        if (t != rounds_done() + 1 || t > horizon_)
            throw std::logic_error("NoiseTree: rounds must advance in order 1..T");
        Vec node = zeros(static_cast<std::size_t>(dist_.dim));
        if (sigma_t > 0.0) {
            node = geometry::sample_noise(dist_, rng_);
            scale(node, sigma_t);
        }
        nodes_.push_back(std::move(node));
        sigmas_.push_back(sigma_t);

        Vec gamma = zeros(static_cast<std::size_t>(dist_.dim));
        for (int i : index_set(t).members)
            axpy(1.0, nodes_[static_cast<std::size_t>(i - 1)], gamma);
        return gamma;
    }

    [[nodiscard]] const Vec& node(int i) const { return nodes_.at(static_cast<std::size_t>(i - 1)); }
    [[nodiscard]] double node_sigma(int i) const { return sigmas_.at(static_cast<std::size_t>(i - 1)); }

private:
    geometry::NoiseDistribution dist_;
    geometry::Rng rng_;
    int horizon_;
    std::vector<Vec> nodes_;
    std::vector<double> sigmas_;
};

}  // namespace dpotb::tree_noise
