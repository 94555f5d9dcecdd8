#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace dpotb {

using Vec = std::vector<double>;

inline Vec zeros(std::size_t d) { return Vec(d, 0.0); }

inline double dot(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2_sq(const Vec& a) { return dot(a, a); }

inline double norm2(const Vec& a) { return std::sqrt(norm2_sq(a)); }

inline double dist2(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// y += c * x
inline void axpy(double c, const Vec& x, Vec& y) {
    assert(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

inline void scale(Vec& x, double c) {
    for (double& v : x) v *= c;
}

inline Vec sub(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec add(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec scaled(const Vec& a, double c) {
    Vec r(a);
    scale(r, c);
    return r;
}

// base^e by repeated multiplication; exact for small integer exponents.
inline double ipow(double base, int e) {
    assert(e >= 0);
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

// Closed L2 ball; the only constraint set used by the library.
struct Ball {
    Vec center;
    double radius = 0.0;

    [[nodiscard]] std::size_t dim() const { return center.size(); }
    [[nodiscard]] double diameter() const { return 2.0 * radius; }

    [[nodiscard]] bool contains(const Vec& x, double tol = 1e-12) const {
        return dist2(x, center) <= radius * (1.0 + tol) + tol;
    }

    [[nodiscard]] Vec project(Vec x) const {
        const double d = dist2(x, center);
        if (d <= radius) return x;
        const double c = radius / d;
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = center[i] + c * (x[i] - center[i]);
        return x;
    }
};

}  // namespace dpotb
