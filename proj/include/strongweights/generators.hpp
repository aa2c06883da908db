#pragma once

// Instance families: named measures and weights on a given grid, all
// deterministic for a fixed seed.

#include <cmath>
#include <random>

#include "core.hpp"

namespace sw {

/// Deterministic uniform doubles from mt19937_64; the mapping avoids
/// std::uniform_real_distribution so streams are identical across standard
/// library implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double unit() { return (eng_() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * unit(); }
    std::uint64_t bits() { return eng_(); }
    int below(int n) { return static_cast<int>(eng_() % static_cast<std::uint64_t>(n)); }

  private:
    std::mt19937_64 eng_;
};

inline GridMeasure make_lebesgue(const AxisGridPtr& g) {
    std::vector<double> m(g->cell_count());
    for (std::size_t f = 0; f < m.size(); ++f) m[f] = g->cell_volume(f);
    return GridMeasure(g, std::move(m));
}

/// Density exp(-|x|^delta) sampled at cell midpoints (midpoint rule); any
/// positive piecewise-constant density is itself a valid non-atomic measure,
/// so fidelity to the continuous density is a generator concern only.
inline GridMeasure make_gaussian(const AxisGridPtr& g, double delta) {
    if (!(delta > 0.0)) throw input_error("gaussian measure: delta must be positive");
    const int n = g->dim();
    std::vector<double> m(g->cell_count());
    int idx[kMaxDim];
    for (std::size_t f = 0; f < m.size(); ++f) {
        g->unflat(f, idx);
        double r2 = 0.0;
        for (int a = 0; a < n; ++a) {
            const double c = g->cell_mid(a, idx[a]);
            r2 += c * c;
        }
        m[f] = std::exp(-std::pow(std::sqrt(r2), delta)) * g->cell_volume(f);
    }
    return GridMeasure(g, std::move(m));
}

/// Densities drawn log-uniformly from [1/B, B].
inline GridMeasure make_random_density(const AxisGridPtr& g, double B, std::uint64_t seed) {
    if (!(B > 1.0)) throw input_error("random density: B must exceed 1");
    Rng rng(seed);
    std::vector<double> m(g->cell_count());
    for (std::size_t f = 0; f < m.size(); ++f)
        m[f] = std::exp(rng.uniform(-1.0, 1.0) * std::log(B)) * g->cell_volume(f);
    return GridMeasure(g, std::move(m));
}

namespace detail {
template <typename Fn>
GridMeasure tensorize_measure(const AxisGridPtr& g, Fn&& axis_masses) {
    const int n = g->dim();
    std::vector<std::vector<double>> per_axis(n);
    for (int a = 0; a < n; ++a) per_axis[a] = axis_masses(a);
    std::vector<double> m(g->cell_count());
    int idx[kMaxDim];
    for (std::size_t f = 0; f < m.size(); ++f) {
        g->unflat(f, idx);
        double v = 1.0;
        for (int a = 0; a < n; ++a) v *= per_axis[a][idx[a]];
        m[f] = v;
    }
    return GridMeasure(g, std::move(m));
}
}  // namespace detail

/// Tensor product of per-axis 1D masses; the canonical product-measure
/// family (per-axis densities log-uniform in [1/B, B]).
inline GridMeasure make_product_random(const AxisGridPtr& g, double B, std::uint64_t seed) {
    if (!(B > 1.0)) throw input_error("product random measure: B must exceed 1");
    Rng rng(seed);
    return detail::tensorize_measure(g, [&](int a) {
        std::vector<double> v(g->cells_on(a));
        for (int k = 0; k < g->cells_on(a); ++k)
            v[k] = std::exp(rng.uniform(-1.0, 1.0) * std::log(B)) * g->cell_len(a, k);
        return v;
    });
}

/// Product of 1D midpoint-rule Gaussian factors exp(-|x_i|^delta).
inline GridMeasure make_product_gaussian(const AxisGridPtr& g, double delta) {
    if (!(delta > 0.0)) throw input_error("product gaussian: delta must be positive");
    return detail::tensorize_measure(g, [&](int a) {
        std::vector<double> v(g->cells_on(a));
        for (int k = 0; k < g->cells_on(a); ++k)
            v[k] = std::exp(-std::pow(std::abs(g->cell_mid(a, k)), delta)) * g->cell_len(a, k);
        return v;
    });
}

/// Explicit per-axis 1D masses, tensorized.
inline GridMeasure make_product_explicit(const AxisGridPtr& g,
                                         const std::vector<std::vector<double>>& per_axis) {
    if (static_cast<int>(per_axis.size()) != g->dim())
        throw input_error("product explicit measure: axis count mismatch");
    for (int a = 0; a < g->dim(); ++a)
        if (static_cast<int>(per_axis[a].size()) != g->cells_on(a))
            throw input_error("product explicit measure: cell count mismatch on axis " + std::to_string(a));
    return detail::tensorize_measure(g, [&](int a) { return per_axis[a]; });
}

inline Weight make_constant_weight(const AxisGridPtr& g, double c) {
    if (!(c > 0.0)) throw input_error("constant weight: value must be positive");
    return Weight(g, std::vector<double>(g->cell_count(), c));
}

/// w(x) = |x - center|^(-alpha) by the midpoint rule. Any alpha is accepted
/// (cells average the density), but a cell midpoint exactly at the center
/// would give an infinite value and is rejected.
inline Weight make_power_weight(const AxisGridPtr& g, double alpha, const std::vector<double>& center) {
    const int n = g->dim();
    if (static_cast<int>(center.size()) != n) throw input_error("power weight: center dim mismatch");
    std::vector<double> v(g->cell_count());
    int idx[kMaxDim];
    for (std::size_t f = 0; f < v.size(); ++f) {
        g->unflat(f, idx);
        double r2 = 0.0;
        for (int a = 0; a < n; ++a) {
            const double d = g->cell_mid(a, idx[a]) - center[a];
            r2 += d * d;
        }
        if (r2 == 0.0) throw input_error("power weight: a cell midpoint coincides with the center");
        v[f] = std::pow(std::sqrt(r2), -alpha);
    }
    return Weight(g, std::move(v));
}

/// Values log-uniform in [1/B, B].
inline Weight make_random_log_weight(const AxisGridPtr& g, double B, std::uint64_t seed) {
    if (!(B > 1.0)) throw input_error("random log weight: B must exceed 1");
    Rng rng(seed);
    std::vector<double> v(g->cell_count());
    for (double& x : v) x = std::exp(rng.uniform(-1.0, 1.0) * std::log(B));
    return Weight(g, std::move(v));
}

/// w(x) = prod_i w_i(x_i) with per-axis 1D factors log-uniform in [1/B, B].
inline Weight make_product_random_weight(const AxisGridPtr& g, double B, std::uint64_t seed) {
    if (!(B > 1.0)) throw input_error("product random weight: B must exceed 1");
    Rng rng(seed);
    const int n = g->dim();
    std::vector<std::vector<double>> per_axis(n);
    for (int a = 0; a < n; ++a) {
        per_axis[a].resize(g->cells_on(a));
        for (double& x : per_axis[a]) x = std::exp(rng.uniform(-1.0, 1.0) * std::log(B));
    }
    std::vector<double> v(g->cell_count());
    int idx[kMaxDim];
    for (std::size_t f = 0; f < v.size(); ++f) {
        g->unflat(f, idx);
        double x = 1.0;
        for (int a = 0; a < n; ++a) x *= per_axis[a][idx[a]];
        v[f] = x;
    }
    return Weight(g, std::move(v));
}

}  // namespace sw
