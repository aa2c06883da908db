#pragma once

// Core types for measures and weights that are piecewise constant on a
// tensor grid: axis grids, rectangles, prefix-sum fields with fractional
// box queries, and the basic mass/integral/average operations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sw {

inline constexpr int kMaxDim = 4;
inline constexpr std::size_t kDefaultMaxCells = 1u << 20;
inline constexpr double kRelSlack = 1e-12;

struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Zero-mass rectangle handed to an average-type operation.
struct degenerate_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Search or recursion budget exhausted where an exact answer was required.
struct budget_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// No admissible input exists (e.g. no rectangle with a concentric double).
struct undefined_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Axis-aligned box with real endpoints. Width zero is allowed per axis;
/// operations that need positive mass reject degenerate inputs themselves.
struct Rect {
    int n = 0;
    std::array<double, kMaxDim> lo{};
    std::array<double, kMaxDim> hi{};

    Rect() = default;
    Rect(std::initializer_list<double> los, std::initializer_list<double> his) {
        n = static_cast<int>(los.size());
        if (his.size() != los.size() || n > kMaxDim) throw input_error("Rect: bad endpoint lists");
        std::copy(los.begin(), los.end(), lo.begin());
        std::copy(his.begin(), his.end(), hi.begin());
        for (int i = 0; i < n; ++i)
            if (!(lo[i] <= hi[i])) throw input_error("Rect: lo > hi on axis " + std::to_string(i));
    }
    static Rect make(int n, const double* los, const double* his) {
        Rect r;
        r.n = n;
        for (int i = 0; i < n; ++i) { r.lo[i] = los[i]; r.hi[i] = his[i]; }
        return r;
    }
    double width(int axis) const { return hi[axis] - lo[axis]; }
    bool contains(const Rect& other, double tol = 0.0) const {
        for (int i = 0; i < n; ++i)
            if (other.lo[i] < lo[i] - tol || other.hi[i] > hi[i] + tol) return false;
        return true;
    }
    bool operator==(const Rect& o) const {
        if (n != o.n) return false;
        for (int i = 0; i < n; ++i)
            if (lo[i] != o.lo[i] || hi[i] != o.hi[i]) return false;
        return true;
    }
};

/// Lexicographic order on (lo..., hi...); used for deterministic witness
/// tie-breaking.
inline bool lex_less(const Rect& a, const Rect& b) {
    for (int i = 0; i < a.n; ++i) {
        if (a.lo[i] != b.lo[i]) return a.lo[i] < b.lo[i];
    }
    for (int i = 0; i < a.n; ++i) {
        if (a.hi[i] != b.hi[i]) return a.hi[i] < b.hi[i];
    }
    return false;
}

/// Inclusive per-axis cell index ranges; the grid-aligned rectangles.
struct GridRect {
    int n = 0;
    std::array<int, kMaxDim> first{};
    std::array<int, kMaxDim> last{};
};

/// Tensor grid given by strictly increasing breakpoints per axis.
class AxisGrid {
  public:
    explicit AxisGrid(std::vector<std::vector<double>> breaks,
                      std::size_t max_cells = kDefaultMaxCells)
        : breaks_(std::move(breaks)) {
        const int n = static_cast<int>(breaks_.size());
        if (n < 1 || n > kMaxDim) throw input_error("AxisGrid: dimension must be in [1, 4]");
        std::size_t cells = 1;
        for (int a = 0; a < n; ++a) {
            const auto& b = breaks_[a];
            if (b.size() < 2) throw input_error("AxisGrid: axis needs at least one cell");
            for (std::size_t i = 0; i + 1 < b.size(); ++i)
                if (!(b[i] < b[i + 1]))
                    throw input_error("AxisGrid: breakpoints not strictly increasing on axis " +
                                      std::to_string(a) + " at index " + std::to_string(i + 1));
            cells *= b.size() - 1;
            if (cells > max_cells) throw input_error("AxisGrid: cell count exceeds limit");
        }
        strides_.assign(n, 1);
        for (int a = n - 2; a >= 0; --a)
            strides_[a] = strides_[a + 1] * static_cast<std::size_t>(cells_on(a + 1));
    }

    static AxisGrid uniform(const Rect& box, const std::vector<int>& cells,
                            std::size_t max_cells = kDefaultMaxCells) {
        if (static_cast<int>(cells.size()) != box.n) throw input_error("uniform grid: dim mismatch");
        std::vector<std::vector<double>> br(box.n);
        for (int a = 0; a < box.n; ++a) {
            if (cells[a] < 1) throw input_error("uniform grid: need at least one cell per axis");
            br[a].resize(cells[a] + 1);
            for (int i = 0; i <= cells[a]; ++i)
                br[a][i] = box.lo[a] + (box.hi[a] - box.lo[a]) * (double(i) / cells[a]);
            br[a][0] = box.lo[a];
            br[a][cells[a]] = box.hi[a];
        }
        return AxisGrid(std::move(br), max_cells);
    }

    int dim() const { return static_cast<int>(breaks_.size()); }
    int cells_on(int axis) const { return static_cast<int>(breaks_[axis].size()) - 1; }
    std::size_t cell_count() const {
        std::size_t c = 1;
        for (int a = 0; a < dim(); ++a) c *= cells_on(a);
        return c;
    }
    const std::vector<double>& breaks(int axis) const { return breaks_[axis]; }
    double lo(int axis) const { return breaks_[axis].front(); }
    double hi(int axis) const { return breaks_[axis].back(); }
    Rect domain() const {
        Rect r;
        r.n = dim();
        for (int a = 0; a < r.n; ++a) { r.lo[a] = lo(a); r.hi[a] = hi(a); }
        return r;
    }
    double cell_lo(int axis, int k) const { return breaks_[axis][k]; }
    double cell_hi(int axis, int k) const { return breaks_[axis][k + 1]; }
    double cell_len(int axis, int k) const { return breaks_[axis][k + 1] - breaks_[axis][k]; }
    double cell_mid(int axis, int k) const { return 0.5 * (breaks_[axis][k] + breaks_[axis][k + 1]); }

    std::size_t flat(const int* idx) const {
        std::size_t f = 0;
        for (int a = 0; a < dim(); ++a) f += strides_[a] * static_cast<std::size_t>(idx[a]);
        return f;
    }
    void unflat(std::size_t f, int* idx) const {
        for (int a = 0; a < dim(); ++a) {
            idx[a] = static_cast<int>(f / strides_[a]);
            f %= strides_[a];
        }
    }

    double cell_volume(std::size_t f) const {
        int idx[kMaxDim];
        unflat(f, idx);
        double v = 1.0;
        for (int a = 0; a < dim(); ++a) v *= cell_len(a, idx[a]);
        return v;
    }

    // Cell index and covered fraction at coordinate x, clamped to the domain.
    // Breakpoint hits canonicalize to (cell, 0) except at the upper domain end.
    std::pair<int, double> locate(int axis, double x) const {
        const auto& b = breaks_[axis];
        const int K = cells_on(axis);
        if (x <= b.front()) return {0, 0.0};
        if (x >= b.back()) return {K - 1, 1.0};
        int k = static_cast<int>(std::upper_bound(b.begin(), b.end(), x) - b.begin()) - 1;
        if (k >= K) k = K - 1;
        return {k, (x - b[k]) / (b[k + 1] - b[k])};
    }

    /// Fraction of cell k (on one axis) covered by [x0, x1].
    double covered_fraction(int axis, int k, double x0, double x1) const {
        const double a = std::max(x0, cell_lo(axis, k));
        const double b = std::min(x1, cell_hi(axis, k));
        return b > a ? (b - a) / cell_len(axis, k) : 0.0;
    }

    GridRect full_grid_rect() const {
        GridRect g;
        g.n = dim();
        for (int a = 0; a < g.n; ++a) { g.first[a] = 0; g.last[a] = cells_on(a) - 1; }
        return g;
    }
    Rect rect_of(const GridRect& g) const {
        Rect r;
        r.n = dim();
        for (int a = 0; a < r.n; ++a) {
            r.lo[a] = cell_lo(a, g.first[a]);
            r.hi[a] = cell_hi(a, g.last[a]);
        }
        return r;
    }

    bool operator==(const AxisGrid& o) const { return breaks_ == o.breaks_; }

  private:
    std::vector<std::vector<double>> breaks_;
    std::vector<std::size_t> strides_;
};

using AxisGridPtr = std::shared_ptr<const AxisGrid>;

/// Cumulative table over cell values supporting exact fractional box sums.
/// The value of a box is sum over cells of value * covered fraction along
/// every axis; evaluated as a multilinear interpolation of the cumulative
/// table at the 2^n corners.
class PrefixField {
  public:
    PrefixField() = default;
    PrefixField(const AxisGrid& g, std::span<const double> cell_values) : g_(&g) {
        const int n = g.dim();
        std::size_t total = 1;
        for (int a = 0; a < n; ++a) {
            dims_[a] = g.cells_on(a) + 1;
            total *= dims_[a];
        }
        cstr_[n - 1] = 1;
        for (int a = n - 2; a >= 0; --a) cstr_[a] = cstr_[a + 1] * dims_[a + 1];
        cum_.assign(total, 0.0);
        // cum_[i] = sum of cell values with index < i componentwise
        int idx[kMaxDim];
        for (std::size_t f = 0; f < g.cell_count(); ++f) {
            g.unflat(f, idx);
            std::size_t pos = 0;
            for (int a = 0; a < n; ++a) pos += cstr_[a] * static_cast<std::size_t>(idx[a] + 1);
            cum_[pos] = cell_values[f];
        }
        for (int a = 0; a < n; ++a) {
            // prefix along axis a
            const std::size_t stride = cstr_[a];
            const std::size_t len = dims_[a];
            for (std::size_t base = 0; base < total; ++base) {
                const std::size_t coord = (base / stride) % len;
                if (coord == 0) {
                    std::size_t p = base;
                    for (std::size_t i = 1; i < len; ++i) cum_[p + i * stride] += cum_[p + (i - 1) * stride];
                }
            }
        }
    }

    const AxisGrid& grid() const { return *g_; }

    /// Mass of [domain.lo, x] — multilinear interpolation of the table.
    double cdf(const double* x) const {
        const int n = g_->dim();
        int k[kMaxDim];
        double t[kMaxDim];
        for (int a = 0; a < n; ++a) {
            auto [c, f] = g_->locate(a, x[a]);
            k[a] = c;
            t[a] = f;
        }
        double acc = 0.0;
        const int corners = 1 << n;
        for (int m = 0; m < corners; ++m) {
            double wgt = 1.0;
            std::size_t pos = 0;
            for (int a = 0; a < n; ++a) {
                if (m & (1 << a)) {
                    wgt *= t[a];
                    pos += cstr_[a] * static_cast<std::size_t>(k[a] + 1);
                } else {
                    wgt *= 1.0 - t[a];
                    pos += cstr_[a] * static_cast<std::size_t>(k[a]);
                }
            }
            if (wgt != 0.0) acc += wgt * cum_[pos];
        }
        return acc;
    }

    /// Exact fractional box sum by corner inclusion-exclusion.
    double box(const Rect& r) const {
        const int n = g_->dim();
        double acc = 0.0;
        double pt[kMaxDim];
        const int corners = 1 << n;
        for (int m = 0; m < corners; ++m) {
            int sign = 1;
            for (int a = 0; a < n; ++a) {
                if (m & (1 << a)) {
                    pt[a] = r.hi[a];
                } else {
                    pt[a] = r.lo[a];
                    sign = -sign;
                }
            }
            acc += sign * cdf(pt);
        }
        return acc;
    }

    double total() const { return cum_.back(); }

  private:
    const AxisGrid* g_ = nullptr;
    std::array<std::size_t, kMaxDim> dims_{};
    std::array<std::size_t, kMaxDim> cstr_{};
    std::vector<double> cum_;
};

namespace detail {
inline void check_inside(const AxisGrid& g, const Rect& r, const char* what) {
    if (r.n != g.dim()) throw input_error(std::string(what) + ": dimension mismatch");
    for (int a = 0; a < r.n; ++a) {
        if (r.lo[a] < g.lo(a) || r.hi[a] > g.hi(a) || r.lo[a] > r.hi[a])
            throw input_error(std::string(what) + ": rectangle outside domain");
    }
}
}  // namespace detail

/// Non-atomic measure: one nonnegative mass per cell, spread with uniform
/// density inside the cell. Hyperplanes and points carry zero mass.
class GridMeasure {
  public:
    GridMeasure(AxisGridPtr g, std::vector<double> cell_mass)
        : g_(std::move(g)), mass_(std::move(cell_mass)) {
        if (!g_) throw input_error("GridMeasure: null grid");
        if (mass_.size() != g_->cell_count()) throw input_error("GridMeasure: mass count mismatch");
        double tot = 0.0;
        for (double m : mass_) {
            if (!(m >= 0.0) || !std::isfinite(m)) throw input_error("GridMeasure: mass must be >= 0");
            tot += m;
        }
        if (!(tot > 0.0)) throw input_error("GridMeasure: total mass must be positive");
        pf_ = PrefixField(*g_, mass_);
        total_ = tot;
    }

    const AxisGrid& grid() const { return *g_; }
    const AxisGridPtr& grid_ptr() const { return g_; }
    const std::vector<double>& cell_masses() const { return mass_; }
    double cell_mass(std::size_t f) const { return mass_[f]; }
    double total() const { return total_; }
    const PrefixField& field() const { return pf_; }

    double mass(const Rect& r) const {
        detail::check_inside(*g_, r, "mass");
        return pf_.box(r);
    }

  private:
    AxisGridPtr g_;
    std::vector<double> mass_;
    PrefixField pf_;
    double total_ = 0.0;
};

/// Strictly positive piecewise-constant function on the same grid.
class Weight {
  public:
    Weight(AxisGridPtr g, std::vector<double> cell_values)
        : g_(std::move(g)), val_(std::move(cell_values)) {
        if (!g_) throw input_error("Weight: null grid");
        if (val_.size() != g_->cell_count()) throw input_error("Weight: value count mismatch");
        for (double v : val_) {
            if (!(v > 0.0) || !std::isfinite(v)) throw input_error("Weight: values must be positive and finite");
        }
        auto [mn, mx] = std::minmax_element(val_.begin(), val_.end());
        min_ = *mn;
        max_ = *mx;
    }

    const AxisGrid& grid() const { return *g_; }
    const AxisGridPtr& grid_ptr() const { return g_; }
    const std::vector<double>& cell_values() const { return val_; }
    double value(std::size_t f) const { return val_[f]; }
    double min_value() const { return min_; }
    double max_value() const { return max_; }

  private:
    AxisGridPtr g_;
    std::vector<double> val_;
    double min_ = 0.0;
    double max_ = 0.0;
};

namespace detail {
inline void check_same_grid(const Weight& w, const GridMeasure& mu, const char* what) {
    if (w.grid_ptr() != mu.grid_ptr() && !(w.grid() == mu.grid()))
        throw input_error(std::string(what) + ": weight and measure grids differ");
}
}  // namespace detail

/// Prefix field of per-cell f(w_c) * mass_c; the workhorse for integrals of
/// transformed weights against the measure.
template <typename F>
PrefixField transformed_field(const Weight& w, const GridMeasure& mu, F&& f) {
    detail::check_same_grid(w, mu, "transformed_field");
    std::vector<double> v(mu.cell_masses().size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(w.value(i)) * mu.cell_mass(i);
    return PrefixField(mu.grid(), v);
}

inline PrefixField weighted_field(const Weight& w, const GridMeasure& mu) {
    return transformed_field(w, mu, [](double x) { return x; });
}

inline double integral(const Weight& w, const GridMeasure& mu, const Rect& r) {
    detail::check_same_grid(w, mu, "integral");
    detail::check_inside(mu.grid(), r, "integral");
    return weighted_field(w, mu).box(r);
}

inline double average(const Weight& w, const GridMeasure& mu, const Rect& r) {
    const double m = mu.mass(r);
    if (!(m > 0.0)) throw degenerate_error("average: rectangle has zero mass");
    return integral(w, mu, r) / m;
}

enum class LevelMassKind { Mu, Weighted };

/// mu- or w-mass of {x in R : w(x) > lambda} (or >= when strict is false).
/// w is constant per cell, so membership is per cell; partially covered
/// cells contribute their covered fraction.
inline double level_mass(const Weight& w, const GridMeasure& mu, const Rect& r, double lambda,
                         bool strict = true, LevelMassKind kind = LevelMassKind::Mu) {
    detail::check_same_grid(w, mu, "level_mass");
    detail::check_inside(mu.grid(), r, "level_mass");
    const AxisGrid& g = mu.grid();
    const int n = g.dim();
    int first[kMaxDim], last[kMaxDim], idx[kMaxDim];
    for (int a = 0; a < n; ++a) {
        first[a] = g.locate(a, r.lo[a]).first;
        auto [k, t] = g.locate(a, r.hi[a]);
        last[a] = (t == 0.0 && k > 0) ? k - 1 : k;
        if (last[a] < first[a]) return 0.0;
        idx[a] = first[a];
    }
    double acc = 0.0;
    while (true) {
        const std::size_t f = g.flat(idx);
        const double v = w.value(f);
        if (strict ? (v > lambda) : (v >= lambda)) {
            double frac = 1.0;
            for (int a = 0; a < n; ++a) frac *= g.covered_fraction(a, idx[a], r.lo[a], r.hi[a]);
            if (frac > 0.0) acc += frac * mu.cell_mass(f) * (kind == LevelMassKind::Weighted ? v : 1.0);
        }
        int a = n - 1;
        while (a >= 0) {
            if (++idx[a] <= last[a]) break;
            idx[a] = first[a];
            --a;
        }
        if (a < 0) break;
    }
    return acc;
}

/// Dual weight sigma = w^(1 - p') with p' = p/(p-1); dual of the dual with
/// exponent p' recovers w.
inline Weight dual_weight(const Weight& w, double p) {
    if (!(p > 1.0)) throw input_error("dual_weight: p must exceed 1");
    const double e = 1.0 - p / (p - 1.0);  // = -1/(p-1)
    std::vector<double> v(w.cell_values());
    for (double& x : v) x = std::pow(x, e);
    return Weight(w.grid_ptr(), std::move(v));
}

/// Iterate all grid-aligned rectangles (inclusive index ranges).
template <typename Fn>
void for_each_grid_rect(const AxisGrid& g, Fn&& fn) {
    const int n = g.dim();
    GridRect gr;
    gr.n = n;
    std::array<int, kMaxDim> K{};
    for (int a = 0; a < n; ++a) K[a] = g.cells_on(a);
    // enumerate per-axis (first, last) pairs in lexicographic order
    std::array<int, kMaxDim> fi{}, la{};
    int a = 0;
    fi[0] = 0;
    la[0] = 0;
    for (int i = 1; i < n; ++i) { fi[i] = 0; la[i] = 0; }
    while (true) {
        for (int i = 0; i < n; ++i) { gr.first[i] = fi[i]; gr.last[i] = la[i]; }
        fn(gr);
        // advance: (fi, la) per axis, la fastest
        a = n - 1;
        while (a >= 0) {
            if (++la[a] < K[a]) break;
            if (++fi[a] < K[a]) {
                la[a] = fi[a];
                break;
            }
            fi[a] = 0;
            la[a] = 0;
            --a;
        }
        if (a < 0) break;
    }
}

}  // namespace sw
