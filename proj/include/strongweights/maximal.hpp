#pragma once

// Maximal operators over piecewise-constant data: strong (rectangles),
// Hardy-Littlewood (cubes), centered (1D), local geometric-dyadic, and
// mu-dyadic maximal functions, plus operator-norm lower estimates.
//
// Everything rests on one fact: an average of a grid-piecewise-constant
// function over a rectangle is a ratio of multilinear forms in the endpoint
// coordinates, monotone piecewise in each coordinate separately. So the
// supremum over rectangles containing a point (or a whole subcell) is
// attained with every endpoint at a grid breakpoint or at the anchor's own
// coordinates, and enumeration over those candidates is exact.

#include <cmath>

#include "core.hpp"
#include "generators.hpp"

namespace sw {

enum class MaxFamily { Rectangles, Cubes, CenteredIntervals };
enum class MaxMode { Lower, Certified };
enum class MaxOp { HardyLittlewood, Strong };

namespace detail {

struct AxisCandidates {
    std::vector<double> lows;   // candidate lower endpoints (<= anchor lo)
    std::vector<double> highs;  // candidate upper endpoints (>= anchor hi)
};

inline AxisCandidates candidates_around(const std::vector<double>& breaks, double lo_anchor,
                                        double hi_anchor) {
    AxisCandidates c;
    for (double b : breaks)
        if (b <= lo_anchor) c.lows.push_back(b);
    if (c.lows.empty() || c.lows.back() != lo_anchor) c.lows.push_back(lo_anchor);
    c.highs.push_back(hi_anchor);
    for (double b : breaks)
        if (b > hi_anchor) c.highs.push_back(b);
    return c;
}

}  // namespace detail

struct PointwiseMax {
    double value = -1.0;
    Rect argmax;
};

/// Exact sup of averages num/den over all rectangles containing the closed
/// box [anchor.lo, anchor.hi] (a point when the two coincide). Rectangles of
/// zero den-mass are excluded from the sup.
inline PointwiseMax rect_sup_containing(const PrefixField& num, const PrefixField& den,
                                        const Rect& anchor) {
    const AxisGrid& g = num.grid();
    const int n = g.dim();
    detail::AxisCandidates cand[kMaxDim];
    for (int a = 0; a < n; ++a)
        cand[a] = detail::candidates_around(g.breaks(a), anchor.lo[a], anchor.hi[a]);

    PointwiseMax best;
    Rect r;
    r.n = n;
    int li[kMaxDim] = {0, 0, 0, 0}, hi[kMaxDim] = {0, 0, 0, 0};
    auto set_axis = [&](int a) {
        r.lo[a] = cand[a].lows[li[a]];
        r.hi[a] = cand[a].highs[hi[a]];
    };
    for (int a = 0; a < n; ++a) set_axis(a);
    while (true) {
        bool valid = true;
        for (int a = 0; a < n; ++a)
            if (!(r.lo[a] < r.hi[a])) { valid = false; break; }
        if (valid) {
            const double m = den.box(r);
            if (m > 0.0) {
                const double v = num.box(r) / m;
                if (v > best.value ||
                    (v == best.value && best.argmax.n != 0 && lex_less(r, best.argmax))) {
                    best.value = v;
                    best.argmax = r;
                }
            }
        }
        int a = n - 1;
        while (a >= 0) {
            if (++hi[a] < static_cast<int>(cand[a].highs.size())) { set_axis(a); break; }
            hi[a] = 0;
            if (++li[a] < static_cast<int>(cand[a].lows.size())) { set_axis(a); break; }
            li[a] = 0;
            set_axis(a);
            --a;
        }
        if (a < 0) break;
    }
    return best;
}

/// Exact strong maximal value of f (given as the prefix field of f dmu) at x.
inline PointwiseMax strong_maximal_at(const PrefixField& f_mu, const PrefixField& mu,
                                      const double* x) {
    Rect p;
    p.n = f_mu.grid().dim();
    for (int a = 0; a < p.n; ++a) p.lo[a] = p.hi[a] = x[a];
    return rect_sup_containing(f_mu, mu, p);
}

/// Exact centered maximal value at x over intervals [x-h, x+h] (1D only).
/// Between consecutive candidate radii the average is a monotone ratio of
/// affine functions of h, so breakpoint-hitting radii suffice.
inline double centered_maximal_at(const PrefixField& f_mu, const PrefixField& mu, double x) {
    const AxisGrid& g = f_mu.grid();
    if (g.dim() != 1) throw input_error("centered maximal: only defined in one dimension");
    const double hmax = std::max(x - g.lo(0), g.hi(0) - x);
    std::vector<double> hs{hmax};
    for (double b : g.breaks(0)) {
        const double h = std::abs(x - b);
        if (h > 0.0 && h < hmax) hs.push_back(h);
    }
    {
        auto [k, t] = g.locate(0, x);
        const double inside = std::min(x - g.cell_lo(0, k), g.cell_hi(0, k) - x);
        if (inside > 0.0) hs.push_back(inside);  // average equals the cell value here
    }
    double best = -1.0;
    for (double h : hs) {
        Rect r{{std::max(x - h, g.lo(0))}, {std::min(x + h, g.hi(0))}};
        if (!(r.lo[0] < r.hi[0])) continue;
        const double m = mu.box(r);
        if (m > 0.0) best = std::max(best, f_mu.box(r) / m);
    }
    return best;
}

/// Uniform lower bound for the cubic maximal function over a box: the best
/// cube covering it. Candidate sides come from breakpoint geometry; corner
/// placement is refined by coordinate ascent. For a point anchor this is a
/// lower estimate of M f(x); exact in 1D where cubes are intervals.
inline double cubic_covering_sup(const PrefixField& num, const PrefixField& den, const Rect& sub) {
    const AxisGrid& g = num.grid();
    const int n = g.dim();
    double need = 0.0;
    for (int a = 0; a < n; ++a) need = std::max(need, sub.width(a));
    double smax = 0.0;
    for (int a = 0; a < n; ++a) smax = std::max(smax, g.hi(a) - g.lo(a));
    if (need > smax) return -1.0;
    std::vector<double> sides{smax};
    if (need > 0.0) sides.push_back(need);
    for (int a = 0; a < n; ++a)
        for (double b : g.breaks(a)) {
            const double d1 = b - sub.lo[a];
            const double d2 = sub.hi[a] - b;
            if (d1 >= need && d1 > 0.0 && d1 <= smax) sides.push_back(d1);
            if (d2 >= need && d2 > 0.0 && d2 <= smax) sides.push_back(d2);
        }
    for (int a = 0; a < n; ++a) {
        const auto& b = g.breaks(a);
        for (std::size_t i = 0; i < b.size(); ++i)
            for (std::size_t j = i + 1; j < b.size(); ++j) {
                const double d = b[j] - b[i];
                if (d >= need && d <= smax) sides.push_back(d);
            }
    }
    std::sort(sides.begin(), sides.end());
    sides.erase(std::unique(sides.begin(), sides.end()), sides.end());

    double best = -1.0;
    double c[kMaxDim];
    auto eval = [&](double s) {
        Rect r;
        r.n = n;
        for (int a = 0; a < n; ++a) { r.lo[a] = c[a]; r.hi[a] = c[a] + s; }
        const double m = den.box(r);
        return m > 0.0 ? num.box(r) / m : -1.0;
    };
    for (double s : sides) {
        bool ok = true;
        for (int a = 0; a < n; ++a) {
            const double clo = std::max(g.lo(a), sub.hi[a] - s);
            const double chi = std::min(sub.lo[a], g.hi(a) - s);
            if (clo > chi + 1e-15 * (1.0 + std::abs(chi))) { ok = false; break; }
            c[a] = 0.5 * (clo + std::max(clo, chi));
        }
        if (!ok) continue;
        double cur = eval(s);
        for (int round = 0; round < 2; ++round) {
            for (int a = 0; a < n; ++a) {
                const double clo = std::max(g.lo(a), sub.hi[a] - s);
                const double chi = std::max(clo, std::min(sub.lo[a], g.hi(a) - s));
                std::vector<double> cs{clo, chi, c[a]};
                for (double b : g.breaks(a)) {
                    if (b >= clo && b <= chi) cs.push_back(b);
                    if (b - s >= clo && b - s <= chi) cs.push_back(b - s);
                }
                double save = c[a];
                for (double v : cs) {
                    c[a] = v;
                    const double t = eval(s);
                    if (t > cur) { cur = t; save = v; }
                }
                c[a] = save;
            }
        }
        best = std::max(best, cur);
    }
    return best;
}

/// Uniform lower bound for the centered maximal function over a 1D subcell:
/// best centered interval (at the midpoint) covering it.
inline double centered_covering_sup(const PrefixField& num, const PrefixField& den,
                                    const Rect& sub) {
    const AxisGrid& g = num.grid();
    const double x = 0.5 * (sub.lo[0] + sub.hi[0]);
    const double hmin = 0.5 * sub.width(0);
    const double hmax = std::max(x - g.lo(0), g.hi(0) - x);
    if (hmin > hmax) return -1.0;
    std::vector<double> hs{hmax};
    if (hmin > 0.0) hs.push_back(hmin);
    for (double b : g.breaks(0)) {
        const double h = std::abs(x - b);
        if (h >= hmin && h > 0.0 && h <= hmax) hs.push_back(h);
    }
    double best = -1.0;
    for (double h : hs) {
        Rect r{{std::max(x - h, g.lo(0))}, {std::min(x + h, g.hi(0))}};
        if (!(r.lo[0] < r.hi[0])) continue;
        const double m = den.box(r);
        if (m > 0.0) best = std::max(best, num.box(r) / m);
    }
    return best;
}

/// Evaluation lattice: every cell split into 2^depth equal parts per axis.
struct RefinedLattice {
    std::vector<std::vector<double>> rbreaks;  // per axis
    std::array<std::size_t, kMaxDim> strides{};
    int n = 0;

    RefinedLattice(const AxisGrid& g, int depth) : n(g.dim()) {
        if (depth < 0) throw input_error("lattice depth must be >= 0");
        const int parts = 1 << depth;
        rbreaks.resize(n);
        for (int a = 0; a < n; ++a) {
            const auto& b = g.breaks(a);
            auto& r = rbreaks[a];
            r.reserve((b.size() - 1) * parts + 1);
            for (std::size_t k = 0; k + 1 < b.size(); ++k)
                for (int j = 0; j < parts; ++j)
                    r.push_back(b[k] + (b[k + 1] - b[k]) * (double(j) / parts));
            r.push_back(b.back());
        }
        std::size_t s = 1;
        for (int a = n - 1; a >= 0; --a) {
            strides[a] = s;
            s *= static_cast<std::size_t>(cells_on(a));
        }
    }
    int cells_on(int a) const { return static_cast<int>(rbreaks[a].size()) - 1; }
    std::size_t cell_count() const {
        std::size_t c = 1;
        for (int a = 0; a < n; ++a) c *= static_cast<std::size_t>(cells_on(a));
        return c;
    }
    void unflat(std::size_t f, int* idx) const {
        for (int a = 0; a < n; ++a) {
            idx[a] = static_cast<int>(f / strides[a]);
            f %= strides[a];
        }
    }
    Rect cell_rect(std::size_t f) const {
        int idx[kMaxDim];
        unflat(f, idx);
        Rect r;
        r.n = n;
        for (int a = 0; a < n; ++a) {
            r.lo[a] = rbreaks[a][idx[a]];
            r.hi[a] = rbreaks[a][idx[a] + 1];
        }
        return r;
    }
};

/// Lower values per lattice subcell (valid uniformly over the subcell and
/// nondecreasing in depth) and, in certified mode, the exact sup per
/// original cell.
struct MaximalField {
    int depth = 0;
    std::shared_ptr<const RefinedLattice> lattice;
    std::vector<double> lower;  // per refined cell
    std::vector<double> upper;  // per original cell; empty in lower mode
};

namespace detail {

// 1D containing-interval maxima for all subcells in O(N^2): g[j] tracks the
// best average over [r_i, r_j] with i <= c as c sweeps left to right.
inline std::vector<double> containing_lower_1d(const std::vector<double>& rb,
                                               const PrefixField& num, const PrefixField& den) {
    const int N = static_cast<int>(rb.size()) - 1;
    std::vector<double> FN(N + 1, 0.0), FD(N + 1, 0.0);
    for (int i = 1; i <= N; ++i) {
        Rect r{{rb.front()}, {rb[i]}};
        FN[i] = num.box(r);
        FD[i] = den.box(r);
    }
    std::vector<double> g(N + 1, -1.0), out(N, -1.0);
    for (int c = 0; c < N; ++c) {
        double best = -1.0;
        for (int j = c + 1; j <= N; ++j) {
            const double m = FD[j] - FD[c];
            if (m > 0.0) {
                const double v = (FN[j] - FN[c]) / m;
                if (v > g[j]) g[j] = v;
            }
            if (g[j] > best) best = g[j];
        }
        out[c] = best;
    }
    return out;
}

}  // namespace detail

/// Strong (or cubic / centered) maximal field of nonnegative cell data f
/// against mu. Certified mode adds the exact per-cell sup: the max over
/// grid-aligned rectangles whose closure touches the cell, which by the
/// endpoint-candidate argument equals the true sup of the maximal function
/// over the closed cell.
inline MaximalField strong_maximal(std::span<const double> f, const GridMeasure& mu, int depth,
                                   MaxMode mode, MaxFamily family = MaxFamily::Rectangles) {
    const AxisGrid& g = mu.grid();
    const int n = g.dim();
    if (f.size() != g.cell_count()) throw input_error("strong_maximal: grid mismatch");
    for (double v : f)
        if (!(v >= 0.0)) throw input_error("strong_maximal: f must be nonnegative");
    if (family == MaxFamily::CenteredIntervals && n != 1)
        throw input_error("centered maximal requested with n > 1");

    std::vector<double> fv(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) fv[i] = f[i] * mu.cell_mass(i);
    PrefixField num(g, fv);
    const PrefixField& den = mu.field();

    MaximalField out;
    out.depth = depth;
    out.lattice = std::make_shared<RefinedLattice>(g, depth);
    const RefinedLattice& lat = *out.lattice;

    if (family == MaxFamily::Rectangles && n == 1) {
        out.lower = detail::containing_lower_1d(lat.rbreaks[0], num, den);
    } else {
        // fold bounds down the refinement levels: a parent's bound is valid
        // for its children, which makes the field monotone in depth
        std::vector<double> prev;
        std::shared_ptr<RefinedLattice> plat;
        for (int d = 0; d <= depth; ++d) {
            auto l = std::make_shared<RefinedLattice>(g, d);
            std::vector<double> cur(l->cell_count(), -1.0);
            for (std::size_t s = 0; s < l->cell_count(); ++s) {
                const Rect sub = l->cell_rect(s);
                double v;
                if (family == MaxFamily::Rectangles) v = rect_sup_containing(num, den, sub).value;
                else if (family == MaxFamily::Cubes) v = cubic_covering_sup(num, den, sub);
                else v = centered_covering_sup(num, den, sub);
                if (d > 0) {
                    int idx[kMaxDim];
                    l->unflat(s, idx);
                    std::size_t pf = 0;
                    for (int a = 0; a < n; ++a)
                        pf += plat->strides[a] * static_cast<std::size_t>(idx[a] / 2);
                    v = std::max(v, prev[pf]);
                }
                cur[s] = v;
            }
            prev = std::move(cur);
            plat = std::move(l);
        }
        out.lower = std::move(prev);
    }

    if (mode == MaxMode::Certified) {
        out.upper.assign(g.cell_count(), -1.0);
        for_each_grid_rect(g, [&](const GridRect& gr) {
            const Rect r = g.rect_of(gr);
            const double m = den.box(r);
            if (!(m > 0.0)) return;
            const double v = num.box(r) / m;
            int lo[kMaxDim], hi[kMaxDim], idx[kMaxDim];
            for (int a = 0; a < n; ++a) {
                lo[a] = std::max(0, gr.first[a] - 1);
                hi[a] = std::min(g.cells_on(a) - 1, gr.last[a] + 1);
                idx[a] = lo[a];
            }
            while (true) {
                const std::size_t fidx = g.flat(idx);
                if (v > out.upper[fidx]) out.upper[fidx] = v;
                int a = n - 1;
                while (a >= 0) {
                    if (++idx[a] <= hi[a]) break;
                    idx[a] = lo[a];
                    --a;
                }
                if (a < 0) break;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// mu-dyadic grids and dyadic maximal operators
// ---------------------------------------------------------------------------

/// Mass-halving dyadic tree: each node splits into 2^n children of equal
/// mu-mass via sequential conditional median cuts (axis 0 marginal median,
/// then axis 1 medians within each half, and so on). Child index bit a
/// selects the side along axis a.
struct DyadicGrid {
    Rect root;
    int depth = 0;
    int dim = 0;
    std::vector<std::vector<Rect>> levels;  // levels[0] = {root}

    const std::vector<Rect>& leaves() const { return levels.back(); }
};

/// Leftmost t splitting the rectangle into equal mu-masses along the axis;
/// exact because the mass is piecewise linear in the cut coordinate.
inline double median_cut(const GridMeasure& mu, const Rect& r, int axis) {
    const double total = mu.mass(r);
    if (!(total > 0.0)) throw input_error("median_cut: zero-mass rectangle");
    const double target = 0.5 * total;
    const AxisGrid& g = mu.grid();
    const int k0 = g.locate(axis, r.lo[axis]).first;
    const int k1 = g.locate(axis, r.hi[axis]).first;
    double cum = 0.0;
    for (int k = k0; k <= k1; ++k) {
        const double slab_lo = std::max(r.lo[axis], g.cell_lo(axis, k));
        const double slab_hi = std::min(r.hi[axis], g.cell_hi(axis, k));
        if (!(slab_hi > slab_lo)) continue;
        Rect slab = r;
        slab.lo[axis] = slab_lo;
        slab.hi[axis] = slab_hi;
        const double m = mu.mass(slab);
        if (cum + m >= target) {
            if (!(m > 0.0)) return slab_lo;
            const double frac = (target - cum) / m;
            return slab_lo + frac * (slab_hi - slab_lo);
        }
        cum += m;
    }
    return r.hi[axis];
}

inline DyadicGrid build_dyadic(const GridMeasure& mu, const Rect& root, int depth) {
    if (depth < 0) throw input_error("build_dyadic: depth must be >= 0");
    if (!(mu.mass(root) > 0.0)) throw input_error("build_dyadic: root has zero mass");
    DyadicGrid d;
    d.root = root;
    d.depth = depth;
    d.dim = root.n;
    d.levels.push_back({root});
    for (int l = 0; l < depth; ++l) {
        const auto& cur = d.levels.back();
        std::vector<Rect> next;
        next.reserve(cur.size() << d.dim);
        for (const Rect& node : cur) {
            std::vector<Rect> pieces{node};
            for (int a = 0; a < d.dim; ++a) {
                std::vector<Rect> split;
                split.reserve(pieces.size() * 2);
                for (const Rect& p : pieces) {
                    const double t = median_cut(mu, p, a);
                    Rect lo = p, hi = p;
                    lo.hi[a] = t;
                    hi.lo[a] = t;
                    split.push_back(lo);
                    split.push_back(hi);
                }
                pieces = std::move(split);
            }
            // pieces are ordered with axis 0 outermost; remap so child bit a
            // selects the side along axis a
            std::vector<Rect> ordered(pieces.size());
            for (std::size_t i = 0; i < pieces.size(); ++i) {
                std::size_t key = 0;
                for (int a = 0; a < d.dim; ++a) {
                    const std::size_t bit = (i >> (d.dim - 1 - a)) & 1u;
                    key |= bit << a;
                }
                ordered[key] = pieces[i];
            }
            for (auto& p : ordered) next.push_back(p);
        }
        d.levels.push_back(std::move(next));
    }
    return d;
}

/// Per-leaf values of a dyadic maximal operator: max of |f|-averages over
/// the leaf's ancestor chain. Exact at leaf resolution.
struct DyadicField {
    std::shared_ptr<const DyadicGrid> grid;
    std::vector<double> leaf_values;
};

namespace detail {
inline std::vector<double> chain_max_values(std::span<const double> f, const GridMeasure& mu,
                                            const DyadicGrid& grid) {
    std::vector<double> fv(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) fv[i] = std::abs(f[i]) * mu.cell_mass(i);
    PrefixField num(mu.grid(), fv);
    const PrefixField& den = mu.field();
    std::vector<double> cur(1);
    {
        const double m = den.box(grid.root);
        cur[0] = m > 0.0 ? num.box(grid.root) / m : 0.0;
    }
    for (int l = 1; l <= grid.depth; ++l) {
        const auto& nodes = grid.levels[l];
        std::vector<double> next(nodes.size());
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const double m = den.box(nodes[i]);
            const double avg = m > 0.0 ? num.box(nodes[i]) / m : 0.0;
            next[i] = std::max(avg, cur[i >> grid.dim]);
        }
        cur = std::move(next);
    }
    return cur;
}
}  // namespace detail

inline DyadicField dyadic_maximal(std::span<const double> f, const GridMeasure& mu,
                                  const DyadicGrid& grid) {
    if (f.size() != mu.grid().cell_count()) throw input_error("dyadic_maximal: grid mismatch");
    DyadicField out;
    out.grid = std::make_shared<DyadicGrid>(grid);
    out.leaf_values = detail::chain_max_values(f, mu, grid);
    return out;
}

/// Local maximal operator over successive geometric halvings of a root
/// rectangle, truncated at the given depth; exact for the truncated family.
inline DyadicField local_dyadic_maximal(std::span<const double> f, const GridMeasure& mu,
                                        const Rect& root, int depth) {
    if (f.size() != mu.grid().cell_count()) throw input_error("local_dyadic_maximal: grid mismatch");
    auto geo = std::make_shared<DyadicGrid>();
    geo->root = root;
    geo->depth = depth;
    geo->dim = root.n;
    geo->levels.push_back({root});
    for (int l = 0; l < depth; ++l) {
        const auto& cur = geo->levels.back();
        std::vector<Rect> next;
        next.reserve(cur.size() << geo->dim);
        for (const Rect& node : cur) {
            const std::size_t kids = std::size_t(1) << geo->dim;
            for (std::size_t m = 0; m < kids; ++m) {
                Rect c = node;
                for (int a = 0; a < geo->dim; ++a) {
                    const double mid = 0.5 * (node.lo[a] + node.hi[a]);
                    if (m & (std::size_t(1) << a)) c.lo[a] = mid;
                    else c.hi[a] = mid;
                }
                next.push_back(c);
            }
        }
        geo->levels.push_back(std::move(next));
    }
    DyadicField out;
    out.leaf_values = detail::chain_max_values(f, mu, *geo);
    out.grid = std::move(geo);
    return out;
}

/// Max over leaves of (max cell value of w meeting the leaf) / (dyadic
/// maximal of w at the leaf). Valid as a majorization constant for the full
/// dyadic maximal operator on the root, since the truncated operator only
/// underestimates it.
inline double majorization_check(const Weight& w, const GridMeasure& mu, const Rect& root,
                                 int depth) {
    if (depth < 1) throw input_error("majorization_check: depth must be >= 1");
    detail::check_same_grid(w, mu, "majorization_check");
    const DyadicGrid grid = build_dyadic(mu, root, depth);
    const std::vector<double> vals = detail::chain_max_values(w.cell_values(), mu, grid);
    const AxisGrid& g = mu.grid();
    const int n = g.dim();
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.leaves().size(); ++i) {
        const Rect& leaf = grid.leaves()[i];
        double wmax = 0.0;
        int first[kMaxDim], last[kMaxDim], idx[kMaxDim];
        for (int a = 0; a < n; ++a) {
            first[a] = g.locate(a, leaf.lo[a]).first;
            auto [k, t] = g.locate(a, leaf.hi[a]);
            last[a] = (t == 0.0 && k > 0) ? k - 1 : k;
            idx[a] = first[a];
        }
        while (true) {
            double frac = 1.0;
            for (int a = 0; a < n; ++a) frac *= g.covered_fraction(a, idx[a], leaf.lo[a], leaf.hi[a]);
            if (frac > 0.0) wmax = std::max(wmax, w.value(g.flat(idx)));
            int a = n - 1;
            while (a >= 0) {
                if (++idx[a] <= last[a]) break;
                idx[a] = first[a];
                --a;
            }
            if (a < 0) break;
        }
        if (vals[i] > 0.0) worst = std::max(worst, wmax / vals[i]);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Operator norm lower estimates
// ---------------------------------------------------------------------------

struct OpNormParams {
    int depth = 4;
    int n_indicators = 48;
    int n_random = 6;
    int polish_rounds = 1;
    std::uint64_t seed = 1;
};

struct OpNormResult {
    double strong_ratio = 0.0;  // best ||Op f||_q / ||f||_q over the family
    double weak_ratio = 0.0;    // best sup_l l * nu({Op f >= l})^(1/q) / ||f||_q
    std::string witness;
};

namespace detail {

struct LatticeNorms {
    double strong = 0.0;
    double weak = 0.0;
};

// Lattice-restricted lower bounds for both norms of Op f against nu = w dmu.
inline LatticeNorms opnorm_of(MaxOp op, double q, std::span<const double> f,
                              const GridMeasure& mu, const PrefixField& nu_field, int depth) {
    MaximalField field =
        strong_maximal(f, mu, depth, MaxMode::Lower,
                       op == MaxOp::Strong ? MaxFamily::Rectangles : MaxFamily::Cubes);
    const RefinedLattice& lat = *field.lattice;
    const AxisGrid& g = mu.grid();
    double fnorm_q = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        int idx[kMaxDim];
        g.unflat(i, idx);
        Rect cell;
        cell.n = g.dim();
        for (int a = 0; a < g.dim(); ++a) {
            cell.lo[a] = g.cell_lo(a, idx[a]);
            cell.hi[a] = g.cell_hi(a, idx[a]);
        }
        if (f[i] > 0.0) fnorm_q += std::pow(f[i], q) * nu_field.box(cell);
    }
    if (!(fnorm_q > 0.0)) return {};
    LatticeNorms out;
    double opnorm_q = 0.0;
    std::vector<std::pair<double, double>> by_value;  // (lower value, nu mass)
    by_value.reserve(lat.cell_count());
    for (std::size_t s = 0; s < lat.cell_count(); ++s) {
        const double v = field.lower[s];
        if (v <= 0.0) continue;
        const double nm = nu_field.box(lat.cell_rect(s));
        if (nm > 0.0) {
            opnorm_q += std::pow(v, q) * nm;
            by_value.emplace_back(v, nm);
        }
    }
    out.strong = std::pow(opnorm_q / fnorm_q, 1.0 / q);
    std::sort(by_value.begin(), by_value.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    double tail = 0.0;
    const double fnorm = std::pow(fnorm_q, 1.0 / q);
    for (std::size_t i = 0; i < by_value.size(); ++i) {
        tail += by_value[i].second;
        if (i + 1 == by_value.size() || by_value[i + 1].first < by_value[i].first) {
            const double cand = by_value[i].first * std::pow(tail, 1.0 / q) / fnorm;
            out.weak = std::max(out.weak, cand);
        }
    }
    return out;
}

}  // namespace detail

/// Lower estimate of the operator norm of M or M_s on L^q(w dmu): max over a
/// test family (grid-rect indicators, w, sigma, random functions, plus a
/// round of cellwise multiplicative ascent) of lattice-restricted ratios.
inline OpNormResult op_norm_estimate(MaxOp op, double q, const Weight& w, const GridMeasure& mu,
                                     const OpNormParams& params = {}) {
    if (!(q > 1.0)) throw input_error("op_norm_estimate: q must exceed 1");
    detail::check_same_grid(w, mu, "op_norm_estimate");
    const AxisGrid& g = mu.grid();
    std::vector<double> numw(w.cell_values().size());
    for (std::size_t i = 0; i < numw.size(); ++i) numw[i] = w.value(i) * mu.cell_mass(i);
    PrefixField nu(g, numw);

    std::vector<std::pair<std::string, std::vector<double>>> family;
    family.emplace_back("w", w.cell_values());
    family.emplace_back("sigma", dual_weight(w, q).cell_values());
    Rng rng(params.seed);
    {
        std::vector<GridRect> all;
        for_each_grid_rect(g, [&](const GridRect& gr) { all.push_back(gr); });
        std::vector<std::size_t> pick;
        if (static_cast<int>(all.size()) <= params.n_indicators) {
            for (std::size_t i = 0; i < all.size(); ++i) pick.push_back(i);
        } else {
            for (int i = 0; i < params.n_indicators; ++i)
                pick.push_back(static_cast<std::size_t>(rng.below(static_cast<int>(all.size()))));
        }
        for (std::size_t pi : pick) {
            const GridRect& gr = all[pi];
            std::vector<double> ind(g.cell_count(), 0.0);
            int idx[kMaxDim];
            for (std::size_t fi = 0; fi < g.cell_count(); ++fi) {
                g.unflat(fi, idx);
                bool in = true;
                for (int a = 0; a < g.dim(); ++a)
                    if (idx[a] < gr.first[a] || idx[a] > gr.last[a]) { in = false; break; }
                if (in) ind[fi] = 1.0;
            }
            family.emplace_back("indicator", std::move(ind));
        }
        for (int i = 0; i < params.n_random; ++i) {
            std::vector<double> v(g.cell_count());
            for (double& x : v) x = std::exp(rng.uniform(-1.0, 1.0) * std::log(4.0));
            family.emplace_back("random", std::move(v));
        }
    }

    OpNormResult best;
    for (auto& [name, f0] : family) {
        std::vector<double> f = f0;
        auto norms = detail::opnorm_of(op, q, f, mu, nu, params.depth);
        for (int round = 0; round < params.polish_rounds; ++round) {
            for (std::size_t c = 0; c < f.size(); ++c) {
                for (double scale : {0.5, 2.0}) {
                    const double save = f[c];
                    f[c] = save * scale;
                    auto t = detail::opnorm_of(op, q, f, mu, nu, params.depth);
                    if (t.strong > norms.strong) {
                        norms.strong = t.strong;
                        norms.weak = std::max(norms.weak, t.weak);
                    } else {
                        f[c] = save;
                    }
                }
            }
        }
        if (norms.strong > best.strong_ratio) {
            best.strong_ratio = norms.strong;
            best.witness = name;
        }
        best.weak_ratio = std::max(best.weak_ratio, norms.weak);
    }
    return best;
}

}  // namespace sw
