#pragma once

// Constructive decompositions at a level lambda: the exact 1D rising-sun
// selection, an n-dimensional halving-and-adjust realization with the same
// postconditions (pairwise disjoint rectangles with average exactly lambda,
// f <= lambda almost everywhere outside), and maximal dyadic selections.

#include "core.hpp"
#include "maximal.hpp"

namespace sw {

struct RisingSunDecomposition {
    double lambda = 0.0;
    std::vector<Rect> rects;
    std::vector<double> averages;   // achieved average per rectangle
    double selected_mass = 0.0;     // total mu-mass of the selection
    bool has_residual = false;
    double residual_max = 0.0;      // max f over positive-mass cells meeting the residual
};

namespace detail {

struct FPoly {
    std::vector<double> x;  // breakpoints of F within I (ends included)
    std::vector<double> F;  // F(x_k), F piecewise linear between
};

inline FPoly build_excess(std::span<const double> f, const GridMeasure& mu, const Rect& I,
                          double lambda) {
    const AxisGrid& g = mu.grid();
    FPoly P;
    P.x.push_back(I.lo[0]);
    for (double b : g.breaks(0))
        if (b > I.lo[0] && b < I.hi[0]) P.x.push_back(b);
    P.x.push_back(I.hi[0]);
    P.F.resize(P.x.size());
    P.F[0] = 0.0;
    for (std::size_t k = 0; k + 1 < P.x.size(); ++k) {
        Rect seg{{P.x[k]}, {P.x[k + 1]}};
        const double m = mu.mass(seg);
        const int cell = g.locate(0, 0.5 * (P.x[k] + P.x[k + 1])).first;
        P.F[k + 1] = P.F[k] + (f[cell] - lambda) * m;
    }
    return P;
}

}  // namespace detail

/// Exact 1D rising-sun decomposition. F(x) = integral of (f - lambda) dmu is
/// piecewise linear; the selected intervals are the closures of the maximal
/// components of {x : sup_{y>x} F(y) > F(x)}, with the left-boundary
/// component extended to the first return of F to zero so its average is
/// exactly lambda. Endpoints are linear roots within cells, hence exact.
inline RisingSunDecomposition rising_sun_1d(std::span<const double> f, const GridMeasure& mu,
                                            const Rect& I, double lambda) {
    const AxisGrid& g = mu.grid();
    if (g.dim() != 1) throw input_error("rising_sun_1d: one-dimensional grids only");
    if (f.size() != g.cell_count()) throw input_error("rising_sun_1d: grid mismatch");
    const double mass = mu.mass(I);
    if (!(mass > 0.0)) throw degenerate_error("rising_sun_1d: zero-mass interval");
    std::vector<double> fm(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) fm[i] = f[i] * mu.cell_mass(i);
    PrefixField num(g, fm);
    const double avg = num.box(I) / mass;
    if (avg > lambda)
        throw input_error("rising_sun_1d: average exceeds lambda");

    const detail::FPoly P = detail::build_excess(f, mu, I, lambda);
    const std::size_t M = P.x.size() - 1;  // segment count

    // future running max at breakpoints: RM[k] = max F over [x_k, I.hi]
    std::vector<double> RM(P.x.size());
    RM[M] = P.F[M];
    for (std::size_t k = M; k-- > 0;) RM[k] = std::max(P.F[k], RM[k + 1]);

    // shadow sub-intervals per segment, scanned left to right and merged
    std::vector<std::pair<double, double>> parts;
    auto push_part = [&](double a, double b) {
        if (!(b > a)) return;
        if (!parts.empty() && a <= parts.back().second) parts.back().second = std::max(parts.back().second, b);
        else parts.emplace_back(a, b);
    };
    for (std::size_t k = 0; k < M; ++k) {
        const double fk = P.F[k], fk1 = P.F[k + 1];
        const double rm_next = RM[k + 1];
        const double slope = fk1 - fk;  // sign only
        if (slope > 0.0) {
            push_part(P.x[k], P.x[k + 1]);  // F(x) < F(x_{k+1}) <= RM
        } else {
            if (fk < rm_next) {
                push_part(P.x[k], P.x[k + 1]);
            } else if (fk1 < rm_next) {
                // crossing F(x*) = rm_next inside the segment
                const double t = (rm_next - fk) / (fk1 - fk);
                push_part(P.x[k] + t * (P.x[k + 1] - P.x[k]), P.x[k + 1]);
            }
        }
    }

    RisingSunDecomposition out;
    out.lambda = lambda;

    // left-boundary component: extend to the first zero of F after its end
    if (!parts.empty() && parts.front().first <= I.lo[0]) {
        auto& first = parts.front();
        // F at the component's right end
        double beta = first.second;
        // locate F(beta)
        double fbeta = 0.0;
        for (std::size_t k = 0; k < M; ++k) {
            if (beta >= P.x[k] && beta <= P.x[k + 1]) {
                const double t = P.x[k + 1] > P.x[k] ? (beta - P.x[k]) / (P.x[k + 1] - P.x[k]) : 0.0;
                fbeta = P.F[k] + t * (P.F[k + 1] - P.F[k]);
                break;
            }
        }
        if (fbeta > 1e-14 * (std::abs(P.F[0]) + std::abs(fbeta) + 1.0)) {
            // find smallest x >= beta with F(x) = 0
            double x0 = I.hi[0];
            for (std::size_t k = 0; k < M; ++k) {
                if (P.x[k + 1] < beta) continue;
                const double a = std::max(P.x[k], beta);
                double fa;
                {
                    const double t = P.x[k + 1] > P.x[k] ? (a - P.x[k]) / (P.x[k + 1] - P.x[k]) : 0.0;
                    fa = P.F[k] + t * (P.F[k + 1] - P.F[k]);
                }
                const double fb = P.F[k + 1];
                if (fa <= 0.0) { x0 = a; break; }
                if (fb <= 0.0) {
                    const double t = fa / (fa - fb);
                    x0 = a + t * (P.x[k + 1] - a);
                    break;
                }
            }
            first.second = std::max(first.second, x0);
            // swallow components inside [I.lo, x0]
            std::vector<std::pair<double, double>> merged{first};
            for (std::size_t j = 1; j < parts.size(); ++j) {
                if (parts[j].first < first.second) {
                    merged.front().second = std::max(merged.front().second, parts[j].second);
                } else {
                    merged.push_back(parts[j]);
                }
            }
            parts = std::move(merged);
        }
    }

    for (auto& [a, b] : parts) {
        Rect r{{a}, {b}};
        const double m = mu.mass(r);
        if (!(m > 0.0)) continue;  // massless selection carries no content
        out.rects.push_back(r);
        out.averages.push_back(num.box(r) / m);
        out.selected_mass += m;
    }

    // residual certificate: the largest f over positive-mass cells meeting
    // the complement with positive length
    {
        std::vector<std::pair<double, double>> gaps;
        double cur = I.lo[0];
        for (const Rect& r : out.rects) {
            if (r.lo[0] > cur) gaps.emplace_back(cur, r.lo[0]);
            cur = std::max(cur, r.hi[0]);
        }
        if (I.hi[0] > cur) gaps.emplace_back(cur, I.hi[0]);
        for (auto& [a, b] : gaps) {
            const int k0 = g.locate(0, a).first;
            const int k1 = g.locate(0, b).second == 0.0 && g.locate(0, b).first > 0
                               ? g.locate(0, b).first - 1
                               : g.locate(0, b).first;
            for (int k = k0; k <= k1; ++k) {
                const double ov = std::min(b, g.cell_hi(0, k)) - std::max(a, g.cell_lo(0, k));
                if (ov > 0.0 && mu.cell_mass(k) > 0.0) {
                    out.residual_max = out.has_residual ? std::max(out.residual_max, f[k]) : f[k];
                    out.has_residual = true;
                }
            }
        }
    }
    return out;
}

/// n-dimensional decomposition by halving and adjusting: split at the
/// mu-median along the cycling axis; a child whose average exceeds lambda is
/// grown back toward its parent until its average is exactly lambda (linear
/// root within a cell segment), emitted, and the remainder slab recursed.
/// At most one child can exceed lambda since the children have equal mass.
inline RisingSunDecomposition rising_sun_nd(std::span<const double> f, const GridMeasure& mu,
                                            const Rect& R, double lambda, int max_depth = 200) {
    const AxisGrid& g = mu.grid();
    const int n = g.dim();
    if (f.size() != g.cell_count()) throw input_error("rising_sun_nd: grid mismatch");
    for (double v : f)
        if (!(v >= 0.0)) throw input_error("rising_sun_nd: f must be nonnegative");
    const double mass = mu.mass(R);
    if (!(mass > 0.0)) throw degenerate_error("rising_sun_nd: zero-mass rectangle");
    std::vector<double> fm(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) fm[i] = f[i] * mu.cell_mass(i);
    PrefixField num(g, fm);
    const PrefixField& den = mu.field();
    if (num.box(R) / mass > lambda)
        throw input_error("rising_sun_nd: average exceeds lambda");

    RisingSunDecomposition out;
    out.lambda = lambda;
    std::vector<Rect> residual_rects;

    // true iff some positive-mass cell fragment inside S has f > lambda
    auto has_high_cell = [&](const Rect& S) {
        int first[kMaxDim], last[kMaxDim], idx[kMaxDim];
        for (int a = 0; a < n; ++a) {
            first[a] = g.locate(a, S.lo[a]).first;
            auto [k, t] = g.locate(a, S.hi[a]);
            last[a] = (t == 0.0 && k > 0) ? k - 1 : k;
            if (last[a] < first[a]) return false;
            idx[a] = first[a];
        }
        while (true) {
            const std::size_t fi = g.flat(idx);
            if (f[fi] > lambda && mu.cell_mass(fi) > 0.0) {
                double frac = 1.0;
                for (int a = 0; a < n; ++a) frac *= g.covered_fraction(a, idx[a], S.lo[a], S.hi[a]);
                if (frac > 0.0) return true;
            }
            int a = n - 1;
            while (a >= 0) {
                if (++idx[a] <= last[a]) break;
                idx[a] = first[a];
                --a;
            }
            if (a < 0) break;
        }
        return false;
    };

    // grow child [t, hi] (or [lo, t]) along axis until its average is lambda
    auto adjust_and_emit = [&](const Rect& S, int axis, double median, bool upper_child) {
        // scan cell segments from the median toward the far face; within each
        // the average is a ratio of affine functions of the cut, so the first
        // sign change yields an exact linear root
        const double far = upper_child ? S.lo[axis] : S.hi[axis];
        auto value_at = [&](double t) {
            Rect C = S;
            if (upper_child) C.lo[axis] = t;
            else C.hi[axis] = t;
            const double m = den.box(C);
            return std::pair<double, double>(num.box(C) - lambda * m, m);
        };
        // segment boundaries between median and far
        std::vector<double> pts{median};
        for (double b : g.breaks(axis)) {
            if (upper_child ? (b < median && b > far) : (b > median && b < far)) pts.push_back(b);
        }
        pts.push_back(far);
        std::sort(pts.begin(), pts.end());
        if (upper_child) std::reverse(pts.begin(), pts.end());  // walk outward
        double root = far;
        bool found = false;
        double ga = value_at(pts[0]).first;  // > 0 at the median (avg > lambda)
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            const double gb = value_at(pts[i + 1]).first;
            if (gb <= 0.0) {
                // root in this segment: g is affine here
                if (gb == ga) { root = pts[i + 1]; found = true; break; }
                const double t = ga / (ga - gb);
                root = pts[i] + t * (pts[i + 1] - pts[i]);
                found = true;
                break;
            }
            ga = gb;
        }
        if (!found) root = far;  // avg(S) == lambda exactly: select all of S
        Rect C = S;
        if (upper_child) C.lo[axis] = root;
        else C.hi[axis] = root;
        const double m = den.box(C);
        if (m > 0.0) {
            out.rects.push_back(C);
            out.averages.push_back(num.box(C) / m);
            out.selected_mass += m;
        }
        Rect rem = S;
        if (upper_child) rem.hi[axis] = root;
        else rem.lo[axis] = root;
        return rem;
    };

    struct Frame {
        Rect S;
        int axis;
        int depth;
    };
    std::vector<Frame> stack{{R, 0, 0}};
    while (!stack.empty()) {
        Frame fr = stack.back();
        stack.pop_back();
        const double m = den.box(fr.S);
        if (!(m > 0.0)) continue;
        if (fr.depth > max_depth)
            throw budget_error("rising_sun_nd: recursion budget exhausted");
        if (!has_high_cell(fr.S)) {
            residual_rects.push_back(fr.S);
            continue;
        }
        const int axis = fr.axis % n;
        const double t = median_cut(mu, fr.S, axis);
        Rect lo = fr.S, hi = fr.S;
        lo.hi[axis] = t;
        hi.lo[axis] = t;
        const double mlo = den.box(lo), mhi = den.box(hi);
        const double avlo = mlo > 0.0 ? num.box(lo) / mlo : 0.0;
        const double avhi = mhi > 0.0 ? num.box(hi) / mhi : 0.0;
        if (avlo > lambda) {
            Rect rem = adjust_and_emit(fr.S, axis, t, false);
            stack.push_back({rem, axis + 1, fr.depth + 1});
        } else if (avhi > lambda) {
            Rect rem = adjust_and_emit(fr.S, axis, t, true);
            stack.push_back({rem, axis + 1, fr.depth + 1});
        } else {
            stack.push_back({lo, axis + 1, fr.depth + 1});
            stack.push_back({hi, axis + 1, fr.depth + 1});
        }
    }

    // residual certificate over the stopped rectangles
    for (const Rect& S : residual_rects) {
        int first[kMaxDim], last[kMaxDim], idx[kMaxDim];
        bool any = true;
        for (int a = 0; a < n; ++a) {
            first[a] = g.locate(a, S.lo[a]).first;
            auto [k, t] = g.locate(a, S.hi[a]);
            last[a] = (t == 0.0 && k > 0) ? k - 1 : k;
            if (last[a] < first[a]) any = false;
            idx[a] = first[a];
        }
        if (!any) continue;
        while (true) {
            const std::size_t fi = g.flat(idx);
            double frac = 1.0;
            for (int a = 0; a < n; ++a) frac *= g.covered_fraction(a, idx[a], S.lo[a], S.hi[a]);
            if (frac > 0.0 && mu.cell_mass(fi) > 0.0) {
                out.residual_max = out.has_residual ? std::max(out.residual_max, f[fi]) : f[fi];
                out.has_residual = true;
            }
            int a = n - 1;
            while (a >= 0) {
                if (++idx[a] <= last[a]) break;
                idx[a] = first[a];
                --a;
            }
            if (a < 0) break;
        }
    }
    return out;
}

/// Maximal nonoverlapping dyadic nodes with average > lambda (top-down).
/// Parents of selected nodes have average <= lambda, except when the root
/// itself qualifies, in which case the selection is {root}.
struct DyadicSelection {
    std::vector<Rect> nodes;
    std::vector<std::pair<int, std::size_t>> ids;  // (level, index)
};

inline DyadicSelection dyadic_level_selection(std::span<const double> w, const GridMeasure& mu,
                                              const DyadicGrid& grid, double lambda) {
    if (!(lambda > 0.0)) throw input_error("dyadic_level_selection: lambda must be positive");
    if (w.size() != mu.grid().cell_count()) throw input_error("dyadic_level_selection: grid mismatch");
    std::vector<double> fm(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) fm[i] = std::abs(w[i]) * mu.cell_mass(i);
    PrefixField num(mu.grid(), fm);
    const PrefixField& den = mu.field();
    DyadicSelection sel;
    auto avg_of = [&](const Rect& r) {
        const double m = den.box(r);
        return m > 0.0 ? num.box(r) / m : 0.0;
    };
    if (avg_of(grid.root) > lambda) {
        sel.nodes.push_back(grid.root);
        sel.ids.emplace_back(0, 0);
        return sel;
    }
    // BFS keeping only subtrees whose parent average is <= lambda
    std::vector<std::size_t> frontier{0};
    for (int l = 1; l <= grid.depth && !frontier.empty(); ++l) {
        std::vector<std::size_t> next;
        for (std::size_t pi : frontier) {
            for (std::size_t c = pi << grid.dim; c < ((pi + 1) << grid.dim); ++c) {
                const Rect& node = grid.levels[l][c];
                if (avg_of(node) > lambda) {
                    sel.nodes.push_back(node);
                    sel.ids.emplace_back(l, c);
                } else if (l < grid.depth) {
                    next.push_back(c);
                }
            }
        }
        frontier = std::move(next);
    }
    return sel;
}

}  // namespace sw
