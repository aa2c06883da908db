#pragma once

// Certified weight constants: A_p* (strong Muckenhoupt), A_1*, the
// exponential and Fujii-Wilson A_infinity* constants, and the doubling
// constant of the measure. Each is a supremum over a continuum of
// rectangles; grid-aligned enumeration alone underestimates it, so the
// computations return certified [lower, upper] intervals.
//
// The search space is split by cell-span assignment (which cell each
// rectangle face lies in). Within a span the integrals X, Y, m of w, sigma,
// 1 over the rectangle are multilinear and coordinate-monotone in the 2n
// endpoint coordinates, which yields corner bounds like
// X_max * Y_max^(p-1) / m_min^p on every parameter box. Two reductions keep
// the bounds finite: an axis whose both faces share a cell contributes the
// same scalar factor to X, Y, m and cancels from the objective, so it is
// pinned to the full cell; an axis spanning two adjacent cells makes the
// objective invariant under joint scaling of the two boundary fractions, so
// one of them is pinned to 1. After that the minimal rectangle of every box
// has positive width and, for positive densities, positive mass.

#include <limits>
#include <queue>

#include "core.hpp"
#include "maximal.hpp"

namespace sw {

/// Certified lower/upper bracket of a supremum-type constant plus the best
/// witness rectangle found.
struct ConstantInterval {
    double lower = 1.0;
    double upper = 1.0;
    Rect witness;
    bool attained = true;         // false when only a limit of rectangles achieves it
    bool witness_is_limit = false;
    bool converged = true;        // gap closed within tolerance
    std::uint64_t boxes_explored = 0;
    std::uint64_t iterations = 0;  // objective evaluations
};

struct BBOptions {
    double tol = 1e-6;
    std::uint64_t max_boxes = 500000;
};

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

class RectObjective {
  public:
    virtual ~RectObjective() = default;
    /// Exact objective at r; -inf when undefined (zero mass).
    virtual double value(const Rect& r) const = 0;
    /// Certified upper bound over all rectangles R with small <= R <= big
    /// (componentwise nesting).
    virtual double bound(const Rect& small, const Rect& big) const = 0;
};

// (X/m) (Y/m)^(p-1)
class ApStarObjective final : public RectObjective {
  public:
    ApStarObjective(PrefixField x, PrefixField y, const PrefixField& m, double p)
        : x_(std::move(x)), y_(std::move(y)), m_(m), pm1_(p - 1.0) {}
    double value(const Rect& r) const override {
        const double m = m_.box(r);
        if (!(m > 0.0)) return -kInf;
        return (x_.box(r) / m) * std::pow(y_.box(r) / m, pm1_);
    }
    double bound(const Rect& small, const Rect& big) const override {
        const double mmin = m_.box(small);
        if (!(mmin > 0.0)) return kInf;
        return (x_.box(big) / mmin) * std::pow(y_.box(big) / mmin, pm1_);
    }

  private:
    PrefixField x_, y_;
    const PrefixField& m_;
    double pm1_;
};

// (X/m) exp(Z/m), Z = integral of log(1/w); Z has signed coefficients and is
// split into monotone positive/negative parts for the corner bound.
class AInfExpObjective final : public RectObjective {
  public:
    AInfExpObjective(PrefixField x, PrefixField zpos, PrefixField zneg, const PrefixField& m)
        : x_(std::move(x)), zp_(std::move(zpos)), zn_(std::move(zneg)), m_(m) {}
    double value(const Rect& r) const override {
        const double m = m_.box(r);
        if (!(m > 0.0)) return -kInf;
        const double z = zp_.box(r) - zn_.box(r);
        return (x_.box(r) / m) * std::exp(z / m);
    }
    double bound(const Rect& small, const Rect& big) const override {
        const double mmin = m_.box(small);
        if (!(mmin > 0.0)) return kInf;
        const double mmax = m_.box(big);
        const double zmax = zp_.box(big) - zn_.box(small);
        const double zb = zmax >= 0.0 ? zmax / mmin : zmax / mmax;
        return (x_.box(big) / mmin) * std::exp(zb);
    }

  private:
    PrefixField x_, zp_, zn_;
    const PrefixField& m_;
};

struct BBVar {
    int axis;
    bool is_upper;  // variable is the b (upper) endpoint of the axis
    double lo, hi;  // interval within one cell
};

struct BBProblem {
    Rect base;  // pinned coordinates (both small and big start from this)
    std::vector<BBVar> vars;
};

struct BBox {
    double bound;
    int problem;
    std::array<double, 2 * kMaxDim> vlo{}, vhi{};
    bool operator<(const BBox& o) const { return bound < o.bound; }
};

class BBState {
  public:
    BBState(const RectObjective& obj, const BBOptions& opt) : obj_(obj), opt_(opt) {}

    void offer(const Rect& r) {
        ++evals_;
        const double v = obj_.value(r);
        if (v == -kInf) return;
        const double tol_eq = 1e-12 * std::max(1.0, std::abs(best_));
        if (v > best_ + tol_eq) {
            best_ = v;
            witness_ = r;
        } else if (v >= best_ - tol_eq && witness_.n != 0 && lex_less(r, witness_)) {
            witness_ = r;
        }
    }

    Rect small_of(const BBProblem& p, const BBox& b) const {
        Rect r = p.base;
        for (std::size_t i = 0; i < p.vars.size(); ++i) {
            const BBVar& v = p.vars[i];
            if (v.is_upper) r.hi[v.axis] = b.vlo[i];
            else r.lo[v.axis] = b.vhi[i];
        }
        return r;
    }
    Rect big_of(const BBProblem& p, const BBox& b) const {
        Rect r = p.base;
        for (std::size_t i = 0; i < p.vars.size(); ++i) {
            const BBVar& v = p.vars[i];
            if (v.is_upper) r.hi[v.axis] = b.vhi[i];
            else r.lo[v.axis] = b.vlo[i];
        }
        return r;
    }
    Rect mid_of(const BBProblem& p, const BBox& b) const {
        Rect r = p.base;
        for (std::size_t i = 0; i < p.vars.size(); ++i) {
            const BBVar& v = p.vars[i];
            const double m = 0.5 * (b.vlo[i] + b.vhi[i]);
            if (v.is_upper) r.hi[v.axis] = m;
            else r.lo[v.axis] = m;
        }
        return r;
    }

    void push_root(int pid) {
        const BBProblem& p = problems_[pid];
        BBox b;
        b.problem = pid;
        for (std::size_t i = 0; i < p.vars.size(); ++i) {
            b.vlo[i] = p.vars[i].lo;
            b.vhi[i] = p.vars[i].hi;
        }
        seed_box(p, b);
    }

    int add_problem(BBProblem p) {
        problems_.push_back(std::move(p));
        return static_cast<int>(problems_.size()) - 1;
    }

    void run() {
        const double prune_factor = 1.0 + 0.9 * opt_.tol;
        while (!heap_.empty()) {
            if (heap_.top().bound <= best_ * prune_factor) {
                pending_ = std::max(pending_, heap_.top().bound);
                break;
            }
            if (boxes_ >= opt_.max_boxes) {
                pending_ = std::max(pending_, heap_.top().bound);
                converged_ = false;
                break;
            }
            BBox b = heap_.top();
            heap_.pop();
            ++boxes_;
            const BBProblem& p = problems_[b.problem];
            // split the relatively widest variable
            int split = -1;
            double wrel = 0.0;
            for (std::size_t i = 0; i < p.vars.size(); ++i) {
                const double cell = p.vars[i].hi - p.vars[i].lo;
                if (cell <= 0.0) continue;
                const double rel = (b.vhi[i] - b.vlo[i]) / cell;
                if (rel > wrel) {
                    wrel = rel;
                    split = static_cast<int>(i);
                }
            }
            if (split < 0 || wrel < 1e-13) {
                // box is numerically a point: its value is its bound
                offer(mid_of(p, b));
                continue;
            }
            const double mid = 0.5 * (b.vlo[split] + b.vhi[split]);
            BBox c1 = b, c2 = b;
            c1.vhi[split] = mid;
            c2.vlo[split] = mid;
            seed_box(p, c1);
            seed_box(p, c2);
        }
        if (heap_.empty() && pending_ == 0.0) pending_ = best_;
    }

    ConstantInterval result() const {
        ConstantInterval ci;
        ci.lower = best_;
        ci.upper = std::max({best_, pending_, pruned_});
        ci.witness = witness_;
        ci.boxes_explored = boxes_;
        ci.iterations = evals_;
        ci.converged = converged_ && ci.upper - ci.lower <= opt_.tol * std::max(1.0, ci.upper);
        return ci;
    }

    double best() const { return best_; }

  private:
    void seed_box(const BBProblem& p, BBox& b) {
        b.bound = obj_.bound(small_of(p, b), big_of(p, b));
        offer(small_of(p, b));
        offer(big_of(p, b));
        offer(mid_of(p, b));
        if (b.bound > best_ * (1.0 + 0.9 * opt_.tol)) heap_.push(b);
        else if (b.bound > pruned_ && b.bound < kInf) pruned_ = std::max(pruned_, std::min(b.bound, best_ * (1.0 + 0.9 * opt_.tol)));
    }

    const RectObjective& obj_;
    BBOptions opt_;
    std::vector<BBProblem> problems_;
    std::priority_queue<BBox> heap_;
    double best_ = -kInf;
    Rect witness_;
    double pending_ = 0.0;
    double pruned_ = 0.0;
    std::uint64_t boxes_ = 0;
    std::uint64_t evals_ = 0;
    bool converged_ = true;
};

/// Span-assignment driven maximization of obj over all rectangles in the
/// grid's domain with positive measure.
inline ConstantInterval bb_maximize(const AxisGrid& g, const RectObjective& obj,
                                    const BBOptions& opt) {
    BBState st(obj, opt);

    // grid-aligned enumeration seeds the lower bound
    for_each_grid_rect(g, [&](const GridRect& gr) { st.offer(g.rect_of(gr)); });

    const int n = g.dim();
    // enumerate span assignments; per axis the classes are
    //   single   (s == e)        : pinned to the full cell (factor cancels)
    //   adjacent (e == s + 1)    : two pin cases from scale invariance
    //   wide     (e >= s + 2)    : both endpoints free
    std::array<int, kMaxDim> s{}, e{};
    auto emit_assignment = [&]() {
        std::vector<int> adjacent;
        for (int a = 0; a < n; ++a)
            if (e[a] == s[a] + 1) adjacent.push_back(a);
        const int cases = 1 << adjacent.size();
        for (int mask = 0; mask < cases; ++mask) {
            BBProblem p;
            p.base.n = n;
            for (int a = 0; a < n; ++a) {
                if (s[a] == e[a]) {
                    p.base.lo[a] = g.cell_lo(a, s[a]);
                    p.base.hi[a] = g.cell_hi(a, e[a]);
                } else if (e[a] == s[a] + 1) {
                    const int pos = static_cast<int>(std::find(adjacent.begin(), adjacent.end(), a) -
                                                     adjacent.begin());
                    if (mask & (1 << pos)) {
                        p.base.lo[a] = g.cell_lo(a, s[a]);  // pin a; b free
                        p.base.hi[a] = g.cell_hi(a, e[a]);
                        p.vars.push_back({a, true, g.cell_lo(a, e[a]), g.cell_hi(a, e[a])});
                    } else {
                        p.base.hi[a] = g.cell_hi(a, e[a]);  // pin b; a free
                        p.base.lo[a] = g.cell_lo(a, s[a]);
                        p.vars.push_back({a, false, g.cell_lo(a, s[a]), g.cell_hi(a, s[a])});
                    }
                } else {
                    p.base.lo[a] = g.cell_lo(a, s[a]);
                    p.base.hi[a] = g.cell_hi(a, e[a]);
                    p.vars.push_back({a, false, g.cell_lo(a, s[a]), g.cell_hi(a, s[a])});
                    p.vars.push_back({a, true, g.cell_lo(a, e[a]), g.cell_hi(a, e[a])});
                }
            }
            st.push_root(st.add_problem(std::move(p)));
        }
    };
    // product loop over (s[a] <= e[a]) pairs
    std::array<int, kMaxDim> K{};
    for (int a = 0; a < n; ++a) K[a] = g.cells_on(a);
    for (int a = 0; a < n; ++a) { s[a] = 0; e[a] = 0; }
    while (true) {
        emit_assignment();
        int a = n - 1;
        while (a >= 0) {
            if (++e[a] < K[a]) break;
            if (++s[a] < K[a]) {
                e[a] = s[a];
                break;
            }
            s[a] = 0;
            e[a] = 0;
            --a;
        }
        if (a < 0) break;
    }

    st.run();
    return st.result();
}

}  // namespace detail

/// [w]_{A_p*}: sup over rectangles of (avg w)(avg sigma)^(p-1).
inline ConstantInterval ap_star_constant(const Weight& w, const GridMeasure& mu, double p,
                                         double tol, const BBOptions& opt_in = {}) {
    if (!(p > 1.0)) throw input_error("ap_star_constant: p must exceed 1");
    if (!(tol > 0.0)) throw input_error("ap_star_constant: tol must be positive");
    detail::check_same_grid(w, mu, "ap_star_constant");
    BBOptions opt = opt_in;
    opt.tol = tol;
    const Weight sigma = dual_weight(w, p);
    detail::ApStarObjective obj(weighted_field(w, mu), weighted_field(sigma, mu), mu.field(), p);
    return detail::bb_maximize(mu.grid(), obj, opt);
}

/// Exponential A_infinity* constant: sup over rectangles of
/// (avg w) exp(avg log 1/w).
inline ConstantInterval ainf_exp_constant(const Weight& w, const GridMeasure& mu, double tol,
                                          const BBOptions& opt_in = {}) {
    if (!(tol > 0.0)) throw input_error("ainf_exp_constant: tol must be positive");
    detail::check_same_grid(w, mu, "ainf_exp_constant");
    BBOptions opt = opt_in;
    opt.tol = tol;
    const AxisGrid& g = mu.grid();
    std::vector<double> zp(g.cell_count()), zn(g.cell_count());
    for (std::size_t i = 0; i < zp.size(); ++i) {
        const double z = -std::log(w.value(i)) * mu.cell_mass(i);
        zp[i] = std::max(z, 0.0);
        zn[i] = std::max(-z, 0.0);
    }
    detail::AInfExpObjective obj(weighted_field(w, mu), PrefixField(g, zp), PrefixField(g, zn),
                                 mu.field());
    return detail::bb_maximize(g, obj, opt);
}

namespace detail {

// Range-minimum of "effective" weight values (weight where the cell has
// positive mass, +inf elsewhere) over inclusive index boxes; n <= 2 uses
// precomputed tables, higher dimensions scan directly.
class EffRangeMin {
  public:
    EffRangeMin(const Weight& w, const GridMeasure& mu) : g_(&w.grid()) {
        eff_.resize(w.cell_values().size());
        for (std::size_t i = 0; i < eff_.size(); ++i)
            eff_[i] = mu.cell_mass(i) > 0.0 ? w.value(i) : kInf;
        const int n = g_->dim();
        if (n == 1) {
            const int K = g_->cells_on(0);
            t1_.assign(static_cast<std::size_t>(K) * K, kInf);
            for (int i = 0; i < K; ++i) {
                double m = kInf;
                for (int j = i; j < K; ++j) {
                    m = std::min(m, eff_[j]);
                    t1_[static_cast<std::size_t>(i) * K + j] = m;
                }
            }
        } else if (n == 2) {
            const int K0 = g_->cells_on(0), K1 = g_->cells_on(1);
            col_.assign(static_cast<std::size_t>(K0) * K0 * K1, kInf);
            for (int i = 0; i < K0; ++i) {
                std::vector<double> m(K1, kInf);
                for (int j = i; j < K0; ++j) {
                    for (int k = 0; k < K1; ++k)
                        m[k] = std::min(m[k], eff_[static_cast<std::size_t>(j) * K1 + k]);
                    for (int k = 0; k < K1; ++k)
                        col_[(static_cast<std::size_t>(i) * K0 + j) * K1 + k] = m[k];
                }
            }
        }
    }

    double min_over(const int* first, const int* last) const {
        const int n = g_->dim();
        if (n == 1) {
            const int K = g_->cells_on(0);
            return t1_[static_cast<std::size_t>(first[0]) * K + last[0]];
        }
        if (n == 2) {
            const int K0 = g_->cells_on(0), K1 = g_->cells_on(1);
            const double* base = &col_[(static_cast<std::size_t>(first[0]) * K0 + last[0]) * K1];
            double m = kInf;
            for (int k = first[1]; k <= last[1]; ++k) m = std::min(m, base[k]);
            return m;
        }
        double m = kInf;
        int idx[kMaxDim];
        for (int a = 0; a < n; ++a) idx[a] = first[a];
        while (true) {
            m = std::min(m, eff_[g_->flat(idx)]);
            int a = n - 1;
            while (a >= 0) {
                if (++idx[a] <= last[a]) break;
                idx[a] = first[a];
                --a;
            }
            if (a < 0) break;
        }
        return m;
    }

  private:
    const AxisGrid* g_;
    std::vector<double> eff_;
    std::vector<double> t1_;
    std::vector<double> col_;
};

}  // namespace detail

/// [w]_{A_1*}: sup over rectangles of (avg w) * esssup_R(1/w). The supremum
/// is attained on grid-aligned cores possibly extended by zero-width
/// overhangs: the essential infimum jumps across a face while the average
/// does not, so every limit configuration is a grid rectangle plus a set of
/// extension directions; enumerating those is exact and complete. Overhangs
/// skip across massless slabs (they contribute no mass and do not disturb
/// the average).
inline ConstantInterval a1_star_constant(const Weight& w, const GridMeasure& mu,
                                         double /*tol*/ = 1e-9, bool grid_aligned_only = false) {
    detail::check_same_grid(w, mu, "a1_star_constant");
    const AxisGrid& g = mu.grid();
    const int n = g.dim();
    const PrefixField X = weighted_field(w, mu);
    const PrefixField& M = mu.field();
    detail::EffRangeMin rmin(w, mu);

    ConstantInterval best;
    best.lower = -detail::kInf;
    std::uint64_t evals = 0;

    for_each_grid_rect(g, [&](const GridRect& gr) {
        const Rect r = g.rect_of(gr);
        const double m = M.box(r);
        if (!(m > 0.0)) return;
        const double avg = X.box(r) / m;
        const double base = rmin.min_over(gr.first.data(), gr.last.data());
        ++evals;
        auto consider = [&](double value, bool is_limit) {
            const double tol_eq = 1e-12 * std::max(1.0, std::abs(best.lower));
            const bool better = value > best.lower + tol_eq;
            const bool tie = !better && value >= best.lower - tol_eq;
            if (better || (tie && ((best.witness_is_limit && !is_limit) ||
                                   (best.witness.n != 0 && is_limit == best.witness_is_limit &&
                                    lex_less(r, best.witness))))) {
                best.lower = value;
                best.witness = r;
                best.witness_is_limit = is_limit;
            }
        };
        consider(avg / base, false);
        if (grid_aligned_only) return;

        // extension masks: per axis, grow down/up across massless slabs to
        // the first slab holding a positive-mass cell within the core's
        // transverse extent
        int grow_lo[kMaxDim], grow_hi[kMaxDim];
        for (int a = 0; a < n; ++a) {
            int flo = gr.first[a];
            {
                int k = gr.first[a] - 1;
                int probe_first[kMaxDim], probe_last[kMaxDim];
                for (int t = 0; t < n; ++t) { probe_first[t] = gr.first[t]; probe_last[t] = gr.last[t]; }
                while (k >= 0) {
                    probe_first[a] = probe_last[a] = k;
                    if (rmin.min_over(probe_first, probe_last) < detail::kInf) break;
                    --k;
                }
                flo = std::max(k, 0);
            }
            grow_lo[a] = flo;
            int fhi = gr.last[a];
            {
                int k = gr.last[a] + 1;
                int probe_first[kMaxDim], probe_last[kMaxDim];
                for (int t = 0; t < n; ++t) { probe_first[t] = gr.first[t]; probe_last[t] = gr.last[t]; }
                while (k < g.cells_on(a)) {
                    probe_first[a] = probe_last[a] = k;
                    if (rmin.min_over(probe_first, probe_last) < detail::kInf) break;
                    ++k;
                }
                fhi = std::min(k, g.cells_on(a) - 1);
            }
            grow_hi[a] = fhi;
        }
        const int masks = 1 << (2 * n);
        for (int mask = 1; mask < masks; ++mask) {
            int first[kMaxDim], last[kMaxDim];
            bool effective = false;
            for (int a = 0; a < n; ++a) {
                first[a] = (mask & (1 << (2 * a))) ? grow_lo[a] : gr.first[a];
                last[a] = (mask & (1 << (2 * a + 1))) ? grow_hi[a] : gr.last[a];
                if (first[a] < gr.first[a] || last[a] > gr.last[a]) effective = true;
            }
            if (!effective) continue;
            const double ctx = rmin.min_over(first, last);
            consider(avg / ctx, true);
            ++evals;
        }
    });

    if (best.lower == -detail::kInf) throw degenerate_error("a1_star_constant: no positive-mass rectangle");
    best.upper = best.lower;
    best.attained = !best.witness_is_limit;
    best.converged = true;
    best.iterations = evals;
    return best;
}

// ---------------------------------------------------------------------------
// Fujii-Wilson constant
// ---------------------------------------------------------------------------

namespace detail {

// Closed-form integral over [alpha, beta] (inside one cell, mu-density rho,
// f-value phi on that cell) of avg(f, Q(x)) dmu with Q(x) = [x, b] fixed on
// the right: phi rho (beta - alpha) + E ln(D_a / D_b).
inline double tail_avg_integral_right(double alpha, double beta, double rho, double phi,
                                      double Nalpha, double Dalpha) {
    if (!(rho > 0.0) || !(beta > alpha)) return 0.0;
    const double Dbeta = Dalpha - rho * (beta - alpha);
    if (!(Dbeta > 0.0) || !(Dalpha > 0.0)) return -1.0;  // caller falls back
    const double E = Nalpha - phi * Dalpha;
    return phi * rho * (beta - alpha) + E * std::log(Dalpha / Dbeta);
}

// Same with Q(x) = [a, x] fixed on the left.
inline double tail_avg_integral_left(double alpha, double beta, double rho, double phi,
                                     double Nalpha, double Dalpha) {
    if (!(rho > 0.0) || !(beta > alpha)) return 0.0;
    const double Dbeta = Dalpha + rho * (beta - alpha);
    if (!(Dalpha > 0.0)) return -1.0;
    const double E = Nalpha - phi * Dalpha;
    return phi * rho * (beta - alpha) + E * std::log(Dbeta / Dalpha);
}

// Certified lower bound of integral over R of M_s(f) dmu for 1D grid-aligned
// R, via per-subcell pointwise minorants: on each piece the best of
// avg(f,[x,b*]), avg(f,[a*,x]), avg(f,[a*,b*]) is integrated in closed form,
// where [a*, b*] is the maximizing interval at the subcell midpoint.
inline double fw_inner_lower_1d(const PrefixField& num, const PrefixField& den, const Rect& R,
                                int depth) {
    const AxisGrid& g = num.grid();
    RefinedLattice lat(g, depth);
    const auto& rb = lat.rbreaks[0];
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < rb.size(); ++i) {
        const double u = rb[i], v = rb[i + 1];
        if (u < R.lo[0] || v > R.hi[0]) continue;
        Rect sub{{u}, {v}};
        const double subm = den.box(sub);
        if (!(subm > 0.0)) continue;
        const double rho = subm / (v - u);
        const double mid = 0.5 * (u + v);
        PointwiseMax pm = strong_maximal_at(num, den, &mid);
        if (pm.value <= 0.0) continue;
        const double a_star = pm.argmax.lo[0];
        const double b_star = pm.argmax.hi[0];
        // f restricted to this cell: value = num-density / mu-density
        Rect cell{{u}, {v}};
        const double phi = num.box(cell) / subm;

        auto piece = [&](double alpha, double beta) {
            if (!(beta > alpha)) return 0.0;
            const double m2 = 0.5 * (alpha + beta);
            // candidates at the sub-piece midpoint
            double best = -1.0;
            int which = 2;
            {
                Rect q{{std::min(a_star, m2)}, {std::max(b_star, m2)}};
                // constant candidate [a*, b*]
                const double c0 = pm.value;
                best = c0;
                which = 2;
                if (m2 < b_star) {
                    Rect qr{{m2}, {b_star}};
                    const double dm = den.box(qr);
                    if (dm > 0.0) {
                        const double c1 = num.box(qr) / dm;
                        if (c1 > best) { best = c1; which = 0; }
                    }
                }
                if (m2 > a_star) {
                    Rect ql{{a_star}, {m2}};
                    const double dm = den.box(ql);
                    if (dm > 0.0) {
                        const double c2 = num.box(ql) / dm;
                        if (c2 > best) { best = c2; which = 1; }
                    }
                }
                (void)q;
            }
            double r = -1.0;
            if (which == 0) {
                Rect qa{{alpha}, {b_star}};
                const double Dalpha = den.box(qa);
                const double Nalpha = num.box(qa);
                r = tail_avg_integral_right(alpha, beta, rho, phi, Nalpha, Dalpha);
            } else if (which == 1) {
                Rect qa{{a_star}, {alpha}};
                const double Dalpha = den.box(qa);
                const double Nalpha = num.box(qa);
                r = tail_avg_integral_left(alpha, beta, rho, phi, Nalpha, Dalpha);
            }
            if (r < 0.0) r = pm.value * rho * (beta - alpha);  // constant fallback
            return r;
        };

        // split the subcell at a*, b* and into halves for tighter minorants
        std::vector<double> cuts{u, v};
        if (a_star > u && a_star < v) cuts.push_back(a_star);
        if (b_star > u && b_star < v) cuts.push_back(b_star);
        cuts.push_back(mid);
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) total += piece(cuts[c], cuts[c + 1]);
    }
    return total;
}

}  // namespace detail

struct FwOptions {
    double tol = 0.05;
    int ms_depth = 4;
    bool cheap_lower = false;  // skip the closed-form inner integrals
    std::uint64_t max_boxes = 200000;
};

/// Fujii-Wilson A_infinity* constant: sup over rectangles R of
/// (1/w(R)) integral over R of M_s(w chi_R) dmu.
///
/// Lower bound: grid-aligned candidates with certified inner integrals.
/// Upper bound: within a grid rectangle R' the integrand is at most the
/// per-cell sup of M_s(w chi_R'), and an average of cell ratios is at most
/// the largest ratio, so sup_R FW(R) <= max over grid R' and cells c of
/// (cell sup of M_s(w chi_R') on c) / w_c. The 1D computation restricts per
/// R'; higher dimensions use the global field (coarser but still certified).
/// The gap may exceed tol; consumers use the upper end for epsilon formulas.
inline ConstantInterval ainf_fw_constant(const Weight& w, const GridMeasure& mu, double tol,
                                         int ms_depth, const FwOptions& opt_in = {}) {
    detail::check_same_grid(w, mu, "ainf_fw_constant");
    if (ms_depth < 0) throw input_error("ainf_fw_constant: ms_depth must be >= 0");
    FwOptions opt = opt_in;
    opt.tol = tol;
    opt.ms_depth = ms_depth;
    const AxisGrid& g = mu.grid();
    const int n = g.dim();
    const PrefixField& M = mu.field();
    const PrefixField W = weighted_field(w, mu);

    ConstantInterval out;
    out.lower = 1.0;
    out.attained = true;

    // ---- lower bound over grid-aligned candidates
    std::uint64_t evals = 0;
    for_each_grid_rect(g, [&](const GridRect& gr) {
        const Rect r = g.rect_of(gr);
        const double m = M.box(r);
        if (!(m > 0.0)) return;
        const double wr = W.box(r);
        ++evals;
        // cheap minorant: M_s(w chi_R) >= max(w, avg(w,R)) on R, cellwise
        const double avg = wr / m;
        double cheap = 0.0;
        int idx[kMaxDim];
        for (int a = 0; a < n; ++a) idx[a] = gr.first[a];
        while (true) {
            const std::size_t f = g.flat(idx);
            Rect cell;
            cell.n = n;
            for (int a = 0; a < n; ++a) {
                cell.lo[a] = g.cell_lo(a, idx[a]);
                cell.hi[a] = g.cell_hi(a, idx[a]);
            }
            cheap += std::max(w.value(f), avg) * M.box(cell);
            int a = n - 1;
            while (a >= 0) {
                if (++idx[a] <= gr.last[a]) break;
                idx[a] = gr.first[a];
                --a;
            }
            if (a < 0) break;
        }
        double inner = cheap / wr;
        if (n == 1 && !opt.cheap_lower) {
            // restricted field w chi_R and the closed-form inner integral
            std::vector<double> fv(g.cell_count(), 0.0);
            for (int k = gr.first[0]; k <= gr.last[0]; ++k) fv[k] = w.value(k) * mu.cell_mass(k);
            PrefixField numR(g, fv);
            const double exact = detail::fw_inner_lower_1d(numR, M, r, opt.ms_depth) / wr;
            inner = std::max(inner, exact);
        }
        if (inner > out.lower || (inner == out.lower && out.witness.n != 0 && lex_less(r, out.witness))) {
            out.lower = inner;
            out.witness = r;
        }
    });

    // ---- upper bound
    double U = 1.0;
    if (n == 1) {
        const int K = g.cells_on(0);
        for (int i = 0; i < K; ++i) {
            for (int j = i; j < K; ++j) {
                // R' = cells [i..j]; per-cell sup of M_s(w chi_R') in one pass
                std::vector<double> fv(g.cell_count(), 0.0);
                for (int k = i; k <= j; ++k) fv[k] = w.value(k) * mu.cell_mass(k);
                PrefixField numR(g, fv);
                std::vector<double> ub(static_cast<std::size_t>(j - i + 1), 0.0);
                for (int a = 0; a <= j; ++a) {
                    for (int b = std::max(a, i); b < K; ++b) {
                        Rect q{{g.cell_lo(0, a)}, {g.cell_hi(0, b)}};
                        const double m = M.box(q);
                        if (!(m > 0.0)) continue;
                        const double v = numR.box(q) / m;
                        const int clo = std::max(i, a - 1), chi = std::min(j, b + 1);
                        for (int c = clo; c <= chi; ++c)
                            if (v > ub[c - i]) ub[c - i] = v;
                    }
                }
                for (int c = i; c <= j; ++c)
                    if (mu.cell_mass(c) > 0.0) U = std::max(U, ub[c - i] / w.value(c));
            }
        }
    } else {
        MaximalField mf = strong_maximal(w.cell_values(), mu, 0, MaxMode::Certified);
        for (std::size_t c = 0; c < g.cell_count(); ++c)
            if (mu.cell_mass(c) > 0.0 && mf.upper[c] > 0.0) U = std::max(U, mf.upper[c] / w.value(c));
    }
    out.upper = std::max(U, out.lower);
    out.iterations = evals;
    out.converged = out.upper - out.lower <= opt.tol * std::max(1.0, out.upper);
    return out;
}

// ---------------------------------------------------------------------------
// Doubling constant
// ---------------------------------------------------------------------------

namespace detail {

struct DoublingBox {
    double bound;
    std::array<double, kMaxDim> llo{}, lhi{}, ulo{}, uhi{};  // outer endpoints 2R
    bool operator<(const DoublingBox& o) const { return bound < o.bound; }
};

inline Rect doubling_inner(const Rect& outer) {
    Rect r;
    r.n = outer.n;
    for (int a = 0; a < r.n; ++a) {
        r.lo[a] = 0.25 * (3.0 * outer.lo[a] + outer.hi[a]);
        r.hi[a] = 0.25 * (outer.lo[a] + 3.0 * outer.hi[a]);
    }
    return r;
}

}  // namespace detail

/// Doubling constant: sup over R with concentric 2R inside the domain of
/// mu(2R)/mu(R). Parameterized by the outer rectangle; the inner one sits at
/// its quarter points. Degenerate shrinking families are resolved in 1D by
/// the exact two-cell directional suprema; elsewhere small boxes fall back
/// to a density-ratio bound valid whenever all covered cells carry positive
/// density (a measure with interior massless cells may genuinely fail to be
/// doubling, in which case the search reports a non-converged interval).
inline ConstantInterval doubling_constant(const GridMeasure& mu, double tol,
                                          const BBOptions& opt_in = {}) {
    if (!(tol > 0.0)) throw input_error("doubling_constant: tol must be positive");
    BBOptions opt = opt_in;
    opt.tol = tol;
    const AxisGrid& g = mu.grid();
    const int n = g.dim();
    const PrefixField& M = mu.field();
    const double twon = std::pow(2.0, n);

    double L = -detail::kInf;
    Rect witness;
    std::uint64_t evals = 0;
    auto offer = [&](const Rect& outer) {
        const Rect inner = detail::doubling_inner(outer);
        for (int a = 0; a < n; ++a) {
            if (!(outer.hi[a] > outer.lo[a])) return;
            if (outer.lo[a] < g.lo(a) || outer.hi[a] > g.hi(a)) return;
        }
        const double mi = M.box(inner);
        ++evals;
        if (!(mi > 0.0)) return;
        const double v = M.box(outer) / mi;
        if (v > L + 1e-12 * std::max(1.0, L)) {
            L = v;
            witness = inner;
        } else if (v >= L - 1e-12 * std::max(1.0, L) && witness.n != 0 && lex_less(inner, witness)) {
            witness = inner;
        }
    };

    // seeds: in-cell concentric pairs (value exactly 2^n), breakpoint-hugging
    // one-sided rectangles, and a coarse center/halfwidth sweep
    {
        int idx[kMaxDim];
        for (std::size_t f = 0; f < g.cell_count(); ++f) {
            if (!(mu.cell_mass(f) > 0.0)) continue;
            g.unflat(f, idx);
            Rect outer;
            outer.n = n;
            for (int a = 0; a < n; ++a) {
                outer.lo[a] = g.cell_lo(a, idx[a]);
                outer.hi[a] = g.cell_hi(a, idx[a]);
            }
            offer(outer);
        }
        // one-sided hugs: R = [b - s, b] or [b, b + s] per axis combination
        for (int a = 0; a < n; ++a) {
            for (double b : g.breaks(a)) {
                for (int side = 0; side < 2; ++side) {
                    Rect inner = g.domain();
                    // shrink the other axes to central thirds so 2R stays inside
                    for (int t = 0; t < n; ++t) {
                        const double w3 = (g.hi(t) - g.lo(t)) / 3.0;
                        inner.lo[t] = g.lo(t) + w3;
                        inner.hi[t] = g.hi(t) - w3;
                    }
                    const double room = side == 0 ? b - g.lo(a) : g.hi(a) - b;
                    if (!(room > 0.0)) continue;
                    const double s = std::min(room / 2.0, (g.hi(a) - g.lo(a)) / 8.0);
                    if (!(s > 0.0)) continue;
                    inner.lo[a] = side == 0 ? b - s : b;
                    inner.hi[a] = side == 0 ? b : b + s;
                    // outer = concentric double of inner
                    Rect outer;
                    outer.n = n;
                    bool ok = true;
                    for (int t = 0; t < n; ++t) {
                        const double c = 0.5 * (inner.lo[t] + inner.hi[t]);
                        const double h = inner.hi[t] - inner.lo[t];
                        outer.lo[t] = c - h;
                        outer.hi[t] = c + h;
                        if (outer.lo[t] < g.lo(t) || outer.hi[t] > g.hi(t)) ok = false;
                    }
                    if (ok) offer(outer);
                }
            }
        }
    }
    if (L == -detail::kInf) throw undefined_error("doubling_constant: no admissible rectangle");

    // density extremes per cell for the fallback bound
    std::vector<double> density(g.cell_count());
    for (std::size_t f = 0; f < g.cell_count(); ++f) density[f] = mu.cell_mass(f) / g.cell_volume(f);

    auto window_bound = [&](const Rect& hull) -> double {
        // bound valid for all R with R and 2R inside the hull
        int first[kMaxDim], last[kMaxDim], idx[kMaxDim];
        for (int a = 0; a < n; ++a) {
            first[a] = g.locate(a, hull.lo[a]).first;
            auto [k, t] = g.locate(a, hull.hi[a]);
            last[a] = (t == 0.0 && k > 0) ? k - 1 : k;
            idx[a] = first[a];
        }
        double dmin = detail::kInf, dmax = 0.0;
        while (true) {
            const double d = density[g.flat(idx)];
            dmin = std::min(dmin, d);
            dmax = std::max(dmax, d);
            int a = n - 1;
            while (a >= 0) {
                if (++idx[a] <= last[a]) break;
                idx[a] = first[a];
                --a;
            }
            if (a < 0) break;
        }
        if (n == 1 && last[0] - first[0] <= 1) {
            // exact two-cell directional suprema
            if (last[0] == first[0]) return 2.0;
            const double rl = density[first[0]], rr = density[last[0]];
            double b = 2.0;
            if (rl > 0.0) b = std::max(b, (3.0 * rl + rr) / (2.0 * rl));
            if (rr > 0.0) b = std::max(b, (rl + 3.0 * rr) / (2.0 * rr));
            if (rl > 0.0 && rr > 0.0) return b;
            return detail::kInf;
        }
        if (!(dmin > 0.0)) return detail::kInf;
        return 1.0 + (twon - 1.0) * dmax / dmin;
    };

    std::priority_queue<detail::DoublingBox> heap;
    double pruned = 0.0;
    const double prune_factor = 1.0 + 0.9 * opt.tol;
    auto seed = [&](detail::DoublingBox b) {
        Rect big, small;
        big.n = small.n = n;
        bool valid_small = true;
        for (int a = 0; a < n; ++a) {
            big.lo[a] = b.llo[a];
            big.hi[a] = b.uhi[a];
            small.lo[a] = b.lhi[a];
            small.hi[a] = b.ulo[a];
            if (!(small.lo[a] < small.hi[a])) valid_small = false;
        }
        const double num_max = M.box(big);
        if (!(num_max > 0.0)) return;  // nothing inside
        // smallest inner rectangle over the box: its lower corner is largest
        // at (lhi, uhi), its upper corner smallest at (llo, ulo)
        Rect rmin;
        rmin.n = n;
        bool rmin_ok = true;
        for (int a = 0; a < n; ++a) {
            rmin.lo[a] = 0.25 * (3.0 * b.lhi[a] + b.uhi[a]);
            rmin.hi[a] = 0.25 * (b.llo[a] + 3.0 * b.ulo[a]);
            if (!(rmin.lo[a] < rmin.hi[a])) rmin_ok = false;
        }
        double bound = detail::kInf;
        if (rmin_ok) {
            const double den_min = M.box(rmin);
            if (den_min > 0.0) bound = num_max / den_min;
        }
        bound = std::min(bound, window_bound(big));
        // sample the box
        Rect mid;
        mid.n = n;
        for (int a = 0; a < n; ++a) {
            mid.lo[a] = 0.5 * (b.llo[a] + b.lhi[a]);
            mid.hi[a] = 0.5 * (b.ulo[a] + b.uhi[a]);
        }
        offer(mid);
        offer(big);
        if (valid_small) offer(small);
        b.bound = bound;
        if (bound > L * prune_factor) heap.push(b);
        else if (bound < detail::kInf) pruned = std::max(pruned, std::min(bound, L * prune_factor));
    };
    {
        detail::DoublingBox root;
        for (int a = 0; a < n; ++a) {
            root.llo[a] = g.lo(a);
            root.lhi[a] = g.hi(a);
            root.ulo[a] = g.lo(a);
            root.uhi[a] = g.hi(a);
        }
        seed(root);
    }
    std::uint64_t boxes = 0;
    double pending = 0.0;
    bool converged = true;
    while (!heap.empty()) {
        if (heap.top().bound <= L * prune_factor) {
            pending = std::max(pending, heap.top().bound);
            break;
        }
        if (boxes >= opt.max_boxes) {
            pending = std::max(pending, heap.top().bound);
            converged = false;
            break;
        }
        detail::DoublingBox b = heap.top();
        heap.pop();
        ++boxes;
        int split = -1;
        bool split_upper = false;
        double wmax = 0.0;
        for (int a = 0; a < n; ++a) {
            const double span = g.hi(a) - g.lo(a);
            const double wl = (b.lhi[a] - b.llo[a]) / span;
            const double wu = (b.uhi[a] - b.ulo[a]) / span;
            if (wl > wmax) { wmax = wl; split = a; split_upper = false; }
            if (wu > wmax) { wmax = wu; split = a; split_upper = true; }
        }
        if (split < 0 || wmax < 1e-12) {
            Rect outer;
            outer.n = n;
            for (int a = 0; a < n; ++a) {
                outer.lo[a] = 0.5 * (b.llo[a] + b.lhi[a]);
                outer.hi[a] = 0.5 * (b.ulo[a] + b.uhi[a]);
            }
            offer(outer);
            continue;
        }
        detail::DoublingBox c1 = b, c2 = b;
        if (split_upper) {
            const double mid = 0.5 * (b.ulo[split] + b.uhi[split]);
            c1.uhi[split] = mid;
            c2.ulo[split] = mid;
        } else {
            const double mid = 0.5 * (b.llo[split] + b.lhi[split]);
            c1.lhi[split] = mid;
            c2.llo[split] = mid;
        }
        seed(c1);
        seed(c2);
    }

    ConstantInterval out;
    out.lower = L;
    out.upper = std::max({L, pending, pruned});
    out.witness = witness;
    out.boxes_explored = boxes;
    out.iterations = evals;
    out.converged = converged && out.upper - out.lower <= opt.tol * std::max(1.0, out.upper);
    return out;
}

}  // namespace sw
