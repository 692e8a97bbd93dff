#ifndef QRELAY_COINCIDENCE_HPP
#define QRELAY_COINCIDENCE_HPP

// Post-selected coincidence probabilities for the full relay.
//
// Everything downstream of the pattern sum needs only two aggregates:
//   Z            = Σ_patterns G(pattern) · p_raw(pattern)
//   S[(g,A,A'), (h,C,C')] = Σ_patterns G · amp(A,B) · amp(A',B')
// where G is the heralding click probability, amp(A,B) the normalized
// end-state amplitude with a-side occupations (A,B), B = g-A, and (h,C,C')
// the d-side occupations paired with (g,A,A') by photon conservation. The
// rotator angles and the outer detector model enter only through small
// per-class tensors contracted against S, so a single pass over the pattern
// space serves every outer click class and every angle pair.
//
// The pattern sum is reduced in fixed lexicographic chunks with compensated
// summation at the merge, which makes the result byte-identical for any
// worker count.

#include <atomic>
#include <cmath>
#include <complex>
#include <cstring>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qrelay/amplitudes.hpp"
#include "qrelay/combinatorics.hpp"
#include "qrelay/detector.hpp"
#include "qrelay/model.hpp"

namespace qrelay {

namespace pass_detail {

// Flattened per-tuple tables so the hot loop touches only integer digits and
// contiguous doubles.
struct PassTables {
    int slots = 1, n_stations = 1, smax = 0, g_max = 0;
    std::size_t tcount = 0;
    std::vector<int> hsum, vsum;                  // [tcount]
    std::vector<double> elem_factor, sec_factor;  // [tcount]
    std::vector<double> g_click;                  // [slots * tcount]
    std::vector<double> split_h, split_v;         // [tcount * (smax+1)]
    std::vector<double> omega_h, omega_v;         // [tcount * (smax+1)]
    std::vector<double> sqrt_fact;                // [g_max+1]
    std::vector<int> idx_base;                    // [g_max+2], Σ (g'+1)^2
    int combo_count = 0;

    PassTables(const RelayParams& p, const LookupTables& tables, const TupleCatalog& catalog,
               const std::vector<ClickTuple>& clicks, const DetectorModel& det) {
        slots = p.bell_measurements();
        n_stations = p.n_stations;
        smax = std::min(2 * p.n_max, p.tuple_sum_max);
        g_max = p.tuple_sum_max;
        tcount = catalog.size();

        hsum.resize(tcount);
        vsum.resize(tcount);
        elem_factor.resize(tcount);
        sec_factor.resize(tcount);
        split_h.assign(tcount * (smax + 1), 0.0);
        split_v.assign(tcount * (smax + 1), 0.0);
        omega_h.assign(tcount * (smax + 1), 0.0);
        omega_v.assign(tcount * (smax + 1), 0.0);
        for (std::size_t t = 0; t < tcount; ++t) {
            const CountTuple& ct = catalog[t];
            hsum[t] = ct.hsum();
            vsum[t] = ct.vsum();
            const int s = ct.sum();
            const double facts = tables.sqrt_fact(ct.i) * tables.sqrt_fact(ct.j) *
                                 tables.sqrt_fact(ct.k) * tables.sqrt_fact(ct.l);
            elem_factor[t] = tables.tanh_pow(s) * tables.inv_pow2_half(s) / facts;
            sec_factor[t] = tables.inv_pow2_half(s) * facts;
            for (int sg = 0; sg <= smax; ++sg) {
                split_h[t * (smax + 1) + sg] = double(tables.split_at(ct.i, ct.l, sg));
                split_v[t * (smax + 1) + sg] = double(tables.split_at(ct.j, ct.k, sg));
                omega_h[t * (smax + 1) + sg] = double(tables.omega_at(sg, ct.i, ct.l));
                omega_v[t * (smax + 1) + sg] = double(tables.omega_at(sg, ct.j, ct.k));
            }
        }

        g_click.resize(std::size_t(slots) * tcount);
        for (int u = 0; u < slots; ++u)
            for (std::size_t t = 0; t < tcount; ++t)
                g_click[std::size_t(u) * tcount + t] = tuple_click_prob(clicks[u], catalog[t], det);

        sqrt_fact.resize(g_max + 1);
        for (int n = 0; n <= g_max; ++n) sqrt_fact[n] = tables.sqrt_fact(n);

        idx_base.resize(g_max + 2);
        idx_base[0] = 0;
        for (int g = 0; g <= g_max; ++g) idx_base[g + 1] = idx_base[g] + (g + 1) * (g + 1);
        combo_count = idx_base[g_max + 1];
        // 8 bytes per S entry; refuse configurations that would not fit.
        if (double(combo_count) * double(combo_count) * 8.0 > 256.0 * 1024 * 1024)
            throw ValidationError("tuple_sum_max too large for the angle-statistics tensor");
    }
};

// Accumulators for one lexicographic chunk of the pattern space.
struct ChunkResult {
    double z = 0.0;
    std::uint64_t feasible = 0;
    std::vector<double> s; // combo_count^2, row-major (a-index, d-index)
};

// Evaluates patterns [first, last) of the lexicographic stream.
inline void run_chunk(const PassTables& pt, const TupleCatalog& catalog, std::uint64_t first,
                      std::uint64_t last, ChunkResult& out) {
    const int slots = pt.slots;
    const int N = pt.n_stations;
    const int sw = pt.smax + 1;
    out.s.assign(std::size_t(pt.combo_count) * pt.combo_count, 0.0);

    std::vector<std::uint32_t> d(slots);
    catalog.decode(first, slots, d.data());
    const std::uint32_t radix = std::uint32_t(catalog.size());

    std::vector<int> off_h(N), off_v(N);
    std::vector<double> pha(pt.smax + 1), phb(pt.smax + 1);

    for (std::uint64_t idx = first; idx < last; ++idx) {
        // Chain offsets and the surviving (A, B) box.
        off_h[N - 1] = 0;
        off_v[N - 1] = 0;
        int a_lo = 0, a_hi = pt.hsum[d[N - 1]];
        int b_lo = 0, b_hi = pt.vsum[d[N - 1]];
        for (int p = N - 2; p >= 0; --p) {
            off_h[p] = off_h[p + 1] + pt.hsum[d[N + p]] - pt.hsum[d[p + 1]];
            off_v[p] = off_v[p + 1] + pt.vsum[d[N + p]] - pt.vsum[d[p + 1]];
            a_lo = std::max(a_lo, -off_h[p]);
            a_hi = std::min(a_hi, pt.hsum[d[p]] - off_h[p]);
            b_lo = std::max(b_lo, -off_v[p]);
            b_hi = std::min(b_hi, pt.vsum[d[p]] - off_v[p]);
        }

        if (a_lo <= a_hi && b_lo <= b_hi) {
            double pref = 1.0, g_all = 1.0;
            for (int u = 0; u < slots; ++u) {
                pref *= (u < N) ? pt.elem_factor[d[u]] : pt.sec_factor[d[u]];
                g_all *= pt.g_click[std::size_t(u) * pt.tcount + d[u]];
            }

            const int cb_h = pt.hsum[d[0]] - off_h[0];
            const int cb_v = pt.vsum[d[0]] - off_v[0];

            // One-dimensional sector families, already weighted with the
            // sqrt(n!) normalization of both end modes they determine.
            double sum_a2 = 0.0, sum_b2 = 0.0;
            for (int a = a_lo; a <= a_hi; ++a) {
                double f = 1.0;
                for (int p = 0; p < N; ++p) {
                    const int sg = a + off_h[p];
                    f *= pt.split_h[d[p] * sw + sg];
                    if (p < N - 1) f *= pt.omega_h[d[N + p] * sw + sg];
                }
                f *= pt.sqrt_fact[a] * pt.sqrt_fact[cb_h - a];
                pha[a - a_lo] = f;
                sum_a2 += f * f;
            }
            for (int b = b_lo; b <= b_hi; ++b) {
                double f = 1.0;
                for (int p = 0; p < N; ++p) {
                    const int tu = b + off_v[p];
                    f *= pt.split_v[d[p] * sw + tu];
                    if (p < N - 1) f *= pt.omega_v[d[N + p] * sw + tu];
                }
                f *= pt.sqrt_fact[b] * pt.sqrt_fact[cb_v - b];
                phb[b - b_lo] = f;
                sum_b2 += f * f;
            }

            const double p_raw = pref * pref * sum_a2 * sum_b2;
            if (p_raw != 0.0) {
                out.z += g_all * p_raw;
                ++out.feasible;

                const double w = g_all * pref * pref;
                for (int g = a_lo + b_lo; g <= a_hi + b_hi; ++g) {
                    const int h = cb_h + cb_v - g;
                    const int lo = std::max(a_lo, g - b_hi);
                    const int hi = std::min(a_hi, g - b_lo);
                    const std::size_t abase = std::size_t(pt.idx_base[g]);
                    const std::size_t dbase = std::size_t(pt.idx_base[h]);
                    for (int a1 = lo; a1 <= hi; ++a1) {
                        const double q1 = w * pha[a1 - a_lo] * phb[g - a1 - b_lo];
                        if (q1 == 0.0) continue;
                        const std::size_t arow = abase + std::size_t(a1) * (g + 1);
                        const std::size_t drow = dbase + std::size_t(cb_h - a1) * (h + 1);
                        for (int a2 = lo; a2 <= hi; ++a2) {
                            const double q2 = pha[a2 - a_lo] * phb[g - a2 - b_lo];
                            out.s[(arow + a2) * pt.combo_count + (drow + (cb_h - a2))] +=
                                q1 * q2;
                        }
                    }
                }
            }
        }

        // Lexicographic odometer step.
        for (int u = slots - 1; u >= 0; --u) {
            if (++d[u] < radix) break;
            d[u] = 0;
        }
    }
}

} // namespace pass_detail

/// Result of one pattern pass: the evidence Z and the angle-independent
/// pair statistics S, plus bookkeeping for diagnostics.
struct PatternPass {
    double z = 0.0;
    std::vector<double> s;
    int combo_count = 0;
    int g_max = 0;
    std::vector<int> idx_base;
    std::uint64_t total_patterns = 0;
    std::uint64_t feasible_patterns = 0;
};

/// All conditional-probability queries for one parameter set and one fixed
/// inner heralding sequence. Construction runs the pattern pass once; every
/// angle/class query afterwards is a cheap tensor contraction.
class CoincidenceContext {
  public:
    CoincidenceContext(const RelayParams& params, std::vector<ClickTuple> inner_clicks,
                       int workers = 1)
        : params_(validate_params(params)), clicks_(std::move(inner_clicks)),
          tables_(params_), catalog_(params_), det_(detector_from_params(params_)),
          outer_probs_(det_, params_.tuple_sum_max) {
        if (int(clicks_.size()) != params_.bell_measurements())
            throw ValidationError("inner_clicks must have one tuple per Bell measurement (2N-1)");
        if (workers < 1) throw ValidationError("workers must be >= 1");
        run_pass(workers);
        if (!(pass_.z > 0.0))
            throw DegenerateEvidenceError(
                "heralding evidence vanished: click pattern unreachable under truncation");
    }

    const RelayParams& params() const { return params_; }
    const PatternPass& pass() const { return pass_; }
    double evidence() const { return pass_.z; }

    /// Q for one outer click assignment at the given rotator angles.
    double outer_class_prob(const ClickTuple& outer, const RotatorAngles& angles) const {
        const auto ta = side_tensor(int(outer.q), int(outer.r), angles.alpha_tilde);
        const auto td = side_tensor(int(outer.t), int(outer.s), angles.delta_tilde);
        double acc = 0.0;
        for (int ai = 0; ai < pass_.combo_count; ++ai) {
            if (ta[ai] == std::complex<double>{0.0, 0.0}) continue;
            std::complex<double> row{0.0, 0.0};
            const double* srow = pass_.s.data() + std::size_t(ai) * pass_.combo_count;
            for (int di = 0; di < pass_.combo_count; ++di)
                if (srow[di] != 0.0) row += srow[di] * td[di];
            acc += (ta[ai] * row).real();
        }
        return acc / pass_.z;
    }

    /// The four standard outer classes in one call.
    QSet class_probs(const RotatorAngles& angles) const {
        QSet q;
        q.q1010 = outer_class_prob(ClickTuple{1, 0, 1, 0}, angles);
        q.q0101 = outer_class_prob(ClickTuple{0, 1, 0, 1}, angles);
        q.q0110 = outer_class_prob(ClickTuple{0, 1, 1, 0}, angles);
        q.q1001 = outer_class_prob(ClickTuple{1, 0, 0, 1}, angles);
        return q;
    }

  private:
    void run_pass(int workers) {
        pass_.total_patterns = catalog_.pattern_count(params_.n_stations);
        const pass_detail::PassTables pt(params_, tables_, catalog_, clicks_, det_);
        pass_.combo_count = pt.combo_count;
        pass_.g_max = pt.g_max;
        pass_.idx_base = pt.idx_base;

        constexpr std::uint64_t kChunk = std::uint64_t(1) << 21;
        const std::uint64_t n_chunks = (pass_.total_patterns + kChunk - 1) / kChunk;
        if (n_chunks > 65536)
            throw ValidationError("pattern space too large; reduce n_max or n_stations");

        std::vector<pass_detail::ChunkResult> chunks;
        chunks.resize(std::size_t(n_chunks));
        std::atomic<std::uint64_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::uint64_t k = next.fetch_add(1);
                if (k >= n_chunks) return;
                const std::uint64_t first = k * kChunk;
                const std::uint64_t last = std::min(first + kChunk, pass_.total_patterns);
                pass_detail::run_chunk(pt, catalog_, first, last, chunks[std::size_t(k)]);
            }
        };
        const int n_threads = int(std::min<std::uint64_t>(std::uint64_t(workers), n_chunks));
        if (n_threads <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            pool.reserve(std::size_t(n_threads));
            for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }

        // Ordered compensated merge: identical bytes for any worker count.
        const std::size_t s_size = std::size_t(pt.combo_count) * pt.combo_count;
        pass_.s.assign(s_size, 0.0);
        std::vector<double> comp(s_size, 0.0);
        double z = 0.0, zc = 0.0;
        for (const auto& ch : chunks) {
            const double zy = ch.z - zc;
            const double zt = z + zy;
            zc = (zt - z) - zy;
            z = zt;
            pass_.feasible_patterns += ch.feasible;
            for (std::size_t i = 0; i < s_size; ++i) {
                const double y = ch.s[i] - comp[i];
                const double t = pass_.s[i] + y;
                comp[i] = (t - pass_.s[i]) - y;
                pass_.s[i] = t;
            }
        }
        pass_.z = z;
    }

    /// Σ_{m+n=g} p(click_h|m) p(click_v|n) R(m,n|A,B) conj(R(m,n|A',B')) for
    /// one rotated side, laid out like the S-tensor side index.
    std::vector<std::complex<double>> side_tensor(int click_h, int click_v, double theta) const {
        std::vector<std::complex<double>> out(std::size_t(pass_.combo_count), {0.0, 0.0});
        for (int g = 0; g <= pass_.g_max; ++g) {
            for (int m = 0; m <= g; ++m) {
                const double w = outer_probs_.prob(click_h, m) * outer_probs_.prob(click_v, g - m);
                if (w == 0.0) continue;
                std::vector<std::complex<double>> r(std::size_t(g) + 1);
                for (int a = 0; a <= g; ++a) r[a] = rot_elem(m, g - m, a, g - a, theta);
                for (int a1 = 0; a1 <= g; ++a1)
                    for (int a2 = 0; a2 <= g; ++a2)
                        out[std::size_t(pass_.idx_base[g]) + std::size_t(a1) * (g + 1) + a2] +=
                            w * r[a1] * std::conj(r[a2]);
            }
        }
        return out;
    }

    RelayParams params_;
    std::vector<ClickTuple> clicks_;
    LookupTables tables_;
    TupleCatalog catalog_;
    DetectorModel det_;
    ClickProbTable outer_probs_;
    PatternPass pass_;
};

/// Bayesian posterior over ideal inner detection patterns given the observed
/// clicks: P(pattern) = p(clicks|pattern) p(pattern) / Z, supported on the
/// admissible pattern space. Intended for diagnostics at small N; the map
/// holds one entry per pattern of nonzero weight.
inline std::map<InnerPattern, double> posterior(const std::vector<ClickTuple>& clicks,
                                                const RelayParams& params) {
    validate_params(params);
    if (int(clicks.size()) != params.bell_measurements())
        throw ValidationError("clicks must have one tuple per Bell measurement (2N-1)");
    const LookupTables tables(params);
    const DetectorModel det = detector_from_params(params);

    std::vector<std::pair<InnerPattern, double>> weighted;
    double z = 0.0, zc = 0.0;
    enumerate_inner_patterns(params, [&](const InnerPattern& pat) {
        const ChainEvaluator chain(pat, tables);
        if (!chain.feasible()) return;
        double p_raw = 0.0;
        for (int a = chain.a_lo(); a <= chain.a_hi(); ++a)
            for (int b = chain.b_lo(); b <= chain.b_hi(); ++b) {
                const double coeff = chain.coefficient(a, b) * tables.sqrt_fact(a) *
                                     tables.sqrt_fact(b) * tables.sqrt_fact(chain.c_of(a)) *
                                     tables.sqrt_fact(chain.d_of(b));
                p_raw += coeff * coeff;
            }
        if (p_raw == 0.0) return;
        double g = 1.0;
        for (std::size_t u = 0; u < clicks.size(); ++u)
            g *= tuple_click_prob(clicks[u], pat.tuples[u], det);
        const double gp = g * p_raw;
        weighted.emplace_back(pat, gp);
        const double y = gp - zc;
        const double t = z + y;
        zc = (t - z) - y;
        z = t;
    });
    if (!(z > 0.0))
        throw DegenerateEvidenceError(
            "posterior evidence vanished: click pattern unreachable under truncation");
    std::map<InnerPattern, double> out;
    for (auto& [pat, gp] : weighted)
        if (gp > 0.0) out.emplace(std::move(pat), gp / z);
    return out;
}

/// Conditional probability of one outer click class given the inner clicks.
inline double coincidence_prob(const ClickTuple& outer_clicks,
                               const std::vector<ClickTuple>& inner_clicks,
                               const RotatorAngles& angles, const RelayParams& params,
                               int workers = 1) {
    const CoincidenceContext ctx(params, inner_clicks, workers);
    return ctx.outer_class_prob(outer_clicks, angles);
}

/// Heralded end-mode mixture: posterior weights paired with the unnormalized
/// end states they herald. Diagnostic companion to the probability queries.
struct HeraldedState {
    struct Component {
        double weight = 0.0;
        InnerPattern pattern;
        EndStateTerms state;
    };
    std::vector<Component> components; // ascending pattern order
};

inline HeraldedState heralded_state(const std::vector<ClickTuple>& clicks,
                                    const RelayParams& params) {
    const auto post = posterior(clicks, params);
    HeraldedState out;
    out.components.reserve(post.size());
    for (const auto& [pat, w] : post)
        out.components.push_back({w, pat, end_state_terms(pat, params)});
    return out;
}

/// Visibility at equal rotator angles with the representative all-{1,0,1,0}
/// heralding: V_max = Q1010 + Q0101 and V_min = Q0110 + Q1001, both at
/// delta~ = alpha~.
inline VisibilityReport visibility(const RelayParams& params, double alpha_tilde = M_PI / 2,
                                   int workers = 1) {
    const std::vector<ClickTuple> clicks(validate_params(params).bell_measurements(),
                                         kSingletClicksHV);
    const CoincidenceContext ctx(params, clicks, workers);
    const QSet q = ctx.class_probs(RotatorAngles{alpha_tilde, alpha_tilde});
    VisibilityReport rep;
    rep.q1010 = q.q1010;
    rep.q0101 = q.q0101;
    rep.q0110 = q.q0110;
    rep.q1001 = q.q1001;
    rep.v_max = q.q1010 + q.q0101;
    rep.v_min = q.q0110 + q.q1001;
    rep.visibility = (rep.v_max - rep.v_min) / (rep.v_max + rep.v_min);
    rep.params = params;
    rep.angles = RotatorAngles{alpha_tilde, alpha_tilde};
    return rep;
}

/// Overload taking the angle bundle; only alpha_tilde is read, the report is
/// always evaluated at equal angles.
inline VisibilityReport visibility(const RelayParams& params, const RotatorAngles& fixed_angle,
                                   int workers = 1) {
    return visibility(params, fixed_angle.alpha_tilde, workers);
}

/// One sweep row. The contrast column v generalizes visibility to rows where
/// delta~ != alpha~: it equals (Vmax-Vmin)/(Vmax+Vmin) at delta~ = alpha~.
struct SweepRow {
    double x = 0.0;
    QSet q;
    double v_max = 0.0, v_min = 0.0, v = 0.0;
    bool ok = false;
    std::string error;
};

struct SweepTable {
    std::string variable; // "angle", "chi", "distance", or "nmax"
    RelayParams params;   // base parameters (the swept field varies per row)
    double alpha_tilde = M_PI / 2;
    std::vector<SweepRow> rows;
};

namespace sweep_detail {

inline void require_monotone_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw ValidationError("sweep grid must be non-empty");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw ValidationError("sweep grid must be strictly increasing");
}

inline void fill_row(SweepRow& row, const QSet& q) {
    row.q = q;
    row.v_max = q.q1010 + q.q0101;
    row.v_min = q.q0110 + q.q1001;
    const double denom = row.v_max + row.v_min;
    row.v = denom > 0.0 ? (row.v_max - row.v_min) / denom : 0.0;
    row.ok = true;
}

} // namespace sweep_detail

/// Q values of the four outer classes as the d-side rotator angle varies at
/// fixed alpha~. One pattern pass serves the whole grid.
inline SweepTable sweep_angle(const RelayParams& params, double alpha_tilde,
                              const std::vector<double>& delta_grid, int workers = 1) {
    sweep_detail::require_monotone_grid(delta_grid);
    SweepTable table{"angle", params, alpha_tilde, {}};
    table.rows.resize(delta_grid.size());
    std::optional<CoincidenceContext> ctx;
    for (std::size_t r = 0; r < delta_grid.size(); ++r) {
        SweepRow& row = table.rows[r];
        row.x = delta_grid[r];
        try {
            if (!ctx)
                ctx.emplace(params,
                            std::vector<ClickTuple>(params.bell_measurements(), kSingletClicksHV),
                            workers);
            sweep_detail::fill_row(row, ctx->class_probs(RotatorAngles{alpha_tilde, row.x}));
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    }
    return table;
}

/// Visibility vs source brightness chi.
inline SweepTable sweep_chi(const RelayParams& params, const std::vector<double>& chi_grid,
                            double alpha_tilde = M_PI / 2, int workers = 1) {
    sweep_detail::require_monotone_grid(chi_grid);
    SweepTable table{"chi", params, alpha_tilde, {}};
    table.rows.resize(chi_grid.size());
    for (std::size_t r = 0; r < chi_grid.size(); ++r) {
        SweepRow& row = table.rows[r];
        row.x = chi_grid[r];
        try {
            RelayParams p = params;
            p.chi = row.x;
            const VisibilityReport rep = visibility(p, alpha_tilde, workers);
            sweep_detail::fill_row(row, QSet{rep.q1010, rep.q0101, rep.q0110, rep.q1001});
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    }
    return table;
}

/// Visibility vs total relay distance in km.
inline SweepTable sweep_distance(const RelayParams& params, const std::vector<double>& km_grid,
                                 double alpha_tilde = M_PI / 2, int workers = 1) {
    sweep_detail::require_monotone_grid(km_grid);
    SweepTable table{"distance", params, alpha_tilde, {}};
    table.rows.resize(km_grid.size());
    for (std::size_t r = 0; r < km_grid.size(); ++r) {
        SweepRow& row = table.rows[r];
        row.x = km_grid[r];
        try {
            RelayParams p = params;
            p.distance_km = row.x;
            const VisibilityReport rep = visibility(p, alpha_tilde, workers);
            sweep_detail::fill_row(row, QSet{rep.q1010, rep.q0101, rep.q0110, rep.q1001});
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    }
    return table;
}

/// Visibility at each requested truncation level (typically {2, 3}).
inline SweepTable sweep_nmax(const RelayParams& params, const std::vector<int>& nmax_values,
                             double alpha_tilde = M_PI / 2, int workers = 1) {
    if (nmax_values.empty()) throw ValidationError("sweep grid must be non-empty");
    for (std::size_t i = 1; i < nmax_values.size(); ++i)
        if (nmax_values[i] <= nmax_values[i - 1])
            throw ValidationError("sweep grid must be strictly increasing");
    SweepTable table{"nmax", params, alpha_tilde, {}};
    table.rows.resize(nmax_values.size());
    for (std::size_t r = 0; r < nmax_values.size(); ++r) {
        SweepRow& row = table.rows[r];
        row.x = double(nmax_values[r]);
        try {
            RelayParams p = params;
            p.n_max = nmax_values[r];
            p.tuple_sum_max = std::min(p.tuple_sum_max, 4 * p.n_max);
            const VisibilityReport rep = visibility(p, alpha_tilde, workers);
            sweep_detail::fill_row(row, QSet{rep.q1010, rep.q0101, rep.q0110, rep.q1001});
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    }
    return table;
}

/// Interpolated x at which the v column first crosses `level` from above.
/// nullopt when the table never straddles the level (or has no valid rows).
inline std::optional<double> threshold_crossing(const SweepTable& table, double level) {
    const SweepRow* prev = nullptr;
    for (const auto& row : table.rows) {
        if (!row.ok) continue;
        if (prev && prev->v >= level && row.v < level) {
            const double t = (prev->v - level) / (prev->v - row.v);
            return prev->x + t * (row.x - prev->x);
        }
        prev = &row;
    }
    return std::nullopt;
}

} // namespace qrelay

#endif // QRELAY_COINCIDENCE_HPP
