#ifndef QRELAY_ORACLE_HPP
#define QRELAY_ORACLE_HPP

// Brute-force truncated-Fock-space reference simulator. Everything here is
// computed by explicit state-vector evolution: squeezed-pair sources, 50:50
// beam splitters, polarization rotators, and threshold-detector POVMs. The
// closed-form path (amplitudes.hpp / coincidence.hpp) shares none of this
// machinery, so agreement between the two is a meaningful cross-check.

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "qrelay/combinatorics.hpp"
#include "qrelay/detector.hpp"
#include "qrelay/model.hpp"

namespace qrelay {

/// Raised when a requested oracle computation would exceed the memory budget
/// for explicit state vectors.
class OracleCapacityError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

using Complex = std::complex<double>;

// Occupation vectors are packed 4 bits per mode, mode 0 in the low nibble.
using OccKey = std::uint64_t;

inline int occ_get(OccKey key, int mode) { return int((key >> (4 * mode)) & 0xF); }

inline OccKey occ_set(OccKey key, int mode, int value) {
    const int shift = 4 * mode;
    return (key & ~(OccKey(0xF) << shift)) | (OccKey(value) << shift);
}

/// i^k with exact integer phase, reduced mod 4 before any multiplication.
inline Complex unit_phase(int k) {
    switch (((k % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return {0.0, 1.0};
    case 2: return {-1.0, 0.0};
    default: return {0.0, -1.0};
    }
}

/// Sparse multimode Fock state with a hard per-mode occupation cap.
/// Mode transformations drop components whose occupation would exceed the
/// cap; the squared norm of everything dropped is tracked so callers can
/// verify that truncation losses are harmless for a given comparison.
class FockState {
  public:
    FockState(int n_modes, int cap) : n_modes_(n_modes), cap_(cap) {
        if (n_modes < 1 || n_modes > 16)
            throw OracleCapacityError("FockState supports 1..16 modes");
        if (cap < 0 || cap > 15) throw OracleCapacityError("occupation cap must be in 0..15");
    }

    int n_modes() const { return n_modes_; }
    int cap() const { return cap_; }

    std::map<OccKey, Complex>& amps() { return amps_; }
    const std::map<OccKey, Complex>& amps() const { return amps_; }

    Complex amplitude(OccKey key) const {
        auto it = amps_.find(key);
        return it == amps_.end() ? Complex{0.0, 0.0} : it->second;
    }

    void add(OccKey key, Complex value) {
        auto [it, inserted] = amps_.emplace(key, value);
        if (!inserted) it->second += value;
    }

    double norm2() const {
        double acc = 0.0;
        for (const auto& [k, a] : amps_) acc += std::norm(a);
        return acc;
    }

    double truncation_loss2() const { return truncation_loss2_; }
    bool overflowed() const { return truncation_loss2_ > 0.0; }
    void record_loss2(double l2) { truncation_loss2_ += l2; }

  private:
    int n_modes_, cap_;
    std::map<OccKey, Complex> amps_;
    double truncation_loss2_ = 0.0;
};

// Mode indices of the 8-mode single-station state built by pdc_state.
inline constexpr int kModeAH = 0, kModeAV = 1, kModeBH = 2, kModeBV = 3;
inline constexpr int kModeCH = 4, kModeCV = 5, kModeDH = 6, kModeDV = 7;

/// Single-station source state over (a_H a_V b_H b_V c_H c_V d_H d_V):
/// four independent two-mode squeezers pairing a_H~b_H, a_V~b_V, c_H~d_H,
/// c_V~d_V. Each squeezer contributes amplitude (i tanh chi)^n / cosh chi to
/// its |n,n> component; occupations are truncated at n_max per mode.
inline FockState pdc_state(double chi, int n_max) {
    if (!(chi >= 0.0)) throw ValidationError("pdc_state: chi must be non-negative");
    FockState state(8, n_max);
    const double th = std::tanh(chi);
    const double ic = 1.0 / std::cosh(chi);
    std::vector<double> mag(n_max + 1);
    mag[0] = ic;
    for (int n = 1; n <= n_max; ++n) mag[n] = mag[n - 1] * th;
    for (int n1 = 0; n1 <= n_max; ++n1)
        for (int n2 = 0; n2 <= n_max; ++n2)
            for (int n3 = 0; n3 <= n_max; ++n3)
                for (int n4 = 0; n4 <= n_max; ++n4) {
                    OccKey key = 0;
                    key = occ_set(key, kModeAH, n1);
                    key = occ_set(key, kModeBH, n1);
                    key = occ_set(key, kModeAV, n2);
                    key = occ_set(key, kModeBV, n2);
                    key = occ_set(key, kModeCH, n3);
                    key = occ_set(key, kModeDH, n3);
                    key = occ_set(key, kModeCV, n4);
                    key = occ_set(key, kModeDV, n4);
                    const int total = n1 + n2 + n3 + n4;
                    state.add(key, unit_phase(total) * (mag[n1] * mag[n2] * mag[n3] * mag[n4]));
                }
    return state;
}

/// 50:50 beam splitter in the symmetric-i convention:
///   a† -> (a† + i b†)/√2,  b† -> (i a† + b†)/√2.
/// Components pushed past the occupation cap are dropped and their squared
/// weight recorded as truncation loss.
inline FockState apply_beamsplitter(const FockState& state, int mode_a, int mode_b) {
    FockState out(state.n_modes(), state.cap());
    out.record_loss2(state.truncation_loss2());
    const int cap = state.cap();
    for (const auto& [key, amp] : state.amps()) {
        const int m = occ_get(key, mode_a);
        const int n = occ_get(key, mode_b);
        // a†^m b†^n -> 2^{-(m+n)/2} Σ_o [Σ_x C(m,x) C(n,o-x) i^{m+o-2x}] a†^o b†^{m+n-o}
        const double base =
            std::pow(0.5, 0.5 * (m + n)) / std::sqrt(double(factorial(m) * factorial(n)));
        for (int o = 0; o <= m + n; ++o) {
            Complex coef{0.0, 0.0};
            for (int x = std::max(0, o - n); x <= std::min(m, o); ++x) {
                const double b = double(binomial(m, x) * binomial(n, o - x));
                coef += unit_phase(m + o - 2 * x) * b;
            }
            if (coef == Complex{0.0, 0.0}) continue;
            const int rest = m + n - o;
            const Complex contrib =
                amp * coef * base * std::sqrt(double(factorial(o) * factorial(rest)));
            if (o > cap || rest > cap) {
                out.record_loss2(std::norm(contrib));
                continue;
            }
            out.add(occ_set(occ_set(key, mode_a, o), mode_b, rest), contrib);
        }
    }
    return out;
}

/// Polarization rotator on one spatial mode through Bloch angle theta:
///   H† -> cos(θ/2) H† + i sin(θ/2) V†,  V† -> i sin(θ/2) H† + cos(θ/2) V†.
inline FockState apply_rotator(const FockState& state, int mode_h, int mode_v, double theta) {
    FockState out(state.n_modes(), state.cap());
    out.record_loss2(state.truncation_loss2());
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    const int cap = state.cap();
    for (const auto& [key, amp] : state.amps()) {
        const int hi = occ_get(key, mode_h);
        const int vi = occ_get(key, mode_v);
        const double base = 1.0 / std::sqrt(double(factorial(hi) * factorial(vi)));
        // (c H† + i s V†)^hi (i s H† + c V†)^vi, collected by outgoing H count.
        for (int ho = 0; ho <= hi + vi; ++ho) {
            Complex coef{0.0, 0.0};
            for (int y = std::max(0, ho - hi); y <= std::min(vi, ho); ++y) {
                // y photons of the incoming V group exit in H.
                const double b = double(binomial(hi, ho - y) * binomial(vi, y));
                const int cos_pow = (hi + vi) - (hi - ho + 2 * y);
                coef += unit_phase(hi - ho + 2 * y) * b * std::pow(c, cos_pow) *
                        std::pow(s, hi - ho + 2 * y);
            }
            if (coef == Complex{0.0, 0.0}) continue;
            const int vo = hi + vi - ho;
            const Complex contrib =
                amp * coef * base * std::sqrt(double(factorial(ho) * factorial(vo)));
            if (ho > cap || vo > cap) {
                out.record_loss2(std::norm(contrib));
                continue;
            }
            out.add(occ_set(occ_set(key, mode_h, ho), mode_v, vo), contrib);
        }
    }
    return out;
}

/// Probability of a click assignment (one threshold bit per mode) on a state.
inline double detector_povm_prob(const FockState& state, const std::vector<int>& clicks,
                                 const DetectorModel& det) {
    if (int(clicks.size()) != state.n_modes())
        throw ValidationError("detector_povm_prob: one click bit per mode required");
    double acc = 0.0;
    for (const auto& [key, amp] : state.amps()) {
        double w = std::norm(amp);
        for (int m = 0; m < state.n_modes(); ++m) w *= click_prob(clicks[m], occ_get(key, m), det);
        acc += w;
    }
    return acc;
}

struct OracleResult {
    QSet q;
    double evidence = 0.0; // Σ_patterns G(pattern) · p_raw(pattern)
    std::map<InnerPattern, double> p_raw; // unnormalized ideal-BM weights
    double truncation_loss2 = 0.0;        // squared norm dropped in the pipeline
};

namespace oracle_detail {

// One polarization sector of the full relay: per station four spatial modes
// (a, b, c, d) at indices 4p.., two squeezers pairing a~b and c~d, an
// elementary beam splitter on (b_p, c_p), and secondary beam splitters on
// (a_n, d_{n+1}). Both polarization sectors are structurally identical, so a
// single sector run serves H (read against detector counts i, l) and V
// (read against j, k).
//
// The per-mode cap is min(2 n_max, tuple_sum_max), not n_max: the undetected
// end modes legitimately hold more than n_max photons (up to the tuple-sum
// bound) whenever several source pairs route to the same side, and clipping
// them at n_max would bias every comparison against the closed form.
// Components whose detected modes exceed n_max can never match an admissible
// pattern, so dropping anything past the cap is harmless.
struct SectorRun {
    // Key: inner-mode occupations packed per slot as (port1, port2) nibbles;
    // value: amplitudes over (end d_1, end a_N) occupation pairs.
    std::unordered_map<std::uint64_t, std::map<std::pair<int, int>, Complex>> buckets;
    double truncation_loss2 = 0.0;
};

inline SectorRun run_sector(double chi, int n_stations, int cap, std::size_t entry_budget) {
    const int N = n_stations;
    const int n_modes = 4 * N;
    if (n_modes > 16) throw OracleCapacityError("oracle sector limited to 16 modes (N <= 4)");

    FockState state(n_modes, cap);
    state.add(0, Complex{1.0, 0.0});

    const double th = std::tanh(chi);
    const double ic = 1.0 / std::cosh(chi);
    std::vector<double> mag(cap + 1);
    mag[0] = ic;
    for (int n = 1; n <= cap; ++n) mag[n] = mag[n - 1] * th;

    // Product of the per-station sources (modes are disjoint across stations).
    for (int p = 0; p < N; ++p) {
        FockState next(n_modes, cap);
        next.record_loss2(state.truncation_loss2());
        for (const auto& [key, amp] : state.amps())
            for (int n1 = 0; n1 <= cap; ++n1)
                for (int n3 = 0; n3 <= cap; ++n3) {
                    OccKey k = key;
                    k = occ_set(k, 4 * p + 0, n1); // a_p
                    k = occ_set(k, 4 * p + 1, n1); // b_p
                    k = occ_set(k, 4 * p + 2, n3); // c_p
                    k = occ_set(k, 4 * p + 3, n3); // d_p
                    next.add(k, amp * unit_phase(n1 + n3) * (mag[n1] * mag[n3]));
                }
        state = std::move(next);
        if (state.amps().size() > entry_budget)
            throw OracleCapacityError("oracle state exceeded the entry budget");
    }

    // Elementary beam splitters (b_p, c_p), then secondary ones (a_n, d_{n+1}).
    for (int p = 0; p < N; ++p) {
        state = apply_beamsplitter(state, 4 * p + 1, 4 * p + 2);
        if (state.amps().size() > entry_budget)
            throw OracleCapacityError("oracle state exceeded the entry budget");
    }
    for (int n = 0; n + 1 < N; ++n) {
        state = apply_beamsplitter(state, 4 * n + 0, 4 * (n + 1) + 3);
        if (state.amps().size() > entry_budget)
            throw OracleCapacityError("oracle state exceeded the entry budget");
    }

    // Bucket amplitudes by the inner-mode occupations. Slot order matches the
    // pattern layout: elementary slots 0..N-1 read (b_p, c_p); secondary slots
    // N..2N-2 read (a_n, d_{n+1}). End modes are d_0 and a_{N-1}.
    SectorRun run;
    run.truncation_loss2 = state.truncation_loss2();
    for (const auto& [key, amp] : state.amps()) {
        std::uint64_t inner = 0;
        int nibble = 0;
        auto push = [&](int mode) {
            inner |= std::uint64_t(occ_get(key, mode)) << (4 * nibble);
            ++nibble;
        };
        for (int p = 0; p < N; ++p) {
            push(4 * p + 1);
            push(4 * p + 2);
        }
        for (int n = 0; n + 1 < N; ++n) {
            push(4 * n + 0);
            push(4 * (n + 1) + 3);
        }
        const int end_d = occ_get(key, 3);             // d of station 0
        const int end_a = occ_get(key, 4 * (N - 1));   // a of station N-1
        run.buckets[inner][{end_d, end_a}] += amp;
    }
    return run;
}

inline std::uint64_t pattern_key_h(const InnerPattern& pat) {
    std::uint64_t key = 0;
    int nibble = 0;
    for (const auto& t : pat.tuples) {
        key |= std::uint64_t(t.i) << (4 * nibble++);
        key |= std::uint64_t(t.l) << (4 * nibble++);
    }
    return key;
}

inline std::uint64_t pattern_key_v(const InnerPattern& pat) {
    std::uint64_t key = 0;
    int nibble = 0;
    for (const auto& t : pat.tuples) {
        key |= std::uint64_t(t.j) << (4 * nibble++);
        key |= std::uint64_t(t.k) << (4 * nibble++);
    }
    return key;
}

} // namespace oracle_detail

/// End-mode state heralded by one inner pattern, as a 4-mode FockState over
/// (d_H, d_V, a_H, a_V); amplitudes carry the full source normalization.
inline FockState oracle_end_state(const RelayParams& params, const InnerPattern& pattern) {
    validate_params(params);
    if (params.n_stations > 2)
        throw OracleCapacityError("oracle runs are limited to n_stations <= 2");
    const int cap = std::min(2 * params.n_max, params.tuple_sum_max);
    const auto run = oracle_detail::run_sector(params.chi, params.n_stations, cap, 2'000'000);

    // A rotator can steer a whole side's photons into one mode, so the
    // end-state cap is the per-side total, not the per-mode pipeline cap.
    FockState end(4, params.tuple_sum_max);
    const auto hit = run.buckets.find(oracle_detail::pattern_key_h(pattern));
    const auto vit = run.buckets.find(oracle_detail::pattern_key_v(pattern));
    if (hit == run.buckets.end() || vit == run.buckets.end()) return end;
    for (const auto& [hk, ha] : hit->second)
        for (const auto& [vk, va] : vit->second) {
            OccKey key = 0;
            key = occ_set(key, 0, hk.first);  // d_H
            key = occ_set(key, 1, vk.first);  // d_V
            key = occ_set(key, 2, hk.second); // a_H
            key = occ_set(key, 3, vk.second); // a_V
            end.add(key, ha * va);
        }
    return end;
}

/// Full reference computation of the four outer-class coincidence
/// probabilities, conditioned on the given inner click tuples, restricted to
/// the same admissible-pattern support as the closed-form path.
inline OracleResult oracle_relay(const RelayParams& params, const RotatorAngles& angles,
                                 const std::vector<ClickTuple>& inner_clicks) {
    validate_params(params);
    if (params.n_stations > 2)
        throw OracleCapacityError("oracle runs are limited to n_stations <= 2");
    if (int(inner_clicks.size()) != params.bell_measurements())
        throw ValidationError("oracle_relay: need one click tuple per Bell measurement");

    const int cap = std::min(2 * params.n_max, params.tuple_sum_max);
    const auto run = oracle_detail::run_sector(params.chi, params.n_stations, cap, 2'000'000);
    const DetectorModel det = detector_from_params(params);
    const TupleCatalog catalog(params);
    const int slots = params.bell_measurements();
    const std::uint64_t total = catalog.pattern_count(params.n_stations);

    OracleResult result;
    result.truncation_loss2 = run.truncation_loss2;
    double num[4] = {0.0, 0.0, 0.0, 0.0};
    const ClickTuple classes[4] = {{1, 0, 1, 0}, {0, 1, 0, 1}, {0, 1, 1, 0}, {1, 0, 0, 1}};

    InnerPattern pattern;
    pattern.tuples.resize(slots);
    std::vector<std::uint32_t> digits(slots, 0);
    for (std::uint64_t idx = 0; idx < total; ++idx) {
        catalog.decode(idx, slots, digits.data());
        for (int u = 0; u < slots; ++u) pattern.tuples[u] = catalog[digits[u]];

        const auto hit = run.buckets.find(oracle_detail::pattern_key_h(pattern));
        const auto vit = run.buckets.find(oracle_detail::pattern_key_v(pattern));
        if (hit == run.buckets.end() || vit == run.buckets.end()) continue;

        double norm_h = 0.0, norm_v = 0.0;
        for (const auto& [k, a] : hit->second) norm_h += std::norm(a);
        for (const auto& [k, a] : vit->second) norm_v += std::norm(a);
        const double p_raw = norm_h * norm_v;
        if (p_raw == 0.0) continue;

        double g = 1.0;
        for (int u = 0; u < slots; ++u)
            g *= tuple_click_prob(inner_clicks[u], pattern.tuples[u], det);

        result.evidence += g * p_raw;
        result.p_raw.emplace(pattern, p_raw);

        // Assemble, rotate, and measure the heralded end state. The cap is
        // the per-side photon total: a rotator can steer every photon of one
        // side into a single mode.
        FockState end(4, params.tuple_sum_max);
        for (const auto& [hk, ha] : hit->second)
            for (const auto& [vk, va] : vit->second) {
                OccKey key = 0;
                key = occ_set(key, 0, hk.first);
                key = occ_set(key, 1, vk.first);
                key = occ_set(key, 2, hk.second);
                key = occ_set(key, 3, vk.second);
                end.add(key, ha * va);
            }
        FockState rotated = apply_rotator(end, 0, 1, angles.delta_tilde);
        rotated = apply_rotator(rotated, 2, 3, angles.alpha_tilde);
        for (int c = 0; c < 4; ++c) {
            // Outer class order (q', r', s', t') reads (a_H, a_V, d_V, d_H).
            const std::vector<int> clicks = {int(classes[c].t), int(classes[c].s),
                                             int(classes[c].q), int(classes[c].r)};
            num[c] += g * detector_povm_prob(rotated, clicks, det);
        }
    }

    if (result.evidence <= 0.0)
        throw DegenerateEvidenceError("oracle_relay: click pattern unreachable under truncation");
    result.q.q1010 = num[0] / result.evidence;
    result.q.q0101 = num[1] / result.evidence;
    result.q.q0110 = num[2] / result.evidence;
    result.q.q1001 = num[3] / result.evidence;
    return result;
}

/// Reference Q values with the representative all-{1,0,1,0} heralding.
inline QSet oracle_coincidence(const RelayParams& params, const RotatorAngles& angles) {
    const std::vector<ClickTuple> clicks(params.bell_measurements(), kSingletClicksHV);
    return oracle_relay(params, angles, clicks).q;
}

/// Reference visibility at equal rotator angles.
inline VisibilityReport oracle_visibility(const RelayParams& params, double alpha_tilde) {
    const QSet q = oracle_coincidence(params, RotatorAngles{alpha_tilde, alpha_tilde});
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

} // namespace qrelay

#endif // QRELAY_ORACLE_HPP
