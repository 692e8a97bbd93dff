#ifndef QRELAY_COMBINATORICS_HPP
#define QRELAY_COMBINATORICS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "qrelay/model.hpp"

namespace qrelay {

// Exact integer combinatorics. 20! and C(24,12) both fit in int64, which
// covers everything reachable under the validation caps in model.hpp.
inline constexpr int kFactTableMax = 20;
inline constexpr int kBinomTableMax = 24;

inline std::int64_t factorial(int n) {
    static const auto table = [] {
        std::array<std::int64_t, kFactTableMax + 1> t{};
        t[0] = 1;
        for (int i = 1; i <= kFactTableMax; ++i) t[i] = t[i - 1] * i;
        return t;
    }();
    return table[n];
}

/// C(n,k) with the usual convention that out-of-range k contributes 0.
inline std::int64_t binomial(int n, int k) {
    static const auto table = [] {
        std::array<std::array<std::int64_t, kBinomTableMax + 1>, kBinomTableMax + 1> t{};
        for (int i = 0; i <= kBinomTableMax; ++i) {
            t[i][0] = 1;
            for (int j = 1; j <= i; ++j)
                t[i][j] = t[i - 1][j - 1] + (j <= i - 1 ? t[i - 1][j] : 0);
        }
        return t;
    }();
    if (k < 0 || k > n || n < 0) return 0;
    return table[n][k];
}

/// Secondary-swap overlap factor
///   Omega(mu+lambda, i, l) = sum_gamma C(mu+lambda, gamma)
///                            * C(i+l-mu-lambda, i-gamma) * (-1)^(mu+lambda-gamma).
/// Depends on mu and lambda only through their sum s; |Omega| <= 2^(i+l).
inline std::int64_t omega(int mu_plus_lambda, int i, int l) {
    const int s = mu_plus_lambda;
    std::int64_t acc = 0;
    for (int gamma = 0; gamma <= s; ++gamma) {
        const std::int64_t term = binomial(s, gamma) * binomial(i + l - s, i - gamma);
        acc += ((s - gamma) % 2 == 0) ? term : -term;
    }
    return acc;
}

/// Elementary-station split sum: collapsing the (mu, lambda) double sum of
/// the end-state expression at fixed sigma = mu + lambda gives
///   split_sum(i, l, sigma) = sum_mu (-1)^mu C(i, mu) C(l, sigma-mu).
/// Zero when sigma is outside [0, i+l].
inline std::int64_t split_sum(int i, int l, int sigma) {
    std::int64_t acc = 0;
    const int lo = std::max(0, sigma - l);
    const int hi = std::min(i, sigma);
    for (int mu = lo; mu <= hi; ++mu) {
        const std::int64_t term = binomial(i, mu) * binomial(l, sigma - mu);
        acc += (mu % 2 == 0) ? term : -term;
    }
    return acc;
}

/// Per-run lookup tables sized from one RelayParams: chi powers, half-integer
/// powers of 2, square-root factorials, and the Omega / split-sum memos.
/// Immutable after construction; shared read-only across worker threads.
class LookupTables {
  public:
    explicit LookupTables(const RelayParams& p) {
        const int smax = std::min(2 * p.n_max, p.tuple_sum_max); // max chain sum
        n_max_ = p.n_max;
        smax_ = smax;

        const int max_tanh = p.n_stations * p.tuple_sum_max + 1;
        tanh_pow_.resize(max_tanh + 1);
        invcosh_pow_.resize(max_tanh + 1);
        const double th = std::tanh(p.chi);
        const double ic = 1.0 / std::cosh(p.chi);
        tanh_pow_[0] = invcosh_pow_[0] = 1.0;
        for (int m = 1; m <= max_tanh; ++m) {
            tanh_pow_[m] = tanh_pow_[m - 1] * th;
            invcosh_pow_[m] = invcosh_pow_[m - 1] * ic;
        }

        pow2_half_.resize(65);
        inv_pow2_half_.resize(65);
        for (int m = 0; m <= 64; ++m) {
            pow2_half_[m] = std::pow(2.0, 0.5 * m);
            inv_pow2_half_[m] = 1.0 / pow2_half_[m];
        }

        sqrt_fact_.resize(kFactTableMax + 1);
        inv_sqrt_fact_.resize(kFactTableMax + 1);
        for (int n = 0; n <= kFactTableMax; ++n) {
            sqrt_fact_[n] = std::sqrt(double(factorial(n)));
            inv_sqrt_fact_[n] = 1.0 / sqrt_fact_[n];
        }

        omega_memo_.assign((smax + 1) * (n_max_ + 1) * (n_max_ + 1), 0);
        for (int s = 0; s <= smax; ++s)
            for (int i = 0; i <= n_max_; ++i)
                for (int l = 0; l <= n_max_; ++l)
                    omega_memo_[omega_idx(s, i, l)] = omega(s, i, l);

        split_memo_.assign((n_max_ + 1) * (n_max_ + 1) * (2 * n_max_ + 1), 0);
        for (int i = 0; i <= n_max_; ++i)
            for (int l = 0; l <= n_max_; ++l)
                for (int sg = 0; sg <= i + l; ++sg)
                    split_memo_[split_idx(i, l, sg)] = split_sum(i, l, sg);
    }

    double tanh_pow(int m) const { return tanh_pow_[m]; }
    double invcosh_pow(int m) const { return invcosh_pow_[m]; }
    double pow2_half(int m) const { return pow2_half_[m]; }
    double inv_pow2_half(int m) const { return inv_pow2_half_[m]; }
    double sqrt_fact(int n) const { return sqrt_fact_[n]; }
    double inv_sqrt_fact(int n) const { return inv_sqrt_fact_[n]; }

    std::int64_t omega_at(int s, int i, int l) const {
        if (s < 0 || s > smax_) return 0;
        return omega_memo_[omega_idx(s, i, l)];
    }
    std::int64_t split_at(int i, int l, int sigma) const {
        if (sigma < 0 || sigma > i + l) return 0;
        return split_memo_[split_idx(i, l, sigma)];
    }

    int n_max() const { return n_max_; }
    int chain_sum_max() const { return smax_; }

  private:
    std::size_t omega_idx(int s, int i, int l) const {
        return (std::size_t(s) * (n_max_ + 1) + i) * (n_max_ + 1) + l;
    }
    std::size_t split_idx(int i, int l, int sigma) const {
        return (std::size_t(i) * (n_max_ + 1) + l) * (2 * n_max_ + 1) + sigma;
    }

    int n_max_ = 0, smax_ = 0;
    std::vector<double> tanh_pow_, invcosh_pow_, pow2_half_, inv_pow2_half_;
    std::vector<double> sqrt_fact_, inv_sqrt_fact_;
    std::vector<std::int64_t> omega_memo_, split_memo_;
};

/// All CountTuples admissible under (n_max, tuple_sum_min, tuple_sum_max),
/// sorted lexicographically by (i,j,k,l). Patterns are formed as the
/// (2N-1)-fold product of this list, most-significant tuple first, so the
/// pattern stream is itself lexicographic.
class TupleCatalog {
  public:
    explicit TupleCatalog(const RelayParams& p) {
        for (int i = 0; i <= p.n_max; ++i)
            for (int j = 0; j <= p.n_max; ++j)
                for (int k = 0; k <= p.n_max; ++k)
                    for (int l = 0; l <= p.n_max; ++l) {
                        const int s = i + j + k + l;
                        if (s >= p.tuple_sum_min && s <= p.tuple_sum_max)
                            tuples_.push_back(CountTuple{std::uint8_t(i), std::uint8_t(j),
                                                         std::uint8_t(k), std::uint8_t(l)});
                    }
    }

    std::size_t size() const { return tuples_.size(); }
    const CountTuple& operator[](std::size_t idx) const { return tuples_[idx]; }
    const std::vector<CountTuple>& tuples() const { return tuples_; }

    /// Number of patterns for a relay with the given station count; throws
    /// when the index space no longer fits addressable 64-bit arithmetic.
    std::uint64_t pattern_count(int n_stations) const {
        const int slots = 2 * n_stations - 1;
        std::uint64_t total = 1;
        for (int u = 0; u < slots; ++u) {
            if (total > (std::uint64_t(1) << 62) / std::max<std::size_t>(size(), 1))
                throw ValidationError("pattern space exceeds 2^62; reduce n_max, "
                                      "tuple_sum_max, or n_stations");
            total *= size();
        }
        return total;
    }

    /// Decodes a flat lexicographic pattern index into per-slot tuple indices
    /// (slot 0 is the most significant digit).
    void decode(std::uint64_t index, int slots, std::uint32_t* out) const {
        for (int u = slots - 1; u >= 0; --u) {
            out[u] = std::uint32_t(index % size());
            index /= size();
        }
    }

  private:
    std::vector<CountTuple> tuples_;
};

/// Streams every InnerPattern whose tuples all satisfy the truncation bounds,
/// in deterministic lexicographic order.
inline void enumerate_inner_patterns(const RelayParams& p,
                                     const std::function<void(const InnerPattern&)>& visit) {
    const TupleCatalog catalog(p);
    const int slots = p.bell_measurements();
    const std::uint64_t total = catalog.pattern_count(p.n_stations);
    InnerPattern pattern;
    pattern.tuples.resize(slots);
    std::vector<std::uint32_t> digits(slots, 0);
    for (std::uint64_t idx = 0; idx < total; ++idx) {
        catalog.decode(idx, slots, digits.data());
        for (int u = 0; u < slots; ++u) pattern.tuples[u] = catalog[digits[u]];
        visit(pattern);
    }
}

inline std::vector<InnerPattern> enumerate_inner_patterns(const RelayParams& p) {
    std::vector<InnerPattern> out;
    enumerate_inner_patterns(p, [&](const InnerPattern& pat) { out.push_back(pat); });
    return out;
}

/// One assignment of the internal summation indices: per elementary station p,
/// (mu_p, nu_p, kappa_p, lambda_p) with mu_p <= i_p, nu_p <= j_p,
/// kappa_p <= k_p, lambda_p <= l_p.
struct IndexAssignment {
    struct StationIndices {
        std::uint8_t mu = 0, nu = 0, kappa = 0, lambda = 0;
        friend bool operator==(const StationIndices&, const StationIndices&) = default;
    };
    std::vector<StationIndices> stations;

    friend bool operator==(const IndexAssignment&, const IndexAssignment&) = default;
};

/// Yields every index assignment consistent with both Kronecker deltas of the
/// end-state sum. The deltas are solved, not filtered: for each secondary
/// connection n the H-sector constraint
///   i_{N+n} + l_{N+n} = mu_n + lambda_n + i_{n+1} + l_{n+1} - mu_{n+1} - lambda_{n+1}
/// fixes sigma_n = mu_n + lambda_n once sigma_{n+1} is chosen, and likewise
/// tau_n = nu_n + kappa_n in the V sector. Only station N's four indices are
/// free; earlier stations contribute only the admissible (mu, lambda) and
/// (nu, kappa) splits of their forced sums.
inline void enumerate_internal_indices(const InnerPattern& pattern,
                                       const std::function<void(const IndexAssignment&)>& visit) {
    const int slots = int(pattern.tuples.size());
    const int n_stations = (slots + 1) / 2;
    const int N = n_stations;
    IndexAssignment assign;
    assign.stations.resize(N);

    const CountTuple& last = pattern.tuples[N - 1];
    std::vector<int> sigma(N, 0), tau(N, 0);

    // Recursive split enumeration over stations N-1 .. 1 (0-based: N-2 .. 0).
    std::function<void(int)> emit_splits = [&](int st) {
        if (st < 0) {
            visit(assign);
            return;
        }
        const CountTuple& t = pattern.tuples[st];
        const int sg = sigma[st], tu = tau[st];
        const int mu_lo = std::max(0, sg - int(t.l)), mu_hi = std::min(int(t.i), sg);
        const int nu_lo = std::max(0, tu - int(t.k)), nu_hi = std::min(int(t.j), tu);
        for (int mu = mu_lo; mu <= mu_hi; ++mu) {
            for (int nu = nu_lo; nu <= nu_hi; ++nu) {
                assign.stations[st] = {std::uint8_t(mu), std::uint8_t(nu),
                                       std::uint8_t(tu - nu), std::uint8_t(sg - mu)};
                emit_splits(st - 1);
            }
        }
    };

    for (int mu = 0; mu <= int(last.i); ++mu)
        for (int nu = 0; nu <= int(last.j); ++nu)
            for (int kap = 0; kap <= int(last.k); ++kap)
                for (int lam = 0; lam <= int(last.l); ++lam) {
                    assign.stations[N - 1] = {std::uint8_t(mu), std::uint8_t(nu),
                                              std::uint8_t(kap), std::uint8_t(lam)};
                    sigma[N - 1] = mu + lam;
                    tau[N - 1] = nu + kap;
                    bool feasible = true;
                    for (int n = N - 2; n >= 0; --n) {
                        const CountTuple& sec = pattern.tuples[N + n];
                        const CountTuple& next = pattern.tuples[n + 1];
                        sigma[n] = sigma[n + 1] + sec.hsum() - next.hsum();
                        tau[n] = tau[n + 1] + sec.vsum() - next.vsum();
                        const CountTuple& st = pattern.tuples[n];
                        if (sigma[n] < 0 || sigma[n] > st.hsum() || tau[n] < 0 ||
                            tau[n] > st.vsum()) {
                            feasible = false;
                            break;
                        }
                    }
                    if (feasible) emit_splits(N - 2);
                }
}

inline std::vector<IndexAssignment> enumerate_internal_indices(const InnerPattern& pattern) {
    std::vector<IndexAssignment> out;
    enumerate_internal_indices(pattern, [&](const IndexAssignment& a) { out.push_back(a); });
    return out;
}

} // namespace qrelay

#endif // QRELAY_COMBINATORICS_HPP
