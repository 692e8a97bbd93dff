#ifndef QRELAY_AMPLITUDES_HPP
#define QRELAY_AMPLITUDES_HPP

// Closed-form evaluation of the heralded end-mode state and the rotated
// transition amplitudes.
//
// The nested sums over the per-station indices (mu, nu, kappa, lambda) are
// never executed blindly: every photon-number constraint is solved first.
// Writing sigma_p = mu_p + lambda_p and tau_p = nu_p + kappa_p, the H-sector
// constraint at secondary link n forces
//     sigma_n = sigma_{n+1} + (i_{N+n} + l_{N+n}) - (i_{n+1} + l_{n+1}),
// so the whole sigma chain is an affine function of sigma_N alone, and the
// (mu, lambda) split at fixed sigma collapses into the alternating
// Vandermonde sum split_sum(i, l, sigma). The V sector is identical with
// (j, k, tau). What remains is a single small loop over (sigma_N, tau_N),
// which doubles as the loop over end-mode occupations.

#include <cmath>
#include <complex>
#include <map>
#include <vector>

#include "qrelay/combinatorics.hpp"
#include "qrelay/model.hpp"

namespace qrelay {

/// Occupation quadruple of the end modes in (d_H, d_V, a_H, a_V) order.
struct EndKey {
    int n_dH = 0, n_dV = 0, n_aH = 0, n_aV = 0;

    friend bool operator==(const EndKey&, const EndKey&) = default;
    friend auto operator<=>(const EndKey&, const EndKey&) = default;
};

/// chi- and sqrt2-dependence of the common prefactor, kept in factored form:
/// the full prefactor multiplies tanh^tanh_exponent(chi) * 2^(-sqrt2_exponent/2).
struct PrefactorExponents {
    int tanh_exponent = 0;  // total photons over the elementary stations
    int sqrt2_exponent = 0; // total photons over all 2N-1 Bell measurements
};

struct EndStateTerms {
    std::map<EndKey, std::complex<double>> terms;
    PrefactorExponents prefactor_exponents;
};

/// Per-pattern chain solver shared by the closed-form operations and the
/// coincidence pass. Collapses both Kronecker-delta chains and exposes the
/// surviving one-dimensional families of end-mode amplitudes.
class ChainEvaluator {
  public:
    ChainEvaluator(const InnerPattern& pattern, const LookupTables& tables) {
        const int slots = int(pattern.tuples.size());
        n_ = (slots + 1) / 2;
        const int N = n_;

        // Affine chain offsets: sigma_p(A) = A + off_h_[p], p in 0..N-1 (A = sigma_{N-1}).
        off_h_.assign(N, 0);
        off_v_.assign(N, 0);
        for (int p = N - 2; p >= 0; --p) {
            const CountTuple& sec = pattern.tuples[N + p];
            const CountTuple& next = pattern.tuples[p + 1];
            off_h_[p] = off_h_[p + 1] + sec.hsum() - next.hsum();
            off_v_[p] = off_v_[p + 1] + sec.vsum() - next.vsum();
        }

        a_lo_ = 0;
        a_hi_ = pattern.tuples[N - 1].hsum();
        b_lo_ = 0;
        b_hi_ = pattern.tuples[N - 1].vsum();
        for (int p = 0; p < N - 1; ++p) {
            a_lo_ = std::max(a_lo_, -off_h_[p]);
            a_hi_ = std::min(a_hi_, pattern.tuples[p].hsum() - off_h_[p]);
            b_lo_ = std::max(b_lo_, -off_v_[p]);
            b_hi_ = std::min(b_hi_, pattern.tuples[p].vsum() - off_v_[p]);
        }

        // d-side occupations: C = i_1 + l_1 - sigma_1 = c_base_h_ - A.
        c_base_h_ = pattern.tuples[0].hsum() - off_h_[0];
        c_base_v_ = pattern.tuples[0].vsum() - off_v_[0];

        // Common scalar prefactor (cosh factors dropped; all uses are ratios).
        prefactor_ = 1.0;
        exponents_.tanh_exponent = 0;
        exponents_.sqrt2_exponent = 0;
        for (int u = 0; u < slots; ++u) {
            const CountTuple& t = pattern.tuples[u];
            const int s = t.sum();
            exponents_.sqrt2_exponent += s;
            const double fact_part = tables.sqrt_fact(t.i) * tables.sqrt_fact(t.j) *
                                     tables.sqrt_fact(t.k) * tables.sqrt_fact(t.l);
            if (u < N) {
                exponents_.tanh_exponent += s;
                prefactor_ *= tables.tanh_pow(s) * tables.inv_pow2_half(s) / fact_part;
            } else {
                prefactor_ *= tables.inv_pow2_half(s) * fact_part;
            }
        }

        // Sector factors over the surviving range of A (and B).
        if (feasible()) {
            f_h_.assign(a_hi_ - a_lo_ + 1, 0.0);
            for (int a = a_lo_; a <= a_hi_; ++a) {
                double f = 1.0;
                for (int p = 0; p < N; ++p) {
                    const CountTuple& t = pattern.tuples[p];
                    const int sigma = a + off_h_[p];
                    f *= double(tables.split_at(t.i, t.l, sigma));
                    if (p < N - 1) {
                        const CountTuple& sec = pattern.tuples[N + p];
                        f *= double(tables.omega_at(sigma, sec.i, sec.l));
                    }
                }
                f_h_[a - a_lo_] = f;
            }
            f_v_.assign(b_hi_ - b_lo_ + 1, 0.0);
            for (int b = b_lo_; b <= b_hi_; ++b) {
                double f = 1.0;
                for (int p = 0; p < N; ++p) {
                    const CountTuple& t = pattern.tuples[p];
                    const int tau = b + off_v_[p];
                    f *= double(tables.split_at(t.j, t.k, tau));
                    if (p < N - 1) {
                        const CountTuple& sec = pattern.tuples[N + p];
                        f *= double(tables.omega_at(tau, sec.j, sec.k));
                    }
                }
                f_v_[b - b_lo_] = f;
            }
        }
    }

    bool feasible() const { return a_lo_ <= a_hi_ && b_lo_ <= b_hi_; }

    int a_lo() const { return a_lo_; }
    int a_hi() const { return a_hi_; }
    int b_lo() const { return b_lo_; }
    int b_hi() const { return b_hi_; }

    /// d-side occupations paired with a given a-side occupation.
    int c_of(int a) const { return c_base_h_ - a; }
    int d_of(int b) const { return c_base_v_ - b; }

    /// Unnormalized operator coefficient c(A, B) (real by construction).
    double coefficient(int a, int b) const {
        return prefactor_ * f_h_[a - a_lo_] * f_v_[b - b_lo_];
    }

    double prefactor() const { return prefactor_; }
    const PrefactorExponents& exponents() const { return exponents_; }

  private:
    int n_ = 1;
    std::vector<int> off_h_, off_v_;
    int a_lo_ = 0, a_hi_ = -1, b_lo_ = 0, b_hi_ = -1;
    int c_base_h_ = 0, c_base_v_ = 0;
    double prefactor_ = 1.0;
    PrefactorExponents exponents_;
    std::vector<double> f_h_, f_v_;
};

/// Heralded end-mode state for one inner pattern. Coefficients are the
/// normalized-ket amplitudes: the operator coefficient times sqrt(n!) for
/// each of the four end modes. No admissible index assignment yields an
/// empty map.
inline EndStateTerms end_state_terms(const InnerPattern& pattern, const RelayParams& params) {
    validate_params(params);
    const LookupTables tables(params);
    const ChainEvaluator chain(pattern, tables);
    EndStateTerms out;
    out.prefactor_exponents = chain.exponents();
    if (!chain.feasible()) return out;
    for (int a = chain.a_lo(); a <= chain.a_hi(); ++a)
        for (int b = chain.b_lo(); b <= chain.b_hi(); ++b) {
            const int c = chain.c_of(a);
            const int d = chain.d_of(b);
            const double coeff = chain.coefficient(a, b) * tables.sqrt_fact(a) *
                                 tables.sqrt_fact(b) * tables.sqrt_fact(c) * tables.sqrt_fact(d);
            if (coeff == 0.0) continue;
            out.terms[EndKey{c, d, a, b}] = std::complex<double>(coeff, 0.0);
        }
    return out;
}

/// Matrix element of a polarization rotator at Bloch angle theta between
/// normalized two-mode Fock states: <h_out, v_out| R(theta) |h_in, v_in>.
/// Zero unless photon number is conserved. Imaginary-unit powers are reduced
/// exactly; only real cos/sin powers enter the floating-point product.
inline std::complex<double> rot_elem(int h_out, int v_out, int h_in, int v_in, double theta) {
    if (h_out < 0 || v_out < 0 || h_in < 0 || v_in < 0) return {0.0, 0.0};
    if (h_out + v_out != h_in + v_in) return {0.0, 0.0};
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    double re = 0.0, im = 0.0;
    for (int y = std::max(0, h_out - h_in); y <= std::min(v_in, h_out); ++y) {
        // y photons of the incoming V group leave through the H port.
        const int flips = h_in - h_out + 2 * y;
        const double mag = double(binomial(h_in, h_out - y) * binomial(v_in, y)) *
                           std::pow(c, h_in + v_in - flips) * std::pow(s, flips);
        switch (flips % 4) {
        case 0: re += mag; break;
        case 1: im += mag; break;
        case 2: re -= mag; break;
        default: im -= mag; break;
        }
    }
    const double scale = std::sqrt(double(factorial(h_out) * factorial(v_out)) /
                                   double(factorial(h_in) * factorial(v_in)));
    return {re * scale, im * scale};
}

/// Amplitude for the heralded end state of `pattern` to produce outer counts
/// (i', j', k', l') = (a_H, a_V, d_V, d_H) after the two rotators. Exactly 0
/// when no index assignment satisfies the photon-number deltas.
inline std::complex<double> transition_amplitude(const InnerPattern& pattern,
                                                 const OuterCounts& outer,
                                                 const RotatorAngles& angles,
                                                 const RelayParams& params) {
    validate_params(params);
    if (outer.ip < 0 || outer.jp < 0 || outer.kp < 0 || outer.lp < 0) return {0.0, 0.0};
    const LookupTables tables(params);
    const ChainEvaluator chain(pattern, tables);
    if (!chain.feasible()) return {0.0, 0.0};
    const int g = outer.ip + outer.jp; // a-side photons, conserved by the rotator
    std::complex<double> acc{0.0, 0.0};
    for (int a = chain.a_lo(); a <= chain.a_hi(); ++a) {
        const int b = g - a;
        if (b < chain.b_lo() || b > chain.b_hi()) continue;
        const int c = chain.c_of(a);
        const int d = chain.d_of(b);
        if (c + d != outer.kp + outer.lp) continue;
        const double coeff = chain.coefficient(a, b) * tables.sqrt_fact(a) *
                             tables.sqrt_fact(b) * tables.sqrt_fact(c) * tables.sqrt_fact(d);
        if (coeff == 0.0) continue;
        acc += coeff * rot_elem(outer.ip, outer.jp, a, b, angles.alpha_tilde) *
               rot_elem(outer.lp, outer.kp, c, d, angles.delta_tilde);
    }
    return acc;
}

/// Unnormalized probability that an ideal Bell measurement reads `pattern`:
/// the squared norm of the heralded end state. Global normalization cancels
/// in every downstream ratio.
inline double ideal_bell_prob(const InnerPattern& pattern, const RelayParams& params) {
    validate_params(params);
    const LookupTables tables(params);
    const ChainEvaluator chain(pattern, tables);
    if (!chain.feasible()) return 0.0;
    double acc = 0.0;
    for (int a = chain.a_lo(); a <= chain.a_hi(); ++a)
        for (int b = chain.b_lo(); b <= chain.b_hi(); ++b) {
            const double coeff = chain.coefficient(a, b) * tables.sqrt_fact(a) *
                                 tables.sqrt_fact(b) * tables.sqrt_fact(chain.c_of(a)) *
                                 tables.sqrt_fact(chain.d_of(b));
            acc += coeff * coeff;
        }
    return acc;
}

} // namespace qrelay

#endif // QRELAY_AMPLITUDES_HPP
