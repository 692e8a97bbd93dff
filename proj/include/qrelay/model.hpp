#ifndef QRELAY_MODEL_HPP
#define QRELAY_MODEL_HPP

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qrelay {

/// Thrown when a parameter or derived configuration violates its documented
/// range; the message names the offending field.
class ValidationError : public std::invalid_argument {
  public:
    explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Thrown when a Bayesian denominator underflows to zero, i.e. the requested
/// click pattern is unreachable under the configured truncation.
class DegenerateEvidenceError : public std::runtime_error {
  public:
    explicit DegenerateEvidenceError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Physical and truncation parameters for one relay configuration.
///
/// A relay of n_stations stations performs 2N-1 Bell measurements; each
/// four-tuple of detectors is restricted to at most n_max photons per mode
/// and a total photon count within [tuple_sum_min, tuple_sum_max].
struct RelayParams {
    int n_stations = 1;
    double chi = 0.1;              // source pair parameter, pair rate ~ chi^2
    double eta0 = 0.70;            // intrinsic detector efficiency
    double darkcount = 1e-5;       // dark-count probability per detector gate
    double alpha_db_per_km = 0.25; // fibre loss rate
    double alpha0_db = 4.0;        // constant loss per source-to-detector leg
    double distance_km = 0.0;      // sender-to-receiver separation
    int n_max = 3;                 // per-mode photon truncation
    int tuple_sum_min = 2;         // min photons per detector four-tuple
    int tuple_sum_max = 4;         // max photons per detector four-tuple

    int bell_measurements() const { return 2 * n_stations - 1; }
};

// Upper engineering caps; they keep every factorial/binomial in the lookup
// tables exactly representable in 64-bit integers (20! < 2^63).
inline constexpr int kMaxStations = 8;
inline constexpr int kMaxNmax = 5;
inline constexpr int kMaxTupleSum = 20;

/// Checks every RelayParams invariant; returns the params unchanged on
/// success and throws ValidationError naming the bad field otherwise.
inline RelayParams validate_params(const RelayParams& p) {
    if (p.n_stations < 1 || p.n_stations > kMaxStations)
        throw ValidationError("n_stations must be in [1, " + std::to_string(kMaxStations) +
                              "], got " + std::to_string(p.n_stations));
    if (!(p.chi >= 0.0) || p.chi >= 1e3)
        throw ValidationError("chi must be finite and >= 0, got " + std::to_string(p.chi));
    if (!(p.eta0 >= 0.0 && p.eta0 <= 1.0))
        throw ValidationError("eta0 must lie in [0, 1], got " + std::to_string(p.eta0));
    if (!(p.darkcount >= 0.0 && p.darkcount < 1.0))
        throw ValidationError("darkcount must lie in [0, 1), got " + std::to_string(p.darkcount));
    if (!(p.alpha_db_per_km >= 0.0))
        throw ValidationError("alpha_db_per_km must be >= 0, got " +
                              std::to_string(p.alpha_db_per_km));
    if (!(p.alpha0_db >= 0.0))
        throw ValidationError("alpha0_db must be >= 0, got " + std::to_string(p.alpha0_db));
    if (!(p.distance_km >= 0.0))
        throw ValidationError("distance_km must be >= 0, got " + std::to_string(p.distance_km));
    if (p.n_max < 1 || p.n_max > kMaxNmax)
        throw ValidationError("n_max must be in [1, " + std::to_string(kMaxNmax) + "], got " +
                              std::to_string(p.n_max));
    if (p.tuple_sum_min < 0)
        throw ValidationError("tuple_sum_min must be >= 0, got " +
                              std::to_string(p.tuple_sum_min));
    if (p.tuple_sum_max < p.tuple_sum_min)
        throw ValidationError("tuple_sum_max must be >= tuple_sum_min, got max " +
                              std::to_string(p.tuple_sum_max) + " < min " +
                              std::to_string(p.tuple_sum_min));
    if (p.tuple_sum_max > 4 * p.n_max)
        throw ValidationError("tuple_sum_max must be <= 4*n_max, got " +
                              std::to_string(p.tuple_sum_max) + " > " +
                              std::to_string(4 * p.n_max));
    if (p.tuple_sum_max > kMaxTupleSum)
        throw ValidationError("tuple_sum_max must be <= " + std::to_string(kMaxTupleSum) +
                              ", got " + std::to_string(p.tuple_sum_max));
    return p;
}

/// Ideal photon counts {i,j,k,l} at one detector four-tuple.
///
/// Elementary station p: i = b_{p,H}, j = b_{p,V}, k = c_{p,V}, l = c_{p,H}
/// after the station's beam splitter. Secondary connection n: same ordering
/// with the left port (a_n) playing the role of b and the right port
/// (d_{n+1}) the role of c.
struct CountTuple {
    std::uint8_t i = 0, j = 0, k = 0, l = 0;

    int sum() const { return int(i) + int(j) + int(k) + int(l); }
    int hsum() const { return int(i) + int(l); } // photons in the H sector
    int vsum() const { return int(j) + int(k); } // photons in the V sector

    friend bool operator==(const CountTuple&, const CountTuple&) = default;
    friend auto operator<=>(const CountTuple&, const CountTuple&) = default;
};

/// Observed threshold-detector bits {q,r,s,t} at one four-tuple, same mode
/// ordering as CountTuple. {1,0,1,0} and {0,1,0,1} herald the singlet.
struct ClickTuple {
    std::uint8_t q = 0, r = 0, s = 0, t = 0;

    friend bool operator==(const ClickTuple&, const ClickTuple&) = default;
};

inline constexpr ClickTuple kSingletClicksHV{1, 0, 1, 0};
inline constexpr ClickTuple kSingletClicksVH{0, 1, 0, 1};

/// Counts at all 2N-1 four-tuples: index u < N are elementary stations
/// (u = station index), u >= N are secondary connections (u-N = link index).
struct InnerPattern {
    std::vector<CountTuple> tuples;

    friend bool operator==(const InnerPattern&, const InnerPattern&) = default;
    friend auto operator<=>(const InnerPattern&, const InnerPattern&) = default;
};

/// Photon counts on the outer (end) modes, ordered to match the outer
/// detector four-tuple: i' = a_{N,H}, j' = a_{N,V}, k' = d_{1,V}, l' = d_{1,H}.
struct OuterCounts {
    int ip = 0, jp = 0, kp = 0, lp = 0;

    friend bool operator==(const OuterCounts&, const OuterCounts&) = default;
    friend auto operator<=>(const OuterCounts&, const OuterCounts&) = default;
};

/// Bloch-sphere rotation angles of the two end-mode polarization rotators:
/// alpha_tilde acts on spatial mode a_N, delta_tilde on d_1.
struct RotatorAngles {
    double alpha_tilde = 0.0;
    double delta_tilde = 0.0;
};

/// Conditional coincidence probabilities of the four outer click classes,
/// each a ClickTuple (q',r',s',t') on modes (a_NH, a_NV, d_1V, d_1H).
struct QSet {
    double q1010 = 0.0;
    double q0101 = 0.0;
    double q0110 = 0.0;
    double q1001 = 0.0;
};

/// Coincidence-probability summary at delta~ = alpha~.
struct VisibilityReport {
    double q1010 = 0, q0101 = 0, q0110 = 0, q1001 = 0;
    double v_max = 0;     // Q1010 + Q0101
    double v_min = 0;     // Q0110 + Q1001
    double visibility = 0; // (v_max - v_min) / (v_max + v_min)
    RelayParams params;
    RotatorAngles angles;
};

} // namespace qrelay

#endif // QRELAY_MODEL_HPP
