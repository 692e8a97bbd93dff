#ifndef QRELAY_DETECTOR_HPP
#define QRELAY_DETECTOR_HPP

#include <cmath>
#include <vector>

#include "qrelay/model.hpp"

namespace qrelay {

/// Threshold detector with net efficiency eta and dark-count probability
/// darkcount. The detector reports only "no click" / "click".
struct DetectorModel {
    double eta = 1.0;
    double darkcount = 0.0;
};

/// Net efficiency folding fibre loss and constant loss into the intrinsic
/// efficiency: eta = eta0 * 10^(-alpha*l / (40 N)) * 10^(-alpha0 / 10).
/// The total separation l splits into 4N equal source-to-detector legs.
inline double net_efficiency(double eta0, double alpha_db_per_km, double alpha0_db,
                             double distance_km, int n_stations) {
    const double leg_db = alpha_db_per_km * distance_km / (4.0 * n_stations);
    return eta0 * std::pow(10.0, -leg_db / 10.0) * std::pow(10.0, -alpha0_db / 10.0);
}

inline DetectorModel detector_from_params(const RelayParams& p) {
    return DetectorModel{net_efficiency(p.eta0, p.alpha_db_per_km, p.alpha0_db,
                                        p.distance_km, p.n_stations),
                         p.darkcount};
}

/// p(0|i) = (1-p)[1 - eta(1-p)]^i, p(1|i) = 1 - p(0|i): the probability that
/// a threshold detector stays silent (fires) given i incident photons.
inline double click_prob(int q, int i, const DetectorModel& det) {
    const double survive = 1.0 - det.eta * (1.0 - det.darkcount);
    const double p0 = (1.0 - det.darkcount) * std::pow(survive, i);
    return q == 0 ? p0 : 1.0 - p0;
}

/// Product of the four independent per-detector probabilities for one
/// four-tuple of clicks given the true incident counts.
inline double tuple_click_prob(const ClickTuple& c, const CountTuple& n,
                               const DetectorModel& det) {
    return click_prob(c.q, n.i, det) * click_prob(c.r, n.j, det) *
           click_prob(c.s, n.k, det) * click_prob(c.t, n.l, det);
}

/// Precomputed click probabilities for one detector configuration.
/// The powers [1 - eta(1-p)]^i sit in the innermost coincidence loops, so
/// they are tabulated once per run for i = 0 .. max_count.
class ClickProbTable {
  public:
    ClickProbTable() = default;

    ClickProbTable(const DetectorModel& det, int max_count) : det_(det) {
        p0_.resize(max_count + 1);
        p1_.resize(max_count + 1);
        const double survive = 1.0 - det.eta * (1.0 - det.darkcount);
        double pw = 1.0;
        for (int i = 0; i <= max_count; ++i) {
            p0_[i] = (1.0 - det.darkcount) * pw;
            p1_[i] = 1.0 - p0_[i];
            pw *= survive;
        }
    }

    double prob(int q, int i) const { return q == 0 ? p0_[i] : p1_[i]; }
    double prob0(int i) const { return p0_[i]; }
    double prob1(int i) const { return p1_[i]; }
    int max_count() const { return int(p0_.size()) - 1; }
    const DetectorModel& detector() const { return det_; }

    double tuple_prob(const ClickTuple& c, const CountTuple& n) const {
        return prob(c.q, n.i) * prob(c.r, n.j) * prob(c.s, n.k) * prob(c.t, n.l);
    }

  private:
    DetectorModel det_;
    std::vector<double> p0_, p1_;
};

} // namespace qrelay

#endif // QRELAY_DETECTOR_HPP
