#include <catch2/catch_amalgamated.hpp>

#include <qrelay/coincidence.hpp>
#include <qrelay/oracle.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

using namespace qrelay;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const double kPi = std::acos(-1.0);

// Brightness chi^2 = 0.06 with net efficiency 0.04: the regression workhorse.
RelayParams standard_params(int n_stations) {
    RelayParams p;
    p.n_stations = n_stations;
    p.chi = std::sqrt(0.06);
    p.eta0 = 0.04;
    p.darkcount = 1e-5;
    p.alpha_db_per_km = 0.25;
    p.alpha0_db = 0.0;
    p.distance_km = 0.0;
    p.n_max = 3;
    return p;
}

std::vector<ClickTuple> all_hv(int n_stations) {
    return std::vector<ClickTuple>(2 * n_stations - 1, kSingletClicksHV);
}

} // namespace

TEST_CASE("posterior weights are a probability distribution") {
    RelayParams p = standard_params(1);
    const auto post = posterior(all_hv(1), p);
    double total = 0.0;
    for (const auto& [pat, w] : post) {
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
        total += w;
    }
    CHECK_THAT(total, WithinAbs(1.0, 1e-9));

    RelayParams p2 = standard_params(2);
    p2.n_max = 1;
    double total2 = 0.0;
    for (const auto& [pat, w] : posterior(all_hv(2), p2)) total2 += w;
    CHECK_THAT(total2, WithinAbs(1.0, 1e-9));
}

TEST_CASE("ideal detectors collapse the posterior onto the heralding pattern") {
    RelayParams p;
    p.n_stations = 1;
    p.chi = 0.1;
    p.eta0 = 1.0;
    p.darkcount = 0.0;
    p.alpha_db_per_km = 0.0;
    p.alpha0_db = 0.0;
    p.n_max = 1;
    p.tuple_sum_min = 2;
    p.tuple_sum_max = 2;

    const auto post = posterior(all_hv(1), p);
    REQUIRE(post.size() == 1);
    const auto& [pat, w] = *post.begin();
    CHECK(pat == InnerPattern{{CountTuple{1, 0, 1, 0}}});
    CHECK_THAT(w, WithinAbs(1.0, 1e-12));
}

TEST_CASE("posterior matches the reference weights") {
    RelayParams p;
    p.n_stations = 1;
    p.chi = 0.1;
    p.eta0 = 0.3;
    p.darkcount = 1e-5;
    p.alpha0_db = 0.0;
    p.n_max = 2;

    const auto post = posterior(all_hv(1), p);
    const OracleResult ref = oracle_relay(p, RotatorAngles{0.0, 0.0}, all_hv(1));
    const DetectorModel det = detector_from_params(p);

    for (const auto& [pat, w] : post) {
        REQUIRE(ref.p_raw.count(pat) == 1);
        double g = 1.0;
        for (std::size_t u = 0; u < pat.tuples.size(); ++u)
            g *= tuple_click_prob(kSingletClicksHV, pat.tuples[u], det);
        CHECK_THAT(w, WithinAbs(g * ref.p_raw.at(pat) / ref.evidence, 1e-9));
    }
}

TEST_CASE("outer class probabilities against frozen single-station values") {
    const CoincidenceContext ctx(standard_params(1), all_hv(1));
    const QSet q = ctx.class_probs(RotatorAngles{kPi / 2, kPi / 2});

    CHECK_THAT(q.q1010, WithinRel(0.000535034892151, 1e-9));
    CHECK_THAT(q.q0101, WithinRel(0.000535034892151, 1e-9));
    CHECK_THAT(q.q0110, WithinRel(9.30213782794e-05, 1e-9));
    CHECK_THAT(q.q1001, WithinRel(9.30213782794e-05, 1e-9));

    // Equal angles put the two coincidence classes on an equal footing.
    CHECK_THAT(q.q1010, WithinRel(q.q0101, 1e-11));
    CHECK_THAT(q.q0110, WithinRel(q.q1001, 1e-11));
}

TEST_CASE("outer class probabilities against frozen two-station values") {
    const CoincidenceContext ctx(standard_params(2), all_hv(2));
    const QSet q = ctx.class_probs(RotatorAngles{kPi / 2, kPi / 2});
    CHECK_THAT(q.q1010, WithinRel(0.000219777740132, 1e-9));
    CHECK_THAT(q.q0110, WithinRel(0.000108598531913, 1e-9));
}

TEST_CASE("class probabilities match the reference relay end to end") {
    RelayParams p;
    p.n_stations = 1;
    p.chi = 0.1;
    p.eta0 = 0.3;
    p.darkcount = 1e-5;
    p.alpha0_db = 0.0;
    p.n_max = 2;

    const CoincidenceContext ctx(p, all_hv(1));
    for (const RotatorAngles& angles :
         {RotatorAngles{kPi / 2, kPi / 2}, RotatorAngles{1.1, 0.4}, RotatorAngles{0.0, 2.6}}) {
        const QSet got = ctx.class_probs(angles);
        const QSet want = oracle_relay(p, angles, all_hv(1)).q;
        CHECK_THAT(got.q1010, WithinAbs(want.q1010, 1e-9));
        CHECK_THAT(got.q0101, WithinAbs(want.q0101, 1e-9));
        CHECK_THAT(got.q0110, WithinAbs(want.q0110, 1e-9));
        CHECK_THAT(got.q1001, WithinAbs(want.q1001, 1e-9));
    }
}

TEST_CASE("outer click classes are mutually exclusive and exhaustive") {
    const CoincidenceContext ctx(standard_params(1), all_hv(1));
    const RotatorAngles angles{1.3, 0.7};
    double total = 0.0;
    for (int q = 0; q < 2; ++q)
        for (int r = 0; r < 2; ++r)
            for (int s = 0; s < 2; ++s)
                for (int t = 0; t < 2; ++t) {
                    const double v = ctx.outer_class_prob(
                        ClickTuple{std::uint8_t(q), std::uint8_t(r), std::uint8_t(s),
                                   std::uint8_t(t)},
                        angles);
                    CHECK(v >= 0.0);
                    CHECK(v <= 1.0);
                    total += v;
                }
    CHECK_THAT(total, WithinAbs(1.0, 1e-10));
}

TEST_CASE("coincidence_prob equals the context query") {
    RelayParams p = standard_params(1);
    const RotatorAngles angles{kPi / 2, 1.9};
    const CoincidenceContext ctx(p, all_hv(1));
    CHECK(coincidence_prob(kSingletClicksHV, all_hv(1), angles, p) ==
          ctx.outer_class_prob(kSingletClicksHV, angles));
}

TEST_CASE("heralded state under ideal detectors is the pure singlet component") {
    RelayParams p;
    p.n_stations = 1;
    p.chi = 0.1;
    p.eta0 = 1.0;
    p.darkcount = 0.0;
    p.alpha_db_per_km = 0.0;
    p.alpha0_db = 0.0;
    p.n_max = 1;
    p.tuple_sum_min = 2;
    p.tuple_sum_max = 2;

    const HeraldedState hs = heralded_state(all_hv(1), p);
    REQUIRE(hs.components.size() == 1);
    CHECK_THAT(hs.components[0].weight, WithinAbs(1.0, 1e-12));
    CHECK(hs.components[0].pattern == InnerPattern{{CountTuple{1, 0, 1, 0}}});
    CHECK(hs.components[0].state.terms.size() == 4);
}

TEST_CASE("heralded state weights sum to one and follow pattern order") {
    RelayParams p = standard_params(1);
    const HeraldedState hs = heralded_state(all_hv(1), p);
    double total = 0.0;
    for (std::size_t i = 0; i < hs.components.size(); ++i) {
        total += hs.components[i].weight;
        if (i > 0) CHECK(hs.components[i - 1].pattern < hs.components[i].pattern);
    }
    CHECK_THAT(total, WithinAbs(1.0, 1e-9));
}

TEST_CASE("visibility against frozen values") {
    const VisibilityReport v1 = visibility(standard_params(1));
    CHECK_THAT(v1.visibility, WithinRel(0.703780114429, 1e-9));
    CHECK_THAT(v1.v_max, WithinRel(v1.q1010 + v1.q0101, 1e-15));
    CHECK_THAT(v1.v_min, WithinRel(v1.q0110 + v1.q1001, 1e-15));

    const VisibilityReport v2 = visibility(standard_params(2));
    CHECK_THAT(v2.visibility, WithinRel(0.338572600044, 1e-9));
    CHECK(v2.visibility < v1.visibility);
}

TEST_CASE("visibility overload reads only the alpha angle") {
    RelayParams p = standard_params(1);
    const VisibilityReport a = visibility(p, 1.1);
    const VisibilityReport b = visibility(p, RotatorAngles{1.1, 99.0});
    CHECK(a.visibility == b.visibility);
    CHECK(a.q1010 == b.q1010);
}

TEST_CASE("the two heralding conventions give the same visibility") {
    RelayParams p = standard_params(1);
    const VisibilityReport hv = visibility(p);

    const CoincidenceContext vh_ctx(p, {kSingletClicksVH});
    const QSet q = vh_ctx.class_probs(RotatorAngles{kPi / 2, kPi / 2});
    const double v_vh =
        (q.q1010 + q.q0101 - q.q0110 - q.q1001) / (q.q1010 + q.q0101 + q.q0110 + q.q1001);
    CHECK_THAT(v_vh, WithinRel(hv.visibility, 1e-9));
}

TEST_CASE("pattern pass is byte-identical across worker counts") {
    RelayParams p = standard_params(3);
    p.n_max = 2; // 45^5 patterns: enough for many reduction chunks

    const CoincidenceContext one(p, all_hv(3), 1);
    const CoincidenceContext four(p, all_hv(3), 4);

    CHECK(one.evidence() == four.evidence());
    REQUIRE(one.pass().s.size() == four.pass().s.size());
    CHECK(one.pass().s == four.pass().s); // element-wise bitwise equality
    CHECK(one.pass().feasible_patterns == four.pass().feasible_patterns);
}

TEST_CASE("angle sweep locates the interference extrema") {
    RelayParams p = standard_params(1);
    std::vector<double> grid;
    for (int i = 0; i <= 32; ++i) grid.push_back(2.0 * kPi * i / 32.0);

    const SweepTable table = sweep_angle(p, kPi / 2, grid);
    REQUIRE(table.rows.size() == grid.size());
    for (const SweepRow& row : table.rows) CHECK(row.ok);

    std::size_t arg_max = 0, arg_min = 0;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        if (table.rows[i].v_max > table.rows[arg_max].v_max) arg_max = i;
        if (table.rows[i].v_max < table.rows[arg_min].v_max) arg_min = i;
    }
    // Constructive fringe at delta~ = alpha~, destructive at alpha~ + pi.
    CHECK(table.rows[arg_max].x == grid[8]);  // pi/2
    CHECK(table.rows[arg_min].x == grid[24]); // 3 pi/2

    // 2 pi periodicity: first and last rows coincide.
    CHECK_THAT(table.rows.front().q.q1010, WithinRel(table.rows.back().q.q1010, 1e-11));
    CHECK_THAT(table.rows.front().q.q0110, WithinRel(table.rows.back().q.q0110, 1e-11));
}

TEST_CASE("angle sweep rows match the reference relay pointwise") {
    RelayParams p;
    p.n_stations = 1;
    p.chi = 0.1;
    p.eta0 = 0.3;
    p.darkcount = 1e-5;
    p.alpha0_db = 0.0;
    p.n_max = 2;

    const std::vector<double> grid{0.0, kPi / 4, kPi / 2, kPi, 3 * kPi / 2};
    const SweepTable table = sweep_angle(p, kPi / 2, grid);
    for (const SweepRow& row : table.rows) {
        REQUIRE(row.ok);
        const QSet want = oracle_relay(p, RotatorAngles{kPi / 2, row.x}, all_hv(1)).q;
        CHECK_THAT(row.q.q1010, WithinAbs(want.q1010, 1e-9));
        CHECK_THAT(row.q.q0101, WithinAbs(want.q0101, 1e-9));
        CHECK_THAT(row.q.q0110, WithinAbs(want.q0110, 1e-9));
        CHECK_THAT(row.q.q1001, WithinAbs(want.q1001, 1e-9));
    }
}

TEST_CASE("chi sweep rows agree with direct visibility calls") {
    RelayParams p = standard_params(1);
    const std::vector<double> grid{0.1, 0.2, 0.3};
    const SweepTable table = sweep_chi(p, grid, kPi / 2);
    REQUIRE(table.rows.size() == 3);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        REQUIRE(table.rows[i].ok);
        RelayParams pi = p;
        pi.chi = grid[i];
        CHECK_THAT(table.rows[i].v, WithinRel(visibility(pi).visibility, 1e-12));
    }
    // Brighter sources add multi-pair noise: contrast falls with chi.
    CHECK(table.rows[0].v > table.rows[1].v);
    CHECK(table.rows[1].v > table.rows[2].v);
}

TEST_CASE("distance sweep decays monotonically over the near range") {
    RelayParams p;
    p.n_stations = 1;
    p.chi = 0.1;
    p.eta0 = 0.70;
    p.darkcount = 1e-5;
    p.alpha_db_per_km = 0.25;
    p.alpha0_db = 4.0;
    p.n_max = 3;

    const std::vector<double> grid{0.0, 100.0, 200.0, 300.0};
    const SweepTable table = sweep_distance(p, grid, kPi / 2);
    for (const SweepRow& row : table.rows) REQUIRE(row.ok);
    for (std::size_t i = 1; i < table.rows.size(); ++i)
        CHECK(table.rows[i].v < table.rows[i - 1].v);

    CHECK_THAT(table.rows[1].v, WithinRel(0.930759555187, 1e-9));
    CHECK_THAT(table.rows[2].v, WithinRel(0.9189079707, 1e-9));
    CHECK_THAT(table.rows[3].v, WithinRel(0.890084632917, 1e-9));
}

TEST_CASE("truncation sweep clamps the tuple bound and stabilizes") {
    RelayParams p = standard_params(1);
    const SweepTable table = sweep_nmax(p, {1, 2, 3}, kPi / 2);
    REQUIRE(table.rows.size() == 3);
    for (const SweepRow& row : table.rows) REQUIRE(row.ok);

    RelayParams p3 = p;
    p3.n_max = 3;
    CHECK_THAT(table.rows[2].v, WithinRel(visibility(p3).visibility, 1e-12));

    // Raising the per-mode cap from 2 to 3 moves the answer only slightly.
    CHECK(std::abs(table.rows[2].v - table.rows[1].v) <= 0.03);
}

TEST_CASE("ideal detectors give unit visibility for one to three stations") {
    for (int n : {1, 2, 3}) {
        RelayParams p;
        p.n_stations = n;
        p.chi = 0.1;
        p.eta0 = 1.0;
        p.darkcount = 0.0;
        p.alpha_db_per_km = 0.0;
        p.alpha0_db = 0.0;
        p.n_max = 1;
        p.tuple_sum_min = 2;
        p.tuple_sum_max = 2;
        CHECK(visibility(p).visibility >= 0.999);
    }
}

TEST_CASE("unreachable heralds raise DegenerateEvidenceError") {
    RelayParams p = standard_params(1);

    SECTION("zero brightness cannot produce heralding photons") {
        p.chi = 0.0;
        CHECK_THROWS_AS(CoincidenceContext(p, all_hv(1)), DegenerateEvidenceError);
        CHECK_THROWS_AS(posterior(all_hv(1), p), DegenerateEvidenceError);
    }
    SECTION("four clicks exceed the tuple photon budget without dark counts") {
        p.darkcount = 0.0;
        p.tuple_sum_min = 2;
        p.tuple_sum_max = 2;
        CHECK_THROWS_AS(CoincidenceContext(p, {ClickTuple{1, 1, 1, 1}}),
                        DegenerateEvidenceError);
    }
}

TEST_CASE("context validates its inputs") {
    RelayParams p = standard_params(2);
    CHECK_THROWS_AS(CoincidenceContext(p, all_hv(1)), ValidationError); // needs 3 tuples
    CHECK_THROWS_AS(CoincidenceContext(p, all_hv(2), 0), ValidationError);
}

TEST_CASE("threshold_crossing interpolates the first downward crossing") {
    SweepTable table;
    table.variable = "distance";
    auto add_row = [&](double x, double v, bool ok) {
        SweepRow row;
        row.x = x;
        row.v = v;
        row.ok = ok;
        table.rows.push_back(row);
    };

    add_row(0.0, 0.8, true);
    add_row(100.0, 0.6, true);
    add_row(200.0, 0.4, true);

    CHECK_THAT(threshold_crossing(table, 0.7).value(), WithinAbs(50.0, 1e-9));
    CHECK(threshold_crossing(table, 0.6).value() == 100.0);
    CHECK_FALSE(threshold_crossing(table, 0.9).has_value());
    CHECK_FALSE(threshold_crossing(table, 0.3).has_value());

    // Failed rows are skipped; interpolation spans the gap.
    table.rows.clear();
    add_row(0.0, 0.8, true);
    add_row(100.0, 0.0, false);
    add_row(200.0, 0.4, true);
    CHECK_THAT(threshold_crossing(table, 0.7).value(), WithinAbs(50.0, 1e-9));
}
