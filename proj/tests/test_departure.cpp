#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <sstream>

#include <evflex/departure.hpp>

using namespace evflex;

namespace {

const EvParams kType1{40.0, 40.0, 60.0, 5.0, 0.95, 0.95};
const EvParams kType2{60.0, 60.0, 82.0, 10.0, 0.95, 0.95};
const double kDt = 1.0 / 12.0;

}  // namespace

TEST_CASE("ambiguity construction from a sample window", "[departure]") {
    AmbiguitySet set = build_ambiguity(std::vector<double>{0.9, 1.0}, 0.05);
    CHECK(set.size() == 2);
    CHECK(set.u_lo == 0.9);
    CHECK(set.u_hi == 1.0);
    CHECK(set.mean() == Catch::Approx(0.95));
    CHECK(set.epsilon == 0.05);

    CHECK_THROWS_AS(build_ambiguity(std::vector<double>{}, 0.05), ConfigError);
    CHECK_THROWS_AS(build_ambiguity(std::vector<double>{0.9}, -0.1), ConfigError);
    CHECK_THROWS_AS(
        build_ambiguity(std::vector<double>{std::numeric_limits<double>::quiet_NaN()}, 0.1),
        ConfigError);
}

TEST_CASE("transport oracle worked examples", "[departure]") {
    AmbiguitySet set;
    set.samples = {0.9, 1.0};
    set.epsilon = 0.05;
    set.u_lo = 0.8;
    set.u_hi = 1.0;
    CHECK(worst_case_expectation(-100.0, set) == Catch::Approx(-90.0));
    CHECK(worst_case_expectation(100.0, set) == Catch::Approx(100.0));

    AmbiguitySet zero = set;
    zero.epsilon = 0.0;
    CHECK(worst_case_expectation(-100.0, zero) == Catch::Approx(-95.0));
    CHECK(worst_case_expectation(100.0, zero) == Catch::Approx(95.0));
    CHECK(worst_case_expectation(0.0, set) == 0.0);

    // point support: radius cannot move mass anywhere
    AmbiguitySet point = build_ambiguity(std::vector<double>{0.85, 0.85, 0.85}, 10.0);
    CHECK(worst_case_expectation(-7.0, point) == Catch::Approx(-7.0 * 0.85));
    CHECK(worst_case_expectation(7.0, point) == Catch::Approx(7.0 * 0.85));

    // inf mirrors sup
    CHECK(best_case_expectation(-100.0, set) == Catch::Approx(-100.0));
    CHECK(best_case_expectation(100.0, set) == Catch::Approx(90.0));
}

TEST_CASE("transport oracle shape in the radius", "[departure]") {
    AmbiguitySet set = build_ambiguity(std::vector<double>{0.82, 0.9, 0.97, 1.0}, 0.0);
    for (double a : {-50.0, 30.0}) {
        double prev = -1e100;
        std::vector<double> f;
        for (int i = 0; i <= 20; ++i) {
            set.epsilon = 0.25 * i / 20.0;
            const double v = worst_case_expectation(a, set);
            CHECK(v >= prev - 1e-12);  // nondecreasing in the radius
            prev = v;
            f.push_back(v);
        }
        // piecewise-linear concave: midpoint never below the chord
        for (size_t i = 2; i < f.size(); ++i)
            CHECK(f[i - 1] >= 0.5 * (f[i - 2] + f[i]) - 1e-9);
        // saturation at the favorable endpoint
        set.epsilon = 10.0;
        const double sat = worst_case_expectation(a, set);
        CHECK(sat == Catch::Approx(a * (a >= 0 ? set.u_hi : set.u_lo)));
    }
}

TEST_CASE("width ratio and its edge cases", "[departure]") {
    CHECK(compute_u({-40.0, 40.0}, {-80.0, 80.0}) == 0.5);
    CHECK(compute_u({-80.0, 80.0}, {-80.0, 80.0}) == 1.0);
    CHECK(compute_u({0.0, 0.0}, {0.0, 0.0}) == 1.0);  // nothing to lose
    CHECK(compute_u({-90.0, 90.0}, {-80.0, 80.0}) == 1.0);  // clamped
    CHECK(compute_u({0.0, 0.0}, {-80.0, 80.0}) == 0.0);
}

TEST_CASE("actual and virtual bands around an early departure", "[departure]") {
    std::vector<EvParams> params = {kType1, kType1};
    std::vector<EvState> states(2);
    states[0] = {0, 30.0, true, 12, 12};
    states[1] = {1, 30.0, true, 12, 1};  // leaves after interval 0
    FlexibilityBand virt = compute_virtual_band(params, states, 1, kDt);
    FlexibilityBand act = compute_actual_band(params, states, 1, kDt);
    CHECK(virt.lower_kw == Catch::Approx(-80.0));
    CHECK(virt.upper_kw == Catch::Approx(80.0));
    CHECK(act.lower_kw == Catch::Approx(-40.0));
    CHECK(act.upper_kw == Catch::Approx(40.0));
    USample u = compute_u_sample(params, states, 1, kDt);
    CHECK(u.value == 0.5);  // exact: both widths are powers of two

    // before the departure both memberships agree
    USample u0 = compute_u_sample(params, states, 0, kDt);
    CHECK(u0.value == 1.0);
}

TEST_CASE("session rows parse with validation", "[departure]") {
    std::istringstream in(R"(# comment
ev_id,type,arrival,reported_departure,actual_departure,arrival_soc
0,type1,0,12,12,30
1,type2, 2 ,10,9, 41.5
)");
    std::vector<SessionRecord> rows = parse_sessions(in, "mem");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].ev_id == 0);
    CHECK(rows[0].type == "type1");
    CHECK(rows[1].arrival == 2);
    CHECK(rows[1].actual_departure == 9);
    CHECK(rows[1].arrival_soc_kwh == 41.5);

    auto parse_str = [](const std::string& text) {
        std::istringstream s(text);
        return parse_sessions(s, "mem");
    };
    CHECK_THROWS_AS(parse_str("0,type1,0,12\n"), DataError);           // short row
    CHECK_THROWS_AS(parse_str("0,type1,0,12,13,30\n"), DataError);     // actual > reported
    CHECK_THROWS_AS(parse_str("0,type1,5,12,4,30\n"), DataError);      // arrival > actual
    CHECK_THROWS_AS(parse_str("0,type1,x,12,12,30\n"), DataError);     // bad numeric
    try {
        parse_str("0,type1,0,12,12,30\nbad row here\n");
        FAIL("expected throw");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(":2:") != std::string::npos);  // line number
    }
}

TEST_CASE("session replay produces the u series", "[departure]") {
    std::map<std::string, EvParams> types = {{"type1", kType1}, {"type2", kType2}};

    SECTION("single on-time session keeps u at one") {
        std::vector<SessionRecord> sessions = {{0, "type1", 0, 6, 6, 30.0}};
        std::vector<USample> us = ingest_u_samples(sessions, types, kDt);
        REQUIRE(us.size() == 6);
        for (const USample& u : us) CHECK(u.value == 1.0);
    }

    SECTION("symmetric half departure gives one half") {
        std::vector<SessionRecord> sessions = {
            {0, "type1", 0, 4, 4, 30.0},
            {1, "type1", 0, 4, 2, 30.0},
        };
        std::vector<USample> us = ingest_u_samples(sessions, types, kDt);
        REQUIRE(us.size() == 4);
        CHECK(us[0].value == 1.0);
        CHECK(us[1].value == 1.0);
        CHECK(us[2].value == 0.5);
        CHECK(us[3].value == 0.5);
    }

    SECTION("unknown type and bad energy are rejected") {
        std::vector<SessionRecord> bad_type = {{0, "typeX", 0, 4, 4, 30.0}};
        CHECK_THROWS_AS(ingest_u_samples(bad_type, types, kDt), DataError);
        std::vector<SessionRecord> bad_soc = {{0, "type1", 0, 4, 4, 300.0}};
        CHECK_THROWS_AS(ingest_u_samples(bad_soc, types, kDt), DataError);
    }

    SECTION("explicit horizon trims or extends the series") {
        std::vector<SessionRecord> sessions = {{0, "type1", 0, 3, 3, 30.0}};
        CHECK(ingest_u_samples(sessions, types, kDt, 2).size() == 2);
        std::vector<USample> longer = ingest_u_samples(sessions, types, kDt, 5);
        REQUIRE(longer.size() == 5);
        CHECK(longer[4].value == 1.0);  // empty interval: nothing to lose
    }
}

TEST_CASE("sliding window only sees the last S samples", "[departure]") {
    std::vector<double> history = {0.2, 0.3, 0.95, 0.9, 1.0};
    const int S = 3;
    std::vector<double> window(history.end() - S, history.end());
    AmbiguitySet from_window = build_ambiguity(window, 0.02);
    CHECK(from_window.u_lo == 0.9);
    CHECK(from_window.u_hi == 1.0);
    CHECK(from_window.mean() == Catch::Approx((0.95 + 0.9 + 1.0) / 3.0));
}
