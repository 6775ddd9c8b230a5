#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <random>

#include <evflex/evaluator.hpp>

#include "support/brute_lp.hpp"
#include "support/robust_oracle.hpp"

using namespace evflex;

namespace {

const EvParams kType1{40.0, 40.0, 60.0, 5.0, 0.95, 0.95};
const double kDt = 1.0 / 12.0;

AmbiguitySet sure_u() { return AmbiguitySet{{1.0}, 0.0, 1.0, 1.0}; }

EvalInputs random_inputs(std::mt19937_64& g, int max_ev, int max_samples) {
    EvalInputs in;
    in.dt_h = kDt;
    const int n = 1 + static_cast<int>(g() % static_cast<unsigned>(max_ev));
    for (int i = 0; i < n; ++i) {
        EvParams ev;
        ev.p_ch_max_kw = testsupport::uni(g, 5.0, 80.0);
        ev.p_dis_max_kw = testsupport::uni(g, 5.0, 80.0);
        ev.e_min_kwh = testsupport::uni(g, 0.0, 8.0);
        ev.e_max_kwh = ev.e_min_kwh + testsupport::uni(g, 5.0, 70.0);
        ev.eta_ch = testsupport::uni(g, 0.85, 1.0);
        ev.eta_dis = testsupport::uni(g, 0.85, 1.0);
        double a = testsupport::uni(g, ev.e_min_kwh, ev.e_max_kwh);
        double b = testsupport::uni(g, ev.e_min_kwh, ev.e_max_kwh);
        if (a > b) std::swap(a, b);
        in.fleet.push_back(ev);
        in.socs.push_back({i, a, b});
    }
    const int s = 1 + static_cast<int>(g() % static_cast<unsigned>(max_samples));
    std::vector<double> us;
    for (int i = 0; i < s; ++i) us.push_back(testsupport::uni(g, 0.3, 1.0));
    in.ambiguity = build_ambiguity(us, testsupport::uni(g, 0.0, 0.2));
    return in;
}

}  // namespace

TEST_CASE("empty fleet evaluates to zero", "[evaluator]") {
    EvalInputs in;
    in.ambiguity = build_ambiguity(std::vector<double>{0.9}, 0.1);
    RobustConfig cfg{0.5, 0.1, 20};
    RobustEvaluation lo = evaluate_m4_lower(in, cfg);
    RobustEvaluation hi = evaluate_m4_upper(in, cfg);
    CHECK(lo.power_kw == 0.0);
    CHECK(hi.power_kw == 0.0);
    CHECK(lo.outcome.status == opt::SolveStatus::optimal);
    FlexibilityBand m3 = evaluate_m3(in);
    CHECK(m3.lower_kw == 0.0);
    CHECK(m3.upper_kw == 0.0);
}

TEST_CASE("two-vehicle worked example", "[evaluator]") {
    EvalInputs in;
    in.dt_h = kDt;
    in.fleet = {kType1, kType1};
    in.socs = {{0, 6.0, 10.0}, {1, 56.0, 59.0}};
    in.ambiguity = sure_u();

    SECTION("full budget, departures certain") {
        FlexibilityBand band = evaluate_m4(in, {1.0, 0.0, 1});
        CHECK(band.lower_kw == Catch::Approx(-51.4).epsilon(1e-9));
        CHECK(band.upper_kw == Catch::Approx(40.0 + 12.0 / 0.95).epsilon(1e-9));
    }
    SECTION("half budget protects half the width") {
        FlexibilityBand band = evaluate_m4(in, {0.5, 0.0, 1});
        CHECK(band.lower_kw == Catch::Approx(-62.8).epsilon(1e-9));
        CHECK(band.upper_kw == Catch::Approx(40.0 + 1.75 * 12.0 / 0.95).epsilon(1e-9));
    }
    SECTION("departure ambiguity scales the band toward zero") {
        in.ambiguity = AmbiguitySet{{0.9, 1.0}, 0.02, 0.9, 1.0};
        FlexibilityBand band = evaluate_m4(in, {1.0, 0.02, 2});
        CHECK(band.lower_kw == Catch::Approx(-51.4 * 0.93).epsilon(1e-9));
        CHECK(band.upper_kw == Catch::Approx((40.0 + 12.0 / 0.95) * 0.93).epsilon(1e-9));
    }
}

TEST_CASE("no-budget single-sample model is the plain fleet range", "[evaluator]") {
    std::mt19937_64 g(0x5eed0);
    for (int rep = 0; rep < 15; ++rep) {
        EvalInputs in = random_inputs(g, 6, 3);
        in.ambiguity = sure_u();
        FlexibilityBand robust = evaluate_m4(in, {0.0, 0.0, 1});
        FlexibilityBand plain = evaluate_m3(in);
        CHECK(robust.lower_kw == Catch::Approx(plain.lower_kw).margin(1e-6));
        CHECK(robust.upper_kw == Catch::Approx(plain.upper_kw).margin(1e-6));
    }
}

TEST_CASE("model optimum matches the closed-form reference", "[evaluator]") {
    std::mt19937_64 g(0xabcdef);
    int checked = 0;
    for (int rep = 0; rep < 40; ++rep) {
        EvalInputs in = random_inputs(g, 3, 3);
        for (double gamma : {0.0, 0.3, 0.7, 1.0}) {
            RobustConfig cfg{gamma, in.ambiguity.epsilon, 3};
            const double lo = evaluate_m4_lower(in, cfg).power_kw;
            const double hi = evaluate_m4_upper(in, cfg).power_kw;
            const double ref_lo = testsupport::brute_lower(in, cfg);
            const double ref_hi = testsupport::brute_upper(in, cfg);
            CHECK(lo == Catch::Approx(ref_lo).epsilon(1e-5).margin(1e-6));
            CHECK(hi == Catch::Approx(ref_hi).epsilon(1e-5).margin(1e-6));
            ++checked;
        }
    }
    CHECK(checked == 160);
}

TEST_CASE("pinned dispatch reproduces the transport value", "[evaluator]") {
    std::mt19937_64 g(0x7777);
    for (int rep = 0; rep < 25; ++rep) {
        EvalInputs in = random_inputs(g, 3, 3);
        RobustConfig cfg{testsupport::uni(g, 0.0, 1.0), in.ambiguity.epsilon, 3};
        double a_star = 0.0;
        std::vector<double> pin;
        for (size_t i = 0; i < in.fleet.size(); ++i) {
            auto [pmin, pmax] = testsupport::robust_power_range(in.fleet[i], in.socs[i], cfg.gamma, kDt);
            pin.push_back(testsupport::uni(g, pmin, pmax));
            a_star += pin.back();
        }
        for (bool upper : {false, true}) {
            detail::DroHandles h;
            opt::Model m = detail::build_dro_model(in, cfg, upper, &h);
            for (size_t i = 0; i < pin.size(); ++i)
                m.add_constraint({{h.p[i], 1.0}}, opt::Sense::eq, pin[i], "pin" + std::to_string(i));
            opt::SolveOutcome out = opt::solve(m);
            REQUIRE(out.status == opt::SolveStatus::optimal);
            const double want = upper ? best_case_expectation(a_star, in.ambiguity)
                                      : worst_case_expectation(a_star, in.ambiguity);
            CHECK(out.objective == Catch::Approx(want).epsilon(1e-6).margin(1e-6));
        }
    }
}

TEST_CASE("upper mirrors lower on a symmetric fleet", "[evaluator]") {
    std::mt19937_64 g(0x1234);
    for (int rep = 0; rep < 10; ++rep) {
        EvalInputs in;
        in.dt_h = kDt;
        const int n = 1 + static_cast<int>(g() % 4u);
        for (int i = 0; i < n; ++i) {
            EvParams ev;
            ev.p_ch_max_kw = ev.p_dis_max_kw = testsupport::uni(g, 10.0, 60.0);
            ev.e_min_kwh = testsupport::uni(g, 0.0, 5.0);
            ev.e_max_kwh = ev.e_min_kwh + testsupport::uni(g, 10.0, 60.0);
            ev.eta_ch = ev.eta_dis = 1.0;
            const double mid = 0.5 * (ev.e_min_kwh + ev.e_max_kwh);
            const double half = testsupport::uni(g, 0.0, 0.5 * (ev.e_max_kwh - ev.e_min_kwh));
            in.fleet.push_back(ev);
            in.socs.push_back({i, mid - half, mid + half});
        }
        std::vector<double> us;
        for (int i = 0; i < 3; ++i) us.push_back(testsupport::uni(g, 0.4, 1.0));
        in.ambiguity = build_ambiguity(us, testsupport::uni(g, 0.0, 0.15));
        RobustConfig cfg{testsupport::uni(g, 0.0, 1.0), in.ambiguity.epsilon, 3};
        RobustEvaluation lo = evaluate_m4_lower(in, cfg);
        RobustEvaluation hi = evaluate_m4_upper(in, cfg);
        CHECK(hi.power_kw == Catch::Approx(-lo.power_kw).margin(1e-7));
    }
}

TEST_CASE("budget and radius only tighten the band", "[evaluator]") {
    std::mt19937_64 g(0xfeed);
    for (int rep = 0; rep < 8; ++rep) {
        EvalInputs in = random_inputs(g, 4, 3);
        double prev_lo = -opt::kInf, prev_hi = opt::kInf;
        for (double gamma : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            FlexibilityBand band = evaluate_m4(in, {gamma, in.ambiguity.epsilon, 3});
            CHECK(band.lower_kw >= prev_lo - 1e-7);
            CHECK(band.upper_kw <= prev_hi + 1e-7);
            CHECK(band.lower_kw <= band.upper_kw + 1e-9);
            prev_lo = band.lower_kw;
            prev_hi = band.upper_kw;
        }
        prev_lo = -opt::kInf;
        prev_hi = opt::kInf;
        for (double eps : {0.0, 0.05, 0.1, 0.5, 2.0}) {
            in.ambiguity.epsilon = eps;
            FlexibilityBand band = evaluate_m4(in, {0.5, eps, 3});
            CHECK(band.lower_kw >= prev_lo - 1e-7);
            CHECK(band.upper_kw <= prev_hi + 1e-7);
            prev_lo = band.lower_kw;
            prev_hi = band.upper_kw;
        }
    }
}

TEST_CASE("each added uncertainty nests the band inward", "[evaluator]") {
    std::mt19937_64 g(0xbead);
    for (int rep = 0; rep < 8; ++rep) {
        EvalInputs in = random_inputs(g, 4, 3);
        RobustConfig cfg{testsupport::uni(g, 0.0, 1.0), in.ambiguity.epsilon, 3};
        FlexibilityBand m1 = evaluate_m1(in, cfg);
        FlexibilityBand m2 = evaluate_m2(in, cfg);
        FlexibilityBand m3 = evaluate_m3(in);
        FlexibilityBand m4 = evaluate_m4(in, cfg);
        const double tol = 1e-7;
        CHECK(m4.lower_kw >= m2.lower_kw - tol);
        CHECK(m4.upper_kw <= m2.upper_kw + tol);
        CHECK(m2.lower_kw >= m3.lower_kw - tol);
        CHECK(m2.upper_kw <= m3.upper_kw + tol);
        CHECK(m4.lower_kw >= m1.lower_kw - tol);
        CHECK(m4.upper_kw <= m1.upper_kw + tol);
        CHECK(m1.lower_kw >= m3.lower_kw - tol);
        CHECK(m1.upper_kw <= m3.upper_kw + tol);
    }
}

TEST_CASE("methods coincide when nothing is uncertain", "[evaluator]") {
    std::mt19937_64 g(0xc01d);
    EvalInputs in = random_inputs(g, 5, 1);
    for (SocInterval& s : in.socs) s.e_lo_kwh = s.e_hi_kwh = s.mid();
    in.ambiguity = sure_u();
    RobustConfig cfg{0.8, 0.0, 1};
    FlexibilityBand m1 = evaluate_m1(in, cfg);
    FlexibilityBand m2 = evaluate_m2(in, cfg);
    FlexibilityBand m3 = evaluate_m3(in);
    FlexibilityBand m4 = evaluate_m4(in, cfg);
    for (const FlexibilityBand& b : {m1, m2, m4}) {
        CHECK(b.lower_kw == Catch::Approx(m3.lower_kw).margin(1e-6));
        CHECK(b.upper_kw == Catch::Approx(m3.upper_kw).margin(1e-6));
    }
}

TEST_CASE("whole-instance scaling moves the band linearly", "[evaluator]") {
    std::mt19937_64 g(0x5ca1e);
    EvalInputs in = random_inputs(g, 4, 3);
    RobustConfig cfg{0.6, in.ambiguity.epsilon, 3};
    FlexibilityBand base = evaluate_m4(in, cfg);
    const double c = 2.5;
    EvalInputs scaled = in;
    for (size_t i = 0; i < scaled.fleet.size(); ++i) {
        EvParams& ev = scaled.fleet[i];
        ev.p_ch_max_kw *= c;
        ev.p_dis_max_kw *= c;
        ev.e_min_kwh *= c;
        ev.e_max_kwh *= c;
        scaled.socs[i].e_lo_kwh *= c;
        scaled.socs[i].e_hi_kwh *= c;
    }
    FlexibilityBand big = evaluate_m4(scaled, cfg);
    CHECK(big.lower_kw == Catch::Approx(c * base.lower_kw).epsilon(1e-8));
    CHECK(big.upper_kw == Catch::Approx(c * base.upper_kw).epsilon(1e-8));

    // rating-limited fleet: scaling ratings alone is just as linear
    EvalInputs roomy = in;
    for (size_t i = 0; i < roomy.fleet.size(); ++i) {
        EvParams& ev = roomy.fleet[i];
        ev.p_ch_max_kw = 1.0;
        ev.p_dis_max_kw = 1.0;
        ev.e_min_kwh = 0.0;
        ev.e_max_kwh = 500.0;
        roomy.socs[i] = {static_cast<int>(i), 250.0, 260.0};
    }
    FlexibilityBand r1 = evaluate_m4(roomy, cfg);
    for (EvParams& ev : roomy.fleet) {
        ev.p_ch_max_kw *= c;
        ev.p_dis_max_kw *= c;
    }
    FlexibilityBand r2 = evaluate_m4(roomy, cfg);
    CHECK(r2.lower_kw == Catch::Approx(c * r1.lower_kw).epsilon(1e-9));
    CHECK(r2.upper_kw == Catch::Approx(c * r1.upper_kw).epsilon(1e-9));
}

TEST_CASE("incoherent evaluation inputs are rejected", "[evaluator]") {
    EvalInputs in;
    in.fleet = {kType1};
    in.ambiguity = sure_u();
    CHECK_THROWS_AS(evaluate_m4(in, {1.0, 0.0, 1}), ConfigError);  // missing interval
    in.socs = {{0, 40.0, 30.0}};
    CHECK_THROWS_AS(evaluate_m4(in, {1.0, 0.0, 1}), ConfigError);  // inverted
    in.socs = {{0, 30.0, 90.0}};
    CHECK_THROWS_AS(evaluate_m4(in, {1.0, 0.0, 1}), ConfigError);  // beyond capacity
    in.socs = {{0, 20.0, 40.0}};
    CHECK_THROWS_AS(evaluate_m4(in, {1.5, 0.0, 1}), ConfigError);  // budget out of range
    in.ambiguity.samples.clear();
    CHECK_THROWS_AS(evaluate_m4(in, {1.0, 0.0, 1}), ConfigError);  // no samples
    in.ambiguity = AmbiguitySet{{0.5}, 0.1, 0.8, 1.0};
    CHECK_THROWS_AS(evaluate_m4(in, {1.0, 0.1, 1}), ConfigError);  // sample off-support
    CHECK_THROWS_AS(parse_method("M5"), ConfigError);
}

TEST_CASE("evaluation is bit-reproducible", "[evaluator]") {
    std::mt19937_64 g(0xd00d);
    EvalInputs in = random_inputs(g, 4, 3);
    RobustConfig cfg{0.7, in.ambiguity.epsilon, 3};
    FlexibilityBand a = evaluate_m4(in, cfg);
    FlexibilityBand b = evaluate_m4(in, cfg);
    CHECK(std::memcmp(&a.lower_kw, &b.lower_kw, sizeof(double)) == 0);
    CHECK(std::memcmp(&a.upper_kw, &b.upper_kw, sizeof(double)) == 0);
}
