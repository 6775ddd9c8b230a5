// Runs one seeded rolling-horizon simulation in memory and prints what the
// aggregator promised, what the market asked, and what the fleet delivered.

#include <cstdio>

#include <evflex/fleet.hpp>
#include <evflex/sim/rolling.hpp>
#include <evflex/sim/scenario.hpp>

using namespace evflex;

int main() {
    FleetSpec fleet;
    fleet.types.push_back({"sedan", {40.0, 40.0, 60.0, 5.0, 0.95, 0.95}, 12});
    fleet.types.push_back({"van", {60.0, 60.0, 82.0, 10.0, 0.95, 0.95}, 8});

    ScenarioConfig cfg;
    cfg.horizon = 12;
    cfg.seed = 42;
    const Scenario sc = generate_scenario(fleet, cfg);

    RunOptions run;
    run.method = Method::m4;
    run.robust = {1.0, 0.02, 20};
    const SimulationTrace trace = run_rolling(sc, run);

    std::printf("%3s %22s %12s %12s %6s\n", "k", "promised band kW", "signal", "realized", "u");
    for (const IntervalRecord& r : trace.intervals)
        std::printf("%3d [%9.1f, %9.1f] %12.1f %12.1f %6.3f%s\n", r.k, r.evaluated.lower_kw,
                    r.evaluated.upper_kw, r.signal_kw, r.realized_kw, r.u,
                    r.clamped ? "  (clamped!)" : "");

    const Scorecard card = score(trace, run.score_tol_kw);
    std::printf("\nviolations: %d upper, %d lower;  over-estimated %.3f MW, "
                "under-estimated %.3f MW\n",
                card.ubc, card.lbc, card.oef_mw, card.uef_mw);
    std::printf("replay check: max energy drift %.2e kWh\n", max_replay_error_kwh(trace));
    return 0;
}
