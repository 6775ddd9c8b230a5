// Evaluates one fleet snapshot with all four methods and prints the bands.
// Shows the library calls behind `evflex compare` without any file I/O.

#include <cstdio>

#include <evflex/departure.hpp>
#include <evflex/evaluator.hpp>

using namespace evflex;

int main() {
    EvalInputs in;
    in.dt_h = 1.0 / 12.0;  // 5-minute interval

    // ten 40 kW / 60 kWh vehicles, state of charge known to +-2 kWh
    for (int n = 0; n < 10; ++n) {
        in.fleet.push_back({40.0, 40.0, 60.0, 5.0, 0.95, 0.95});
        const double mid = 20.0 + 2.5 * n;
        in.socs.push_back({n, mid - 2.0, mid + 2.0});
    }

    // recent departure-ratio observations and a small ambiguity radius
    in.ambiguity = build_ambiguity(std::vector<double>{0.93, 0.88, 1.0, 0.96, 0.9}, 0.02);

    const RobustConfig cfg{1.0, 0.02, 5};
    std::printf("%-28s %12s %12s\n", "method", "lower kW", "upper kW");
    for (Method m : {Method::m1, Method::m2, Method::m3, Method::m4}) {
        const FlexibilityBand band = evaluate(m, in, cfg);
        std::printf("%-28s %12.2f %12.2f\n", to_string(m), band.lower_kw, band.upper_kw);
    }
    return 0;
}
