// evflex command-line front end. Orchestration only: every computation lives
// in the headers. Subcommands map to one experiment each; all file outputs
// carry the tool version and the hash of the effective configuration (file
// plus flag overrides), and are byte-identical for identical configurations
// except for the measured wall times in the scale table.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <evflex/config.hpp>
#include <evflex/departure.hpp>
#include <evflex/fleet.hpp>
#include <evflex/sim/rolling.hpp>
#include <evflex/sim/scenario.hpp>
#include <evflex/sim/trace_io.hpp>
#include <evflex/version.hpp>

namespace fs = std::filesystem;
using namespace evflex;

namespace {

const char* kUsage = R"(evflex - EV-fleet flexibility band evaluation and simulation

usage: evflex <command> [flags]

commands:
  ingest       normalize a session file and compute its departure-ratio samples
  simulate     run one rolling-horizon simulation; write trace + scorecard
  compare      score methods M1-M4 on the same scenario
  gamma-sweep  score the configured method across SOC-budget values
  scale        time the robust lower-band solve across fleet sizes
  plot         emit a per-interval band series from a trace file

flags:
  --config PATH      run configuration file (omit for built-in defaults)
  --seed N           override the scenario seed
  --jobs N           parallel runs for compare / gamma-sweep
  --solver NAME      solver backend (this build provides: builtin)
  --time-limit S     solver time limit, seconds
  --out-dir PATH     output directory
  --export-lp DIR    dump each solved model in LP format into DIR
  --sessions PATH    session file (ingest input, or replayed scenario)
  --trace PATH       trace file to plot
  --method M         promise method override (M1..M4)
  --gammas LIST      comma-separated budgets for gamma-sweep (default 1.0,0.7,0.3)
  --counts LIST      comma-separated fleet sizes for scale (default 100,200,500,1000)
  --version          print the tool version and exit
  --help             print this text and exit

exit codes: 0 success, 1 configuration error, 2 data error, 3 solver error
)";

struct Args {
    std::string cmd;
    std::map<std::string, std::string> opt;
    std::vector<std::string> positional;

    bool has(const std::string& k) const { return opt.count(k) != 0; }
    std::string get(const std::string& k) const {
        auto it = opt.find(k);
        return it == opt.end() ? std::string() : it->second;
    }
};

Args parse_args(int argc, char** argv) {
    static const std::set<std::string> value_flags = {
        "config", "seed",     "jobs",  "solver", "time-limit", "out-dir",
        "export-lp", "sessions", "trace", "method", "gammas",     "counts"};
    Args a;
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--help" || arg == "-h") {
            a.cmd = "help";
            return a;
        }
        if (arg == "--version") {
            a.cmd = "version";
            return a;
        }
        if (arg.rfind("--", 0) == 0) {
            std::string name = arg.substr(2);
            if (!value_flags.count(name)) throw ConfigError("unknown flag '" + arg + "'");
            if (i + 1 >= argc) throw ConfigError("flag '" + arg + "' needs a value");
            a.opt[name] = argv[++i];
        } else if (a.cmd.empty()) {
            a.cmd = arg;
        } else {
            a.positional.push_back(arg);
        }
    }
    return a;
}

RunConfig effective_config(const Args& a) {
    RunConfig c;
    if (a.has("config")) c = load_config(a.get("config"));
    struct Override {
        const char* flag;
        const char* key;
    };
    static const Override overrides[] = {{"seed", "seed"},           {"jobs", "jobs"},
                                         {"solver", "solver"},       {"time-limit", "time_limit_s"},
                                         {"out-dir", "out_dir"},     {"sessions", "sessions"},
                                         {"method", "method"}};
    for (const Override& o : overrides)
        if (a.has(o.flag)) detail::cfg_set(c, o.key, a.get(o.flag), std::string("--") + o.flag);
    c.validate();
    return c;
}

opt::SolverConfig solver_with_export(const RunConfig& c, const Args& a) {
    opt::SolverConfig s = c.solver_config();
    if (a.has("export-lp")) {
        s.export_lp_dir = a.get("export-lp");
        std::error_code ec;
        fs::create_directories(s.export_lp_dir, ec);
        if (ec)
            throw ConfigError("cannot create LP export directory '" + s.export_lp_dir + "': " +
                              ec.message());
    }
    return s;
}

RunOptions options_with_export(const RunConfig& c, const Args& a) {
    RunOptions r = c.run_options();
    r.solver = solver_with_export(c, a);
    return r;
}

std::ifstream open_in(const std::string& path, const char* what, const char* key) {
    std::ifstream f(path);
    if (!f)
        throw ConfigError(std::string("cannot open ") + what + " '" + path + "' (" + key + ")");
    return f;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write output file '" + path.string() + "'");
    return f;
}

fs::path ensure_out_dir(const RunConfig& c) {
    fs::path dir = c.out_dir;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw ConfigError("cannot create output directory '" + dir.string() +
                          "': " + ec.message() + " (config key: out_dir, flag: --out-dir)");
    return dir;
}

FleetSpec load_fleet(const RunConfig& c) {
    std::ifstream f = open_in(c.fleet_file, "fleet file", "config key: fleet");
    return parse_fleet(f, c.fleet_file);
}

std::map<std::string, EvParams> type_map(const FleetSpec& fleet) {
    std::map<std::string, EvParams> types;
    for (const FleetType& t : fleet.types) types[t.name] = t.params;
    return types;
}

Scenario build_scenario(const RunConfig& c) {
    FleetSpec fleet = load_fleet(c);
    if (c.sessions_file.empty()) return generate_scenario(fleet, c.scenario_config());
    std::ifstream f = open_in(c.sessions_file, "session file", "config key: sessions");
    std::vector<SessionRecord> sessions = parse_sessions(f, c.sessions_file);
    // Replayed sessions still need a pre-run u history; draw it the same way
    // the synthetic generator does, floor last.
    std::mt19937_64 g(c.seed);
    std::vector<double> boot(static_cast<size_t>(c.bootstrap_len));
    for (int i = 0; i + 1 < c.bootstrap_len; ++i)
        boot[static_cast<size_t>(i)] =
            c.boot_u_lo + (c.boot_u_hi - c.boot_u_lo) * detail::unit_draw(g);
    boot[static_cast<size_t>(c.bootstrap_len) - 1] = c.boot_u_lo;
    return scenario_from_sessions(sessions, type_map(fleet), std::move(boot),
                                  c.scenario_config());
}

// Runs `tasks` callables on up to `jobs` threads. Results land by index, so
// output order never depends on scheduling; the first failure (by task index)
// is rethrown after every worker has joined.
void run_parallel(std::vector<std::function<void()>>& tasks, int jobs) {
    if (jobs <= 1 || tasks.size() <= 1) {
        for (auto& t : tasks) t();
        return;
    }
    std::vector<std::exception_ptr> errors(tasks.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            try {
                tasks[i]();
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    size_t n_threads = std::min<size_t>(static_cast<size_t>(jobs), tasks.size());
    std::vector<std::thread> pool;
    for (size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    for (std::exception_ptr& e : errors)
        if (e) std::rethrow_exception(e);
}

void note_written(const fs::path& p) { std::cout << "wrote " << p.string() << "\n"; }

int cmd_simulate(const Args& a) {
    RunConfig c = effective_config(a);
    fs::path dir = ensure_out_dir(c);
    const std::uint64_t hash = c.hash();
    Scenario sc = build_scenario(c);
    RunOptions ropt = options_with_export(c, a);
    SimulationTrace trace = run_rolling(sc, ropt);
    fs::path trace_path = dir / (std::string("trace_") + to_string(c.method) + ".tsv");
    {
        std::ofstream f = open_out(trace_path);
        write_trace(f, trace, hash);
    }
    fs::path card_path = dir / "scorecard.tsv";
    {
        std::ofstream f = open_out(card_path);
        write_scorecard(f, {{to_string(c.method), c.gamma, score(trace, c.score_tol_kw)}}, hash);
    }
    note_written(trace_path);
    note_written(card_path);
    return 0;
}

int cmd_compare(const Args& a) {
    RunConfig c = effective_config(a);
    fs::path dir = ensure_out_dir(c);
    const std::uint64_t hash = c.hash();
    Scenario sc = build_scenario(c);
    const Method methods[] = {Method::m1, Method::m2, Method::m3, Method::m4};
    std::vector<ScorecardRow> rows(4);
    std::vector<std::function<void()>> tasks;
    for (int i = 0; i < 4; ++i)
        tasks.push_back([&, i] {
            RunOptions ropt = options_with_export(c, a);
            ropt.method = methods[i];
            SimulationTrace t = run_rolling(sc, ropt);
            rows[static_cast<size_t>(i)] = {to_string(methods[i]), c.gamma,
                                            score(t, c.score_tol_kw)};
        });
    run_parallel(tasks, c.jobs);
    fs::path path = dir / "compare.tsv";
    {
        std::ofstream f = open_out(path);
        write_scorecard(f, rows, hash);
    }
    note_written(path);
    return 0;
}

std::vector<double> parse_list(const std::string& csv, const std::string& where) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!detail::cfg_trim(item).empty())
            out.push_back(detail::cfg_double(detail::cfg_trim(item), where));
    if (out.empty()) throw ConfigError(where + ": empty list '" + csv + "'");
    return out;
}

int cmd_gamma_sweep(const Args& a) {
    RunConfig c = effective_config(a);
    fs::path dir = ensure_out_dir(c);
    const std::uint64_t hash = c.hash();
    std::vector<double> gammas =
        a.has("gammas") ? parse_list(a.get("gammas"), "--gammas") : std::vector<double>{1.0, 0.7, 0.3};
    for (double g : gammas)
        if (!(g >= 0.0 && g <= 1.0))
            throw ConfigError("--gammas: budget " + detail::cfg_num(g) + " outside [0, 1]");
    Scenario sc = build_scenario(c);
    std::vector<ScorecardRow> rows(gammas.size());
    std::vector<std::function<void()>> tasks;
    for (size_t i = 0; i < gammas.size(); ++i)
        tasks.push_back([&, i] {
            RunOptions ropt = options_with_export(c, a);
            ropt.robust.gamma = gammas[i];
            SimulationTrace t = run_rolling(sc, ropt);
            rows[i] = {to_string(c.method), gammas[i], score(t, c.score_tol_kw)};
        });
    run_parallel(tasks, c.jobs);
    fs::path path = dir / "gamma_sweep.tsv";
    {
        std::ofstream f = open_out(path);
        write_scorecard(f, rows, hash);
    }
    note_written(path);
    return 0;
}

int cmd_scale(const Args& a) {
    RunConfig c = effective_config(a);
    fs::path dir = ensure_out_dir(c);
    const std::uint64_t hash = c.hash();
    std::vector<int> counts;
    if (a.has("counts")) {
        for (double v : parse_list(a.get("counts"), "--counts")) {
            if (v < 1.0 || v != static_cast<double>(static_cast<int>(v)))
                throw ConfigError("--counts: fleet sizes must be positive integers");
            counts.push_back(static_cast<int>(v));
        }
    } else {
        counts = {100, 200, 500, 1000};
    }
    // Timings share one core on purpose: parallel solves would measure
    // contention, not the solver, so --jobs does not apply here.
    std::vector<ScalePoint> points =
        scaling_bench(counts, c.seed, c.robust_config(), solver_with_export(c, a));
    fs::path path = dir / "scale.tsv";
    {
        std::ofstream f = open_out(path);
        write_scale_table(f, points, hash);
    }
    note_written(path);
    return 0;
}

int cmd_ingest(const Args& a) {
    RunConfig c = effective_config(a);
    std::string sessions_path = c.sessions_file;
    if (!a.positional.empty()) sessions_path = a.positional.front();
    if (sessions_path.empty())
        throw ConfigError(
            "ingest needs a session file (--sessions PATH, a positional path, or config key: "
            "sessions)");
    fs::path dir = ensure_out_dir(c);
    const std::uint64_t hash = c.hash();
    std::ifstream f = open_in(sessions_path, "session file", "config key: sessions");
    std::vector<SessionRecord> sessions = parse_sessions(f, sessions_path);
    if (sessions.empty()) throw DataError("no sessions in '" + sessions_path + "'");
    FleetSpec fleet = load_fleet(c);
    std::vector<USample> u = ingest_u_samples(sessions, type_map(fleet), c.dt_h, -1,
                                              solver_with_export(c, a));
    fs::path norm_path = dir / "sessions_normalized.csv";
    {
        std::ofstream out = open_out(norm_path);
        write_output_header(out, hash);
        out << "ev_id,type,arrival,reported_departure,actual_departure,arrival_soc\n";
        for (const SessionRecord& s : sessions)
            out << s.ev_id << ',' << s.type << ',' << s.arrival << ',' << s.reported_departure
                << ',' << s.actual_departure << ',' << detail::fmt(s.arrival_soc_kwh) << "\n";
    }
    fs::path u_path = dir / "u_samples.tsv";
    {
        std::ofstream out = open_out(u_path);
        write_output_header(out, hash);
        out << "# columns: interval u\n";
        for (const USample& s : u) out << s.interval << '\t' << detail::fmt(s.value) << "\n";
    }
    note_written(norm_path);
    note_written(u_path);
    return 0;
}

int cmd_plot(const Args& a) {
    RunConfig c = effective_config(a);
    std::string trace_path = a.get("trace");
    if (trace_path.empty() && !a.positional.empty()) trace_path = a.positional.front();
    if (trace_path.empty())
        throw ConfigError("plot needs a trace file (--trace PATH or a positional path)");
    fs::path dir = ensure_out_dir(c);
    std::ifstream f = open_in(trace_path, "trace file", "flag: --trace");
    std::stringstream buffer;
    buffer << f.rdbuf();
    // The series file inherits the hash of the configuration that produced
    // the trace, so the provenance chain survives the replot.
    std::uint64_t hash = c.hash();
    {
        std::string text = buffer.str();
        const std::string tag = "# config_hash ";
        size_t pos = text.find(tag);
        if (pos != std::string::npos)
            hash = std::strtoull(text.c_str() + pos + tag.size(), nullptr, 16);
    }
    SimulationTrace t = read_trace(buffer, trace_path);
    fs::path path = dir / "bands.tsv";
    {
        std::ofstream out = open_out(path);
        write_band_series(out, t, hash);
    }
    note_written(path);
    return 0;
}

int dispatch(const Args& a) {
    if (a.cmd.empty() || a.cmd == "help") {
        std::cout << kUsage;
        return a.cmd.empty() ? 1 : 0;
    }
    if (a.cmd == "version") {
        std::cout << "evflex " << kVersion << "\n";
        return 0;
    }
    if (a.cmd == "ingest") return cmd_ingest(a);
    if (a.cmd == "simulate") return cmd_simulate(a);
    if (a.cmd == "compare") return cmd_compare(a);
    if (a.cmd == "gamma-sweep") return cmd_gamma_sweep(a);
    if (a.cmd == "scale") return cmd_scale(a);
    if (a.cmd == "plot") return cmd_plot(a);
    throw ConfigError("unknown command '" + a.cmd + "' (see evflex --help)");
}

}

int main(int argc, char** argv) {
    try {
        return dispatch(parse_args(argc, argv));
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
