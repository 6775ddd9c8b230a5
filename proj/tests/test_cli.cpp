// End-to-end checks of the evflex executable: subcommands, exit codes,
// deterministic outputs, and the embedded version/config-hash header.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Scratch directory per test case, removed on destruction.
struct Scratch {
    fs::path dir;
    Scratch() {
        static std::atomic<int> counter{0};
        dir = fs::temp_directory_path() /
              ("evflex_cli_" + std::to_string(::getpid()) + "_" +
               std::to_string(counter.fetch_add(1)));
        fs::create_directories(dir);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    fs::path operator/(const std::string& name) const { return dir / name; }
};

CliResult run_cli(const Scratch& scratch, const std::string& args) {
    const fs::path out = scratch / "stdout.txt";
    const fs::path err = scratch / "stderr.txt";
    const std::string cmd = std::string(EVFLEX_CLI_PATH) + " " + args + " > " + out.string() +
                            " 2> " + err.string();
    int rc = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

// Small fleet + short horizon so each invocation stays in the tens of
// milliseconds.
fs::path write_small_config(const Scratch& scratch) {
    const fs::path fleet = scratch / "fleet.txt";
    {
        std::ofstream f(fleet);
        f << "type type1\nrated_power_kw 40\ncapacity_kwh 60\nmin_energy_kwh 5\n"
             "efficiency 0.95\ncount 3\n\n"
             "type type2\nrated_power_kw 60\ncapacity_kwh 82\nmin_energy_kwh 10\n"
             "efficiency 0.95\ncount 3\n";
    }
    const fs::path cfg = scratch / "run.txt";
    {
        std::ofstream f(cfg);
        f << "fleet = " << fleet.string() << "\nhorizon = 4\nseed = 3\nepsilon = 0.02\n";
    }
    return cfg;
}

std::vector<std::string> data_lines(const std::string& text) {
    std::vector<std::string> rows;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line))
        if (!line.empty() && line[0] != '#') rows.push_back(line);
    return rows;
}

std::string header_hash(const std::string& text) {
    const std::string tag = "# config_hash ";
    size_t pos = text.find(tag);
    REQUIRE(pos != std::string::npos);
    return text.substr(pos + tag.size(), 16);
}

}

TEST_CASE("version and help exit cleanly", "[cli]") {
    Scratch s;
    CliResult v = run_cli(s, "--version");
    CHECK(v.code == 0);
    CHECK(v.out.find("evflex ") == 0);
    CliResult h = run_cli(s, "--help");
    CHECK(h.code == 0);
    CHECK(h.out.find("usage: evflex") != std::string::npos);
    CliResult none = run_cli(s, "");
    CHECK(none.code == 1);
}

TEST_CASE("simulate writes deterministic trace and scorecard", "[cli]") {
    Scratch s;
    fs::path cfg = write_small_config(s);
    CliResult r1 = run_cli(s, "simulate --config " + cfg.string() + " --out-dir " +
                                  (s / "a").string());
    REQUIRE(r1.code == 0);
    CliResult r2 = run_cli(s, "simulate --config " + cfg.string() + " --out-dir " +
                                  (s / "b").string());
    REQUIRE(r2.code == 0);
    const std::string trace_a = slurp(s / "a" / "trace_M4.tsv");
    CHECK(trace_a == slurp(s / "b" / "trace_M4.tsv"));
    const std::string card_a = slurp(s / "a" / "scorecard.tsv");
    CHECK(card_a == slurp(s / "b" / "scorecard.tsv"));
    CHECK(trace_a.find("# evflex ") == 0);
    CHECK(trace_a.find("# config_hash ") != std::string::npos);
    // every data row of the scorecard repeats the header hash
    const std::string hash = header_hash(card_a);
    for (const std::string& row : data_lines(card_a))
        CHECK(row.find(hash) != std::string::npos);
}

TEST_CASE("flag overrides show up in the config hash", "[cli]") {
    Scratch s;
    fs::path cfg = write_small_config(s);
    CliResult a = run_cli(s, "simulate --config " + cfg.string() + " --seed 5 --out-dir " +
                                 (s / "a").string());
    CliResult b = run_cli(s, "simulate --config " + cfg.string() + " --seed 6 --out-dir " +
                                 (s / "b").string());
    CliResult c = run_cli(s, "simulate --config " + cfg.string() + " --seed 5 --out-dir " +
                                 (s / "c").string());
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    REQUIRE(c.code == 0);
    const std::string ha = header_hash(slurp(s / "a" / "scorecard.tsv"));
    const std::string hb = header_hash(slurp(s / "b" / "scorecard.tsv"));
    const std::string hc = header_hash(slurp(s / "c" / "scorecard.tsv"));
    CHECK(ha != hb);
    CHECK(ha == hc);
}

TEST_CASE("compare lists four methods and is worker-count invariant", "[cli]") {
    Scratch s;
    fs::path cfg = write_small_config(s);
    CliResult r1 = run_cli(s, "compare --config " + cfg.string() + " --out-dir " +
                                  (s / "a").string());
    REQUIRE(r1.code == 0);
    CliResult r4 = run_cli(s, "compare --config " + cfg.string() + " --jobs 4 --out-dir " +
                                  (s / "b").string());
    REQUIRE(r4.code == 0);
    const std::string table = slurp(s / "a" / "compare.tsv");
    CHECK(table == slurp(s / "b" / "compare.tsv"));
    std::vector<std::string> rows = data_lines(table);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].find("M1\t") == 0);
    CHECK(rows[1].find("M2\t") == 0);
    CHECK(rows[2].find("M3\t") == 0);
    CHECK(rows[3].find("M4\t") == 0);
}

TEST_CASE("gamma sweep emits one row per budget", "[cli]") {
    Scratch s;
    fs::path cfg = write_small_config(s);
    CliResult r = run_cli(s, "gamma-sweep --config " + cfg.string() +
                                 " --gammas 1.0,0.5 --out-dir " + (s / "a").string());
    REQUIRE(r.code == 0);
    std::vector<std::string> rows = data_lines(slurp(s / "a" / "gamma_sweep.tsv"));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].find("M4\t1\t") == 0);
    CHECK(rows[1].find("M4\t0.5\t") == 0);
    CliResult bad = run_cli(s, "gamma-sweep --config " + cfg.string() + " --gammas 1.5");
    CHECK(bad.code == 1);
}

TEST_CASE("scale table is deterministic apart from wall times", "[cli]") {
    Scratch s;
    fs::path cfg = write_small_config(s);
    auto strip_times = [](const std::string& text) {
        std::string out;
        for (const std::string& row : data_lines(text)) {
            std::stringstream ss(row);
            std::string field;
            std::vector<std::string> fields;
            while (std::getline(ss, field, '\t')) fields.push_back(field);
            REQUIRE(fields.size() == 9);
            fields[1] = fields[2] = "-";  // build_s, solve_s
            for (const std::string& f2 : fields) out += f2 + "|";
            out += "\n";
        }
        return out;
    };
    CliResult r1 = run_cli(s, "scale --config " + cfg.string() + " --counts 1,8 --out-dir " +
                                  (s / "a").string());
    REQUIRE(r1.code == 0);
    CliResult r2 = run_cli(s, "scale --config " + cfg.string() + " --counts 1,8 --out-dir " +
                                  (s / "b").string());
    REQUIRE(r2.code == 0);
    const std::string a = slurp(s / "a" / "scale.tsv");
    CHECK(strip_times(a) == strip_times(slurp(s / "b" / "scale.tsv")));
    CHECK(data_lines(a).size() == 2);
}

TEST_CASE("ingest normalizes sessions and emits ratio samples", "[cli]") {
    Scratch s;
    fs::path cfg = write_small_config(s);
    const std::string sessions = std::string(EVFLEX_DATA_DIR) + "/sessions_example.csv";
    CliResult r = run_cli(s, "ingest --sessions " + sessions + " --config " + cfg.string() +
                                 " --out-dir " + (s / "a").string());
    REQUIRE(r.code == 0);
    std::vector<std::string> rows = data_lines(slurp(s / "a" / "sessions_normalized.csv"));
    REQUIRE(rows.size() == 7);  // column header + six sessions
    CHECK(rows[0] == "ev_id,type,arrival,reported_departure,actual_departure,arrival_soc");
    std::vector<std::string> u_rows = data_lines(slurp(s / "a" / "u_samples.tsv"));
    REQUIRE(!u_rows.empty());
    for (const std::string& row : u_rows) {
        std::stringstream ss(row);
        int k;
        double u;
        ss >> k >> u;
        CHECK(u >= 0.0);
        CHECK(u <= 1.0);
    }
}

TEST_CASE("plot rebuilds the band series from a trace", "[cli]") {
    Scratch s;
    fs::path cfg = write_small_config(s);
    REQUIRE(run_cli(s, "simulate --config " + cfg.string() + " --out-dir " + (s / "a").string())
                .code == 0);
    const fs::path trace = s / "a" / "trace_M4.tsv";
    CliResult r = run_cli(s, "plot --trace " + trace.string() + " --out-dir " +
                                 (s / "p").string());
    REQUIRE(r.code == 0);
    const std::string bands = slurp(s / "p" / "bands.tsv");
    CHECK(data_lines(bands).size() == 4);  // one row per interval
    // the series keeps the producing run's hash
    CHECK(header_hash(bands) == header_hash(slurp(trace)));

    // a trace whose header parses but holds no rows is a data error
    const fs::path empty = s / "empty.tsv";
    {
        std::ofstream f(empty);
        std::stringstream ss(slurp(trace));
        std::string line;
        while (std::getline(ss, line))
            if (!line.empty() && line[0] == '#') f << line << "\n";
    }
    CliResult bad = run_cli(s, "plot --trace " + empty.string());
    CHECK(bad.code == 2);
    CHECK(bad.err.find("empty trace") != std::string::npos);
}

TEST_CASE("exit codes separate config, data, and usage errors", "[cli]") {
    Scratch s;
    fs::path cfg = write_small_config(s);

    CliResult unknown_cmd = run_cli(s, "frobnicate");
    CHECK(unknown_cmd.code == 1);

    CliResult unknown_flag = run_cli(s, "simulate --frob 1");
    CHECK(unknown_flag.code == 1);

    CliResult no_cfg = run_cli(s, "simulate --config " + (s / "missing.txt").string());
    CHECK(no_cfg.code == 1);
    CHECK(no_cfg.err.find("missing.txt") != std::string::npos);

    CliResult bad_backend = run_cli(s, "simulate --config " + cfg.string() + " --solver cplex");
    CHECK(bad_backend.code == 1);
    CHECK(bad_backend.err.find("config key: solver") != std::string::npos);

    const fs::path empty_sessions = s / "none.csv";
    { std::ofstream f(empty_sessions); f << "# nothing here\n"; }
    CliResult no_rows = run_cli(s, "ingest --sessions " + empty_sessions.string() +
                                       " --config " + cfg.string());
    CHECK(no_rows.code == 2);
    CHECK(no_rows.err.find("no sessions") != std::string::npos);

    const fs::path bad_rows = s / "bad.csv";
    {
        std::ofstream f(bad_rows);
        f << "ev_id,type,arrival,reported_departure,actual_departure,arrival_soc\n"
             "7,type1,0,12,oops,30\n";
    }
    CliResult malformed = run_cli(s, "ingest --sessions " + bad_rows.string() + " --config " +
                                         cfg.string());
    CHECK(malformed.code == 2);
    CHECK(malformed.err.find(":2:") != std::string::npos);
}

TEST_CASE("config files reject typos instead of guessing", "[cli]") {
    Scratch s;
    const fs::path cfg = s / "typo.txt";
    { std::ofstream f(cfg); f << "windw = 20\n"; }
    CliResult r = run_cli(s, "simulate --config " + cfg.string());
    CHECK(r.code == 1);
    CHECK(r.err.find("unknown config key 'windw'") != std::string::npos);
    CHECK(r.err.find("typo.txt:1") != std::string::npos);

    const fs::path dup = s / "dup.txt";
    { std::ofstream f(dup); f << "seed = 1\nseed = 2\n"; }
    CliResult r2 = run_cli(s, "simulate --config " + dup.string());
    CHECK(r2.code == 1);
    CHECK(r2.err.find("duplicate config key 'seed'") != std::string::npos);
}
