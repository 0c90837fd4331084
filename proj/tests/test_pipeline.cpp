#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "oracles.hpp"
#include "profgen/bench.hpp"
#include "profgen/daemon.hpp"
#include "profgen/pipeline.hpp"

using namespace profgen;
namespace fs = std::filesystem;

namespace {

// Contents of every regular file under root, keyed by relative path, with
// the timing report excluded.
std::map<std::string, std::string> tree_without_report(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = entry.path().lexically_relative(root).generic_string();
        if (rel == kReportFileName) continue;
        out[rel] = read_text_file(entry.path());
    }
    return out;
}

struct SmallWorld {
    TempDir dir{"profgen_test_pipe_"};
    fs::path index_dir;
    fs::path query_path;
    size_t query_count;

    explicit SmallWorld(size_t db_size = 1000, size_t queries = 3, uint64_t seed = 2025) {
        BenchScenario scenario;
        scenario.db_size = db_size;
        scenario.mean_len = 60;
        scenario.len_sd = 10;
        scenario.query_count = queries;
        scenario.homolog_count = 2;
        scenario.mutation_rate = 0.0;  // plant exact copies
        scenario.seed = seed;
        query_count = queries;
        const auto matrix = load_matrix("BLOSUM62");
        const auto data = generate_db(scenario, matrix);
        write_text_file(dir.path() / "db.fasta", data.db_fasta);
        query_path = dir.path() / "queries.fasta";
        write_text_file(query_path, data.queries_fasta);
        std::istringstream in(data.db_fasta);
        auto [db, idx] = build_index(in, 5);
        index_dir = dir.path() / "index";
        save_index(db, idx, index_dir);
    }

    PipelineConfig config(const fs::path& workdir) const {
        PipelineConfig cfg;
        cfg.index_dir = index_dir;
        cfg.query_path = query_path;
        cfg.workdir = workdir;
        return cfg;
    }
};

}  // namespace

TEST_CASE("end-to-end: a query present verbatim in the database gets a full profile") {
    SmallWorld world;
    auto cfg = world.config(world.dir.path() / "work");
    const auto report = run_pipeline(cfg);

    CHECK(report.query_count == world.query_count);
    std::ifstream qf(world.query_path, std::ios::binary);
    const auto queries = parse_fasta(qf);
    const auto dirs = assign_query_dirs(queries);
    for (size_t q = 0; q < queries.size(); ++q) {
        const auto pssm_path = cfg.workdir / dirs[q] / "pssm.ascii";
        REQUIRE(fs::exists(pssm_path));
        std::ifstream in(pssm_path, std::ios::binary);
        std::string line;
        size_t rows = 0;
        while (std::getline(in, line))
            if (!line.empty() && line[0] != '#') ++rows;
        CHECK(rows == queries[q].length());
        // Exact planted copies must be in the golden set.
        CHECK(report.queries[q].hits >= 1);
        CHECK(report.queries[q].golden_size >= 2);
        CHECK(report.queries[q].profile_emitted);
    }
    CHECK(fs::exists(cfg.workdir / kTupleFileName));
    CHECK(fs::exists(cfg.workdir / kReportFileName));
}

TEST_CASE("worker count does not change any output byte") {
    SmallWorld world(1200, 25, 77);
    auto cfg1 = world.config(world.dir.path() / "w1");
    cfg1.workers = 1;
    auto cfg4 = world.config(world.dir.path() / "w4");
    cfg4.workers = 4;
    cfg1.outputs = cfg4.outputs = OutputSelection{true, true, true};
    run_pipeline(cfg1);
    run_pipeline(cfg4);
    const auto t1 = tree_without_report(cfg1.workdir);
    const auto t4 = tree_without_report(cfg4.workdir);
    REQUIRE(t1.size() == t4.size());
    for (const auto& [name, content] : t1) {
        REQUIRE(t4.count(name) == 1);
        CHECK(t4.at(name) == content);
    }
}

TEST_CASE("queries shorter than k complete with a query-only profile and a warning") {
    SmallWorld world(200, 1, 5);
    // Append a short query to the batch.
    auto fasta = read_text_file(world.query_path);
    fasta += ">tiny\nACD\n";
    write_text_file(world.query_path, fasta);

    auto cfg = world.config(world.dir.path() / "work");
    const auto report = run_pipeline(cfg);
    REQUIRE(report.queries.size() == 2);
    CHECK(report.queries[1].hits == 0);
    CHECK(report.queries[1].golden_size == 1);
    CHECK(report.queries[1].profile_emitted);
    REQUIRE(report.warnings.size() == 1);
    CHECK(report.warnings[0].find("tiny") != std::string::npos);
    CHECK(fs::exists(cfg.workdir / "tiny" / "pssm.ascii"));
}

TEST_CASE("pipeline validation errors") {
    SmallWorld world(100, 1, 9);
    SUBCASE("empty query file") {
        write_text_file(world.query_path, "");
        auto cfg = world.config(world.dir.path() / "work");
        CHECK_THROWS_WITH_AS(run_pipeline(cfg), doctest::Contains("empty query"), InputError);
    }
    SUBCASE("k mismatch against the index") {
        auto cfg = world.config(world.dir.path() / "work");
        cfg.k = 6;
        CHECK_THROWS_WITH_AS(run_pipeline(cfg), doctest::Contains("k="), InputError);
    }
    SUBCASE("no outputs requested") {
        auto cfg = world.config(world.dir.path() / "work");
        cfg.outputs = OutputSelection{false, false, false};
        CHECK_THROWS_AS(run_pipeline(cfg), UsageError);
    }
    SUBCASE("missing index directory") {
        auto cfg = world.config(world.dir.path() / "work");
        cfg.index_dir = world.dir.path() / "nowhere";
        CHECK_THROWS_AS(run_pipeline(cfg), InputError);
    }
}

TEST_CASE("outputs selection controls which files appear") {
    SmallWorld world(300, 2, 12);
    auto cfg = world.config(world.dir.path() / "work");
    cfg.outputs = OutputSelection::parse("alignments,pssm");
    run_pipeline(cfg);
    std::ifstream qf(world.query_path, std::ios::binary);
    const auto dirs = assign_query_dirs(parse_fasta(qf));
    CHECK(fs::exists(cfg.workdir / dirs[0] / "alignments.tsv"));
    CHECK(fs::exists(cfg.workdir / dirs[0] / "pssm.bin"));
    CHECK(!fs::exists(cfg.workdir / dirs[0] / "pssm.ascii"));

    // The binary profile round-trips.
    std::ifstream bin(cfg.workdir / dirs[0] / "pssm.bin", std::ios::binary);
    const auto pssm = read_binary_pssm(bin);
    CHECK(!pssm.columns.empty());

    CHECK_THROWS_AS(OutputSelection::parse("nonsense"), UsageError);
}

TEST_CASE("an external profiler command takes over profile generation") {
    SmallWorld world(200, 2, 21);
    // Stand-in profiler: records its inputs and writes a marker profile.
    const auto script = world.dir.path() / "fake_profiler.sh";
    write_text_file(script,
                    "#!/bin/sh\n"
                    "test -s \"$1\" || exit 3\n"
                    "test -s \"$2\" || exit 3\n"
                    "printf 'external query=%s golden=%s evalue=%s\\n' \"$1\" \"$2\" \"$4\" "
                    "> \"$3/pssm.ascii\"\n");
    fs::permissions(script, fs::perms::owner_all);

    auto cfg = world.config(world.dir.path() / "work");
    cfg.external_profiler = "'" + script.string() + "' '{query}' '{golden}' '{outdir}' '{evalue}'";
    const auto report = run_pipeline(cfg);
    CHECK(report.queries[0].profile_emitted);

    std::ifstream qf(world.query_path, std::ios::binary);
    const auto dirs = assign_query_dirs(parse_fasta(qf));
    for (const auto& d : dirs) {
        const auto content = read_text_file(cfg.workdir / d / "pssm.ascii");
        CHECK(content.substr(0, 8) == "external");
        CHECK(content.find("evalue=10") != std::string::npos);
    }

    SUBCASE("nonzero exit codes are mapped to errors naming the query") {
        auto bad = world.config(world.dir.path() / "work2");
        bad.external_profiler = "exit 7";
        CHECK_THROWS_WITH_AS(run_pipeline(bad), doctest::Contains("exited with code 7"),
                             InputError);
    }
}

TEST_CASE("PROFGEN_WORKERS is honored unless the config overrides it") {
    PipelineConfig cfg;
    setenv("PROFGEN_WORKERS", "3", 1);
    CHECK(resolve_workers(cfg) == 3);
    cfg.workers = 7;
    CHECK(resolve_workers(cfg) == 7);
    unsetenv("PROFGEN_WORKERS");
}

TEST_CASE("daemon answers repeated queries from a resident index") {
    SmallWorld world(400, 2, 33);
    const auto socket_path = world.dir.path() / "pg.sock";
    std::thread server([&] { daemon_serve(world.index_dir, socket_path); });
    while (!fs::exists(socket_path)) std::this_thread::sleep_for(std::chrono::milliseconds(10));

    const auto fasta = read_text_file(world.query_path);
    const auto first = daemon_query(socket_path, fasta);
    const auto second = daemon_query(socket_path, fasta);
    CHECK(first.size() == second.size());

    std::map<std::string, std::string> files1, files2;
    for (const auto& f : first) files1[f.name] = f.content;
    for (const auto& f : second) files2[f.name] = f.content;
    for (auto& [name, content] : files1) {
        if (name == kReportFileName) {
            // The residency contract: no index load inside the request.
            CHECK(content.find("index_load_ms=0\n") != std::string::npos);
            CHECK(files2.at(name).find("index_load_ms=0\n") != std::string::npos);
        } else {
            CHECK(files2.at(name) == content);
        }
    }

    SUBCASE("config overrides travel with the request") {
        // max_seqs=1 leaves room for nothing but the query slot.
        const auto constrained = daemon_query(socket_path, fasta, "max_seqs=1\nout=ascii-pssm\n");
        bool saw_report = false;
        for (const auto& f : constrained)
            if (f.name == kReportFileName) {
                saw_report = true;
                CHECK(f.content.find(".golden=1\n") != std::string::npos);
                CHECK(f.content.find(".golden=3\n") == std::string::npos);
            }
        CHECK(saw_report);
    }
    SUBCASE("bad FASTA payloads come back as malformed-request errors") {
        CHECK_THROWS_WITH_AS(daemon_query(socket_path, "not fasta at all"),
                             doctest::Contains("status 2"), InputError);
    }
    SUBCASE("unknown config keys are rejected") {
        CHECK_THROWS_WITH_AS(daemon_query(socket_path, fasta, "bogus_key=1\n"),
                             doctest::Contains("status 2"), InputError);
    }

    daemon_shutdown(socket_path);
    server.join();
    CHECK(!fs::exists(socket_path));
}

TEST_CASE("daemon and CLI-style runs produce identical output files") {
    SmallWorld world(500, 3, 44);
    auto cfg = world.config(world.dir.path() / "cli_work");
    run_pipeline(cfg);
    const auto cli_tree = tree_without_report(cfg.workdir);

    const auto socket_path = world.dir.path() / "pg2.sock";
    std::thread server([&] { daemon_serve(world.index_dir, socket_path); });
    while (!fs::exists(socket_path)) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    const auto files = daemon_query(socket_path, read_text_file(world.query_path));
    daemon_shutdown(socket_path);
    server.join();

    std::map<std::string, std::string> daemon_tree;
    for (const auto& f : files)
        if (f.name != kReportFileName) daemon_tree[f.name] = f.content;
    CHECK(daemon_tree == cli_tree);
}

TEST_CASE("oversized frames are refused with status 3") {
    SmallWorld world(100, 1, 55);
    const auto socket_path = world.dir.path() / "pg3.sock";
    DaemonOptions opts;
    opts.frame_cap = 64;
    std::thread server([&] { daemon_serve(world.index_dir, socket_path, {}, opts); });
    while (!fs::exists(socket_path)) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    CHECK_THROWS_WITH_AS(daemon_query(socket_path, std::string(1000, 'A')),
                         doctest::Contains("status 3"), InputError);
    daemon_shutdown(socket_path);
    server.join();
}
