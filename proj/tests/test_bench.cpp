#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "profgen/bench.hpp"

using namespace profgen;

namespace {

const SubstitutionMatrix& blosum62() {
    static const SubstitutionMatrix m = load_matrix("BLOSUM62");
    return m;
}

}  // namespace

TEST_CASE("scenario files parse and validate") {
    std::istringstream in(
        "# comment\n"
        "db_size=500\n"
        "mean_len=120\n"
        "len_sd=20\n"
        "batch_sizes=1,5,10\n"
        "seed=99\n"
        "mutation_rate=0.15\n"
        "homolog_count=4\n"
        "repeats=2\n");
    const auto s = parse_scenario(in);
    CHECK(s.db_size == 500);
    CHECK(s.batch_sizes == std::vector<size_t>{1, 5, 10});
    CHECK(s.mutation_rate == 0.15);
    CHECK(s.effective_query_count() == 10);

    std::istringstream bad("db_size=10\nhomolog_count=5\nquery_count=3\n");
    CHECK_THROWS_WITH_AS(parse_scenario(bad), doctest::Contains("too small"), InputError);
    std::istringstream junk("no_such_key=1\n");
    CHECK_THROWS_WITH_AS(parse_scenario(junk), doctest::Contains("unknown key"), InputError);
}

TEST_CASE("generation is byte-identical for a fixed seed") {
    BenchScenario s;
    s.db_size = 200;
    s.query_count = 5;
    s.homolog_count = 3;
    s.seed = 1234;
    const auto a = generate_db(s, blosum62());
    const auto b = generate_db(s, blosum62());
    CHECK(a.db_fasta == b.db_fasta);
    CHECK(a.queries_fasta == b.queries_fasta);
    CHECK(a.planted == 15);

    s.seed = 1235;
    const auto c = generate_db(s, blosum62());
    CHECK(c.db_fasta != a.db_fasta);
}

TEST_CASE("zero mutation rate plants byte-equal homolog copies") {
    BenchScenario s;
    s.db_size = 100;
    s.query_count = 4;
    s.homolog_count = 2;
    s.mutation_rate = 0.0;
    const auto data = generate_db(s, blosum62());
    std::istringstream dbin(data.db_fasta), qin(data.queries_fasta);
    const auto db = parse_fasta(dbin);
    const auto queries = parse_fasta(qin);
    size_t found = 0;
    for (size_t q = 0; q < queries.size(); ++q)
        for (size_t c = 0; c < s.homolog_count; ++c)
            for (const auto& rec : db)
                if (rec.id() == plant_id(q, c)) {
                    ++found;
                    CHECK(rec.residues == queries[q].residues);
                }
    CHECK(found == 8);
}

TEST_CASE("mutated plants differ in a binomial number of positions") {
    BenchScenario s;
    s.db_size = 250;
    s.query_count = 40;
    s.homolog_count = 5;  // 200 plants
    s.mutation_rate = 0.1;
    s.query_lengths.assign(40, 300);
    const auto data = generate_db(s, blosum62());
    std::istringstream dbin(data.db_fasta), qin(data.queries_fasta);
    const auto db = parse_fasta(dbin);
    const auto queries = parse_fasta(qin);

    double total_diffs = 0;
    size_t plants = 0;
    for (size_t q = 0; q < queries.size(); ++q)
        for (size_t c = 0; c < s.homolog_count; ++c)
            for (const auto& rec : db)
                if (rec.id() == plant_id(q, c)) {
                    REQUIRE(rec.residues.size() == 300);
                    size_t diffs = 0;
                    for (size_t i = 0; i < 300; ++i)
                        diffs += rec.residues[i] != queries[q].residues[i];
                    total_diffs += static_cast<double>(diffs);
                    ++plants;
                }
    REQUIRE(plants == 200);
    const double mean = total_diffs / static_cast<double>(plants);
    // Binomial(300, 0.1): mean 30, SE of the sample mean 5.196/sqrt(200).
    const double se = std::sqrt(300 * 0.1 * 0.9) / std::sqrt(200.0);
    CHECK(mean > 30.0 - 3.0 * se);
    CHECK(mean < 30.0 + 3.0 * se);
}

TEST_CASE("planted_recall counts golden membership") {
    GoldenSet set;
    set.query = {"q0", {0, 1, 2, 3, 4}};
    set.members.push_back(set.query);
    set.members.push_back({plant_id(0, 0), {0, 1, 2, 3, 4}});
    set.members.push_back({"t999", {0, 1, 2}});
    size_t found = 0, total = 0;
    const double recall = planted_recall({set}, 2, &found, &total);
    CHECK(found == 1);
    CHECK(total == 2);
    CHECK(recall == 0.5);
}

TEST_CASE("a tiny scaling sweep produces one CSV row per batch size") {
    BenchScenario s;
    s.db_size = 250;
    s.mean_len = 60;
    s.len_sd = 10;
    s.batch_sizes = {1, 3};
    s.homolog_count = 2;
    s.repeats = 1;
    s.seed = 31;
    TempDir dir("profgen_test_bench_");
    const auto env = prepare_bench(s, dir.path());
    const auto rows = run_scaling(env);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].x == 1);
    CHECK(rows[1].x == 3);
    for (const auto& r : rows) {
        CHECK(r.pipeline_ms >= 0);
        CHECK(r.baseline_ms >= 0);
    }
    const auto csv = scaling_csv(rows, "batch_size");
    CHECK(csv.substr(0, 35) == "batch_size,pipeline_ms,baseline_ms\n");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

    size_t found = 0, total = 0;
    const double recall = measure_recall(env, &found, &total);
    CHECK(total == env.planted);
    CHECK(recall == 1.0);  // exact copies at mutation_rate 0.1 over length 60
}

TEST_CASE("baseline and pipeline golden sets agree on planted homologs") {
    BenchScenario s;
    s.db_size = 150;
    s.mean_len = 80;
    s.len_sd = 5;
    s.query_count = 3;
    s.homolog_count = 3;
    s.mutation_rate = 0.1;
    s.seed = 8;
    TempDir dir("profgen_test_bench2_");
    const auto env = prepare_bench(s, dir.path());

    const auto matrix = load_matrix("BLOSUM62");
    const auto gaps = default_gapped_params(matrix);
    const auto db = load_target_db(env.index_dir);
    baseline_run(env.queries, db, matrix, gaps, dir.path() / "base", s.max_seqs, 2);
    const auto dirs = assign_query_dirs(env.queries);
    std::vector<GoldenSet> sets;
    for (size_t q = 0; q < env.queries.size(); ++q) {
        std::ifstream in(dir.path() / "base" / dirs[q] / "golden.fasta", std::ios::binary);
        REQUIRE(in.good());
        GoldenSet set;
        set.members = parse_fasta(in);
        set.query = set.members.at(0);
        sets.push_back(std::move(set));
    }
    CHECK(planted_recall(sets, s.homolog_count) == 1.0);
    CHECK(measure_recall(env) >= 0.9);
}

TEST_CASE("length sweeps need explicit query lengths") {
    BenchScenario s;
    s.db_size = 100;
    s.homolog_count = 1;
    s.query_count = 2;
    TempDir dir("profgen_test_bench3_");
    const auto env = prepare_bench(s, dir.path());
    CHECK_THROWS_AS(run_length_sweep(env), InputError);
}

TEST_CASE("a tiny length sweep emits one row per requested length") {
    BenchScenario s;
    s.db_size = 200;
    s.homolog_count = 2;
    s.query_lengths = {40, 90};
    s.repeats = 1;
    s.seed = 3;
    TempDir dir("profgen_test_bench4_");
    const auto env = prepare_bench(s, dir.path());
    REQUIRE(env.queries.size() == 2);
    CHECK(env.queries[0].length() == 40);
    CHECK(env.queries[1].length() == 90);
    const auto rows = run_length_sweep(env);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].x == 40);
    CHECK(rows[1].x == 90);
    const auto csv = scaling_csv(rows, "query_len");
    CHECK(csv.substr(0, 34) == "query_len,pipeline_ms,baseline_ms\n");
}

TEST_CASE("spearman correlation behaves at the extremes") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {40, 30, 20, 10}) == doctest::Approx(-1.0));
}

TEST_CASE("scaling summary flags follow the documented thresholds") {
    std::vector<ScalingRow> rows{{1, 100, 100}, {50, 300, 3000}};
    const auto s = summarize_scaling(rows);
    CHECK(s.baseline_ratio == doctest::Approx(30.0));
    CHECK(s.pipeline_ratio == doctest::Approx(3.0));
    CHECK(s.baseline_scales_linearly);
    CHECK(s.pipeline_stays_flat);
    CHECK(s.to_kv().find("pipeline_stays_flat=pass") != std::string::npos);
}
