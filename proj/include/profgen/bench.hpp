#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "profgen/align.hpp"
#include "profgen/errors.hpp"
#include "profgen/fasta.hpp"
#include "profgen/goldendb.hpp"
#include "profgen/pipeline.hpp"

namespace profgen {

// Synthetic-data scenario. Queries are generated alongside the database and
// each query gets homolog_count mutated copies planted into the database so
// searches have known true positives.
struct BenchScenario {
    size_t db_size = 1000;
    double mean_len = 200.0;
    double len_sd = 40.0;
    std::vector<size_t> batch_sizes = {1, 5, 10, 25, 50};
    uint64_t seed = 42;
    double mutation_rate = 0.1;
    size_t homolog_count = 5;
    size_t query_count = 0;             // 0: max(batch_sizes)
    std::vector<size_t> query_lengths;  // nonempty: one query per length
    int k = 5;
    size_t max_seqs = 1000;
    int repeats = 3;
    unsigned workers = 0;

    size_t effective_query_count() const {
        if (!query_lengths.empty()) return query_lengths.size();
        if (query_count > 0) return query_count;
        size_t m = 1;
        for (size_t b : batch_sizes) m = std::max(m, b);
        return m;
    }

    void validate() const {
        if (db_size < 1) throw InputError("scenario: db_size must be >= 1");
        if (mutation_rate < 0.0 || mutation_rate > 1.0)
            throw InputError("scenario: mutation_rate must be in [0,1]");
        for (size_t b : batch_sizes)
            if (b < 1) throw InputError("scenario: batch sizes must be >= 1");
        if (effective_query_count() * homolog_count >= db_size)
            throw InputError("scenario: db_size too small for the planted homologs");
        if (!query_lengths.empty())
            for (size_t l : query_lengths)
                if (l < static_cast<size_t>(k)) throw InputError("scenario: query length below k");
    }
};

inline BenchScenario parse_scenario(std::istream& in) {
    BenchScenario s;
    std::string line;
    size_t line_no = 0;
    const auto parse_list = [](const std::string& v) {
        std::vector<size_t> out;
        std::istringstream ls(v);
        std::string item;
        while (std::getline(ls, item, ',')) out.push_back(std::stoul(item));
        return out;
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw InputError("scenario line " + std::to_string(line_no) + ": expected key=value");
        const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        if (key == "db_size")
            s.db_size = std::stoul(value);
        else if (key == "mean_len")
            s.mean_len = std::stod(value);
        else if (key == "len_sd")
            s.len_sd = std::stod(value);
        else if (key == "batch_sizes")
            s.batch_sizes = parse_list(value);
        else if (key == "seed")
            s.seed = std::stoull(value);
        else if (key == "mutation_rate")
            s.mutation_rate = std::stod(value);
        else if (key == "homolog_count")
            s.homolog_count = std::stoul(value);
        else if (key == "query_count")
            s.query_count = std::stoul(value);
        else if (key == "query_lengths")
            s.query_lengths = parse_list(value);
        else if (key == "k")
            s.k = std::stoi(value);
        else if (key == "max_seqs")
            s.max_seqs = std::stoul(value);
        else if (key == "repeats")
            s.repeats = std::stoi(value);
        else if (key == "workers")
            s.workers = static_cast<unsigned>(std::stoul(value));
        else
            throw InputError("scenario line " + std::to_string(line_no) + ": unknown key '" +
                             key + "'");
    }
    s.validate();
    return s;
}

namespace detail {

// Self-contained generator: identical bytes for identical seeds regardless
// of standard-library distribution implementations.
class SynthRng {
public:
    explicit SynthRng(uint64_t seed) : engine_(seed) {}

    double uniform() {  // [0, 1)
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    size_t uniform_below(size_t n) { return static_cast<size_t>(uniform() * static_cast<double>(n)); }

    double gaussian() {
        const double u1 = std::max(uniform(), 1e-12);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

private:
    std::mt19937_64 engine_;
};

inline uint8_t sample_residue(SynthRng& rng, const std::array<double, kNumResidues>& background) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (int i = 0; i < kNumResidues; ++i) {
        acc += background[i];
        if (u < acc) return static_cast<uint8_t>(i);
    }
    return kNumResidues - 1;
}

inline uint8_t sample_other_residue(SynthRng& rng,
                                    const std::array<double, kNumResidues>& background,
                                    uint8_t avoid) {
    for (;;) {
        const uint8_t r = sample_residue(rng, background);
        if (r != avoid) return r;
    }
}

}  // namespace detail

inline std::string plant_id(size_t query_index, size_t copy_index) {
    return "h" + std::to_string(query_index) + "_" + std::to_string(copy_index);
}

struct SyntheticData {
    std::string db_fasta;
    std::string queries_fasta;
    size_t planted = 0;
};

// Deterministic synthetic database + query batch. Residues are drawn from
// the scoring matrix's background so synthetic data matches the statistics
// the e-values assume.
inline SyntheticData generate_db(const BenchScenario& scenario, const SubstitutionMatrix& matrix) {
    scenario.validate();
    detail::SynthRng rng(scenario.seed);
    const size_t n_queries = scenario.effective_query_count();

    const auto draw_length = [&]() {
        const double l = scenario.mean_len + scenario.len_sd * rng.gaussian();
        return static_cast<size_t>(
            std::max<double>(std::max<size_t>(scenario.k, 20), std::llround(l)));
    };
    const auto random_sequence = [&](size_t len) {
        std::vector<uint8_t> seq(len);
        for (auto& r : seq) r = detail::sample_residue(rng, matrix.background);
        return seq;
    };

    std::vector<SequenceRecord> queries(n_queries);
    for (size_t q = 0; q < n_queries; ++q) {
        const size_t len =
            scenario.query_lengths.empty() ? draw_length() : scenario.query_lengths[q];
        queries[q] = {"q" + std::to_string(q), random_sequence(len)};
    }

    std::vector<SequenceRecord> db_records;
    db_records.reserve(scenario.db_size);
    for (size_t q = 0; q < n_queries; ++q) {
        for (size_t c = 0; c < scenario.homolog_count; ++c) {
            SequenceRecord plant{plant_id(q, c), queries[q].residues};
            for (auto& r : plant.residues)
                if (rng.uniform() < scenario.mutation_rate)
                    r = detail::sample_other_residue(rng, matrix.background, r);
            db_records.push_back(std::move(plant));
        }
    }
    const size_t planted = db_records.size();
    for (size_t i = db_records.size(); i < scenario.db_size; ++i)
        db_records.push_back({"t" + std::to_string(i), random_sequence(draw_length())});

    // Deterministic Fisher-Yates so plants are spread through the database.
    for (size_t i = db_records.size(); i > 1; --i)
        std::swap(db_records[i - 1], db_records[rng.uniform_below(i)]);

    SyntheticData data;
    data.planted = planted;
    std::ostringstream db_out, q_out;
    write_fasta(db_records, db_out);
    write_fasta(queries, q_out);
    data.db_fasta = db_out.str();
    data.queries_fasta = q_out.str();
    return data;
}

// Fraction of planted homologs of the first `batch` queries that made it
// into their query's golden set.
inline double planted_recall(const std::vector<GoldenSet>& golden_sets, size_t homolog_count,
                             size_t* found_out = nullptr, size_t* total_out = nullptr) {
    size_t found = 0, total = 0;
    for (size_t q = 0; q < golden_sets.size(); ++q) {
        for (size_t c = 0; c < homolog_count; ++c) {
            ++total;
            const std::string want = plant_id(q, c);
            for (size_t m = 1; m < golden_sets[q].members.size(); ++m) {
                if (golden_sets[q].members[m].id() == want) {
                    ++found;
                    break;
                }
            }
        }
    }
    if (found_out) *found_out = found;
    if (total_out) *total_out = total;
    return total ? static_cast<double>(found) / static_cast<double>(total) : 1.0;
}

// The full-scan stand-in for a profile search without a prefilter: every
// query is gap-aligned against every database sequence, the best max_seqs
// survivors are profiled through the same downstream stages.
inline void baseline_run(const std::vector<SequenceRecord>& queries, const TargetDB& db,
                         const SubstitutionMatrix& matrix, const GappedKarlinParams& gaps,
                         const std::filesystem::path& workdir, size_t max_seqs, unsigned workers,
                         double inclusion_evalue = 10.0) {
    std::vector<std::vector<Alignment>> alignments(queries.size());
    for (size_t q = 0; q < queries.size(); ++q) {
        std::vector<int> scores(db.seq_count());
        parallel_for(db.seq_count(), workers, [&](size_t t) {
            scores[t] = smith_waterman_score(queries[q].residues, db.sequence(t), matrix, gaps);
        });
        std::vector<uint32_t> order(db.seq_count());
        std::iota(order.begin(), order.end(), 0);
        const auto better = [&](uint32_t a, uint32_t b) {
            if (scores[a] != scores[b]) return scores[a] > scores[b];
            return a < b;
        };
        const size_t keep = std::min(max_seqs, order.size());
        std::partial_sort(order.begin(), order.begin() + keep, order.end(), better);
        std::vector<PrefilterHit> hits;
        for (size_t i = 0; i < keep; ++i)
            if (scores[order[i]] > 0)
                hits.push_back({static_cast<uint32_t>(q), order[i], 0, scores[order[i]]});
        alignments[q] = align_hits(queries[q], hits, db, matrix, gaps, db.total_residues, workers);
    }

    std::filesystem::create_directories(workdir);
    const auto tuple_path = workdir / kTupleFileName;
    {
        std::ofstream out(tuple_path, std::ios::binary | std::ios::trunc);
        convertalis(alignments, db, queries, out);
    }
    ParsimusResult golden;
    {
        std::ifstream in(tuple_path, std::ios::binary);
        golden = parsimus(in, queries, max_seqs, &workdir);
    }
    const auto dirs = assign_query_dirs(queries);
    parallel_for(queries.size(), workers, [&](size_t q) {
        const PSSM pssm = build_profile(golden.golden_sets[q], matrix, gaps,
                                        ProfilerOptions{inclusion_evalue, 10.0, 1});
        std::ofstream out(workdir / dirs[q] / "pssm.ascii", std::ios::binary | std::ios::trunc);
        write_ascii_pssm(pssm, out);
    });
}

inline int64_t median_ms(std::vector<int64_t> samples) {
    std::sort(samples.begin(), samples.end());
    return samples[samples.size() / 2];
}

struct ScalingRow {
    size_t x = 0;  // batch size or query length
    int64_t pipeline_ms = 0;
    int64_t baseline_ms = 0;
};

inline std::string scaling_csv(const std::vector<ScalingRow>& rows, const char* x_name) {
    std::ostringstream out;
    out << x_name << ",pipeline_ms,baseline_ms\n";
    for (const auto& r : rows) out << r.x << ',' << r.pipeline_ms << ',' << r.baseline_ms << '\n';
    return out.str();
}

// Everything a sweep needs, prepared once per scenario: the synthetic data
// on disk and a built index.
struct BenchEnvironment {
    BenchScenario scenario;
    std::filesystem::path root;
    std::filesystem::path index_dir;
    std::filesystem::path queries_path;
    std::vector<SequenceRecord> queries;
    size_t planted = 0;
};

inline BenchEnvironment prepare_bench(const BenchScenario& scenario,
                                      const std::filesystem::path& root) {
    scenario.validate();
    BenchEnvironment env;
    env.scenario = scenario;
    env.root = root;
    std::filesystem::create_directories(root);
    const auto matrix = load_matrix("BLOSUM62");
    auto data = generate_db(scenario, matrix);
    env.planted = data.planted;
    write_text_file(root / "db.fasta", data.db_fasta);
    env.queries_path = root / "queries.fasta";
    write_text_file(env.queries_path, data.queries_fasta);
    {
        std::istringstream in(data.queries_fasta);
        env.queries = parse_fasta(in);
    }
    env.index_dir = root / "index";
    {
        std::istringstream in(data.db_fasta);
        auto [db, idx] = build_index(in, scenario.k);
        save_index(db, idx, env.index_dir);
    }
    return env;
}

namespace detail {

inline std::filesystem::path write_batch(const BenchEnvironment& env, size_t count,
                                         const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto path = dir / "batch.fasta";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (size_t q = 0; q < count && q < env.queries.size(); ++q)
        write_fasta(env.queries[q], out);
    return path;
}

inline int64_t time_pipeline(const BenchEnvironment& env, size_t batch) {
    TempDir scratch("profgen_bench_p_");
    const auto query_path = write_batch(env, batch, scratch.path());
    PipelineConfig cfg;
    cfg.index_dir = env.index_dir;
    cfg.query_path = query_path;
    cfg.workdir = scratch.path() / "work";
    cfg.max_seqs = env.scenario.max_seqs;
    cfg.k = env.scenario.k;
    cfg.workers = env.scenario.workers;
    StageTimer t;
    run_pipeline(cfg);
    return t.elapsed_ms();
}

inline int64_t time_baseline(const BenchEnvironment& env, size_t batch) {
    TempDir scratch("profgen_bench_b_");
    const unsigned workers =
        env.scenario.workers ? env.scenario.workers : default_worker_count();
    std::vector<SequenceRecord> queries(env.queries.begin(),
                                        env.queries.begin() +
                                            static_cast<long>(std::min(batch, env.queries.size())));
    StageTimer t;
    const auto matrix = load_matrix("BLOSUM62");
    const auto gaps = default_gapped_params(matrix);
    const auto db = load_target_db(env.index_dir);  // the full-scan path still reads the store
    baseline_run(queries, db, matrix, gaps, scratch.path() / "work", env.scenario.max_seqs,
                 workers);
    return t.elapsed_ms();
}

}  // namespace detail

template <typename TimeFn>
inline int64_t median_over_repeats(int repeats, TimeFn&& fn) {
    std::vector<int64_t> samples;
    samples.reserve(static_cast<size_t>(std::max(1, repeats)));
    for (int r = 0; r < std::max(1, repeats); ++r) samples.push_back(fn());
    return median_ms(std::move(samples));
}

// Figure-style batch sweep: full pipeline vs full-scan baseline, median of
// `repeats` runs per point.
inline std::vector<ScalingRow> run_scaling(const BenchEnvironment& env) {
    std::vector<ScalingRow> rows;
    for (const size_t batch : env.scenario.batch_sizes) {
        ScalingRow row;
        row.x = batch;
        row.pipeline_ms = median_over_repeats(
            env.scenario.repeats, [&] { return detail::time_pipeline(env, batch); });
        row.baseline_ms = median_over_repeats(
            env.scenario.repeats, [&] { return detail::time_baseline(env, batch); });
        rows.push_back(row);
    }
    return rows;
}

// Single-query sweep over the scenario's query_lengths.
inline std::vector<ScalingRow> run_length_sweep(const BenchEnvironment& env) {
    if (env.scenario.query_lengths.empty())
        throw InputError("length sweep requires scenario query_lengths");
    std::vector<ScalingRow> rows;
    for (size_t i = 0; i < env.scenario.query_lengths.size(); ++i) {
        BenchEnvironment one = env;
        one.queries = {env.queries[i]};
        ScalingRow row;
        row.x = env.scenario.query_lengths[i];
        row.pipeline_ms =
            median_over_repeats(env.scenario.repeats, [&] { return detail::time_pipeline(one, 1); });
        row.baseline_ms =
            median_over_repeats(env.scenario.repeats, [&] { return detail::time_baseline(one, 1); });
        rows.push_back(row);
    }
    return rows;
}

// One full-batch pipeline run purely to measure planted-homolog recall from
// the golden sets it writes.
inline double measure_recall(const BenchEnvironment& env, size_t* found = nullptr,
                             size_t* total = nullptr) {
    TempDir scratch("profgen_bench_r_");
    PipelineConfig cfg;
    cfg.index_dir = env.index_dir;
    cfg.query_path = env.queries_path;
    cfg.workdir = scratch.path() / "work";
    cfg.max_seqs = env.scenario.max_seqs;
    cfg.k = env.scenario.k;
    cfg.workers = env.scenario.workers;
    run_pipeline(cfg);

    std::vector<GoldenSet> sets;
    const auto dirs = assign_query_dirs(env.queries);
    for (size_t q = 0; q < env.queries.size(); ++q) {
        std::ifstream in(cfg.workdir / dirs[q] / "golden.fasta", std::ios::binary);
        if (!in) throw InternalError("golden.fasta missing for recall measurement");
        GoldenSet set;
        set.members = parse_fasta(in);
        set.query = set.members.at(0);
        sets.push_back(std::move(set));
    }
    return planted_recall(sets, env.scenario.homolog_count, found, total);
}

struct ScalingSummary {
    double baseline_ratio = 0.0;  // last batch vs first batch
    double pipeline_ratio = 0.0;
    double speedup_last = 0.0;  // baseline/pipeline at the largest batch
    bool baseline_scales_linearly = false;  // ratio >= 25 on the reference grid
    bool pipeline_stays_flat = false;       // ratio <= 8

    std::string to_kv() const {
        std::ostringstream out;
        out << "baseline_ratio=" << baseline_ratio << "\n";
        out << "pipeline_ratio=" << pipeline_ratio << "\n";
        out << "speedup_last=" << speedup_last << "\n";
        out << "baseline_scales_linearly=" << (baseline_scales_linearly ? "pass" : "warn") << "\n";
        out << "pipeline_stays_flat=" << (pipeline_stays_flat ? "pass" : "warn") << "\n";
        return out.str();
    }
};

inline ScalingSummary summarize_scaling(const std::vector<ScalingRow>& rows) {
    ScalingSummary s;
    if (rows.size() < 2) return s;
    const auto& first = rows.front();
    const auto& last = rows.back();
    s.baseline_ratio = first.baseline_ms > 0
                           ? static_cast<double>(last.baseline_ms) / first.baseline_ms
                           : 0.0;
    s.pipeline_ratio = first.pipeline_ms > 0
                           ? static_cast<double>(last.pipeline_ms) / first.pipeline_ms
                           : 0.0;
    s.speedup_last =
        last.pipeline_ms > 0 ? static_cast<double>(last.baseline_ms) / last.pipeline_ms : 0.0;
    s.baseline_scales_linearly = s.baseline_ratio >= 25.0;
    s.pipeline_stays_flat = s.pipeline_ratio > 0.0 && s.pipeline_ratio <= 8.0;
    return s;
}

// Spearman rank correlation; report-only diagnostic for the length sweep.
inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    const size_t n = xs.size();
    if (n < 2 || ys.size() != n) return 0.0;
    const auto ranks = [](const std::vector<double>& v) {
        std::vector<size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
        std::vector<double> r(v.size());
        for (size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
        return r;
    };
    const auto rx = ranks(xs), ry = ranks(ys);
    double d2 = 0.0;
    for (size_t i = 0; i < n; ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    const double dn = static_cast<double>(n);
    return 1.0 - 6.0 * d2 / (dn * (dn * dn - 1.0));
}

}  // namespace profgen
