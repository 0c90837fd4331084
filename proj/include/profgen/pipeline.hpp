#pragma once

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "profgen/align.hpp"
#include "profgen/errors.hpp"
#include "profgen/goldendb.hpp"
#include "profgen/kmer_index.hpp"
#include "profgen/parallel.hpp"
#include "profgen/prefilter.hpp"
#include "profgen/profiler.hpp"
#include "profgen/tuples.hpp"

namespace profgen {

struct OutputSelection {
    bool alignments = false;
    bool pssm = false;
    bool ascii_pssm = false;

    bool any() const { return alignments || pssm || ascii_pssm; }

    static OutputSelection parse(const std::string& csv) {
        OutputSelection out;
        std::istringstream in(csv);
        std::string kind;
        while (std::getline(in, kind, ',')) {
            if (kind == "alignments")
                out.alignments = true;
            else if (kind == "pssm")
                out.pssm = true;
            else if (kind == "ascii-pssm")
                out.ascii_pssm = true;
            else if (!kind.empty())
                throw UsageError("unknown output kind '" + kind + "'");
        }
        return out;
    }
};

struct PipelineConfig {
    std::filesystem::path index_dir;
    std::filesystem::path query_path;
    std::filesystem::path workdir;
    std::string matrix_name = "BLOSUM62";
    size_t max_seqs = 1000;
    double inclusion_evalue = 10.0;
    int min_ungapped_score = 15;
    int k = 5;  // must match the index
    unsigned workers = 0;  // 0: PROFGEN_WORKERS env, else hardware
    OutputSelection outputs{false, false, true};
    std::optional<int> similar_kmer_threshold;
    std::optional<int32_t> band_width;
    double pseudocount_beta = 10.0;
    int iterations = 1;
    // When set, profiling is delegated to this command instead of the
    // internal engine. Placeholders {query}, {golden}, {outdir} and
    // {evalue} are substituted per query; the command writes its own
    // outputs into {outdir}. Not settable over the daemon protocol.
    std::string external_profiler;
};

inline unsigned resolve_workers(const PipelineConfig& cfg) {
    if (cfg.workers > 0) return cfg.workers;
    if (const char* env = std::getenv("PROFGEN_WORKERS")) {
        const long v = std::atol(env);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    return default_worker_count();
}

struct QueryReport {
    std::string dir;
    size_t hits = 0;
    size_t golden_size = 0;
    bool profile_emitted = false;
};

struct RunReport {
    size_t query_count = 0;
    unsigned workers = 0;
    int64_t index_load_ms = 0;
    int64_t parse_ms = 0;
    int64_t prefilter_ms = 0;
    int64_t align_ms = 0;
    int64_t convertalis_ms = 0;
    int64_t parsimus_ms = 0;
    int64_t profile_ms = 0;
    int64_t total_ms = 0;
    size_t normalized_residues = 0;
    size_t duplicates_dropped = 0;
    std::vector<QueryReport> queries;
    std::vector<std::string> warnings;

    std::string to_kv() const {
        std::ostringstream out;
        out << "query_count=" << query_count << "\n";
        out << "workers=" << workers << "\n";
        out << "index_load_ms=" << index_load_ms << "\n";
        out << "parse_ms=" << parse_ms << "\n";
        out << "prefilter_ms=" << prefilter_ms << "\n";
        out << "align_ms=" << align_ms << "\n";
        out << "convertalis_ms=" << convertalis_ms << "\n";
        out << "parsimus_ms=" << parsimus_ms << "\n";
        out << "profile_ms=" << profile_ms << "\n";
        out << "total_ms=" << total_ms << "\n";
        out << "normalized_residues=" << normalized_residues << "\n";
        out << "duplicates_dropped=" << duplicates_dropped << "\n";
        for (const auto& q : queries) {
            out << "query." << q.dir << ".hits=" << q.hits << "\n";
            out << "query." << q.dir << ".golden=" << q.golden_size << "\n";
            out << "query." << q.dir << ".profile=" << (q.profile_emitted ? 1 : 0) << "\n";
        }
        for (size_t i = 0; i < warnings.size(); ++i)
            out << "warning." << i << "=" << warnings[i] << "\n";
        return out.str();
    }
};

inline constexpr const char* kReportFileName = "report.txt";

namespace detail {

class StageTimer {
public:
    StageTimer() : start_(std::chrono::steady_clock::now()) {}
    int64_t elapsed_ms() const {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

template <typename Fn>
auto timed(int64_t& slot, Fn&& fn) {
    StageTimer t;
    if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        slot = t.elapsed_ms();
    } else {
        auto result = fn();
        slot = t.elapsed_ms();
        return result;
    }
}

[[noreturn]] inline void stage_error(const char* stage, const std::string& query,
                                     const std::exception& e) {
    throw InputError(std::string(stage) + " stage failed for query '" + query + "': " + e.what());
}

inline std::string substitute_placeholders(std::string text,
                                           const std::vector<std::pair<std::string, std::string>>&
                                               replacements) {
    for (const auto& [key, value] : replacements) {
        size_t pos = 0;
        while ((pos = text.find(key, pos)) != std::string::npos) {
            text.replace(pos, key.size(), value);
            pos += value.size();
        }
    }
    return text;
}

// Runs the external profiler command for one query and maps its exit code.
inline void run_external_profiler(const std::string& command_template,
                                  const std::filesystem::path& query_dir,
                                  double inclusion_evalue) {
    const std::string command = substitute_placeholders(
        command_template, {{"{query}", (query_dir / "query.fasta").string()},
                           {"{golden}", (query_dir / "golden.fasta").string()},
                           {"{outdir}", query_dir.string()},
                           {"{evalue}", std::to_string(inclusion_evalue)}});
    const int status = std::system(command.c_str());
    if (status == -1) throw InternalError("could not launch external profiler");
    if (WIFEXITED(status) && WEXITSTATUS(status) != 0)
        throw InputError("external profiler exited with code " +
                         std::to_string(WEXITSTATUS(status)) + ": " + command);
    if (!WIFEXITED(status)) throw InputError("external profiler terminated abnormally");
}

}  // namespace detail

// The full search path over an already-resident index. Output is a pure
// function of (index content, query content, config); worker count and
// transport only affect the timing report.
inline RunReport run_pipeline_loaded(const TargetDB& db, const KmerIndex& idx,
                                     const std::vector<SequenceRecord>& queries,
                                     const PipelineConfig& cfg, int64_t index_load_ms = 0,
                                     size_t normalized_residues = 0) {
    detail::StageTimer total;
    if (queries.empty()) throw InputError("empty query file");
    if (cfg.k != idx.k)
        throw InputError("index was built with k=" + std::to_string(idx.k) +
                         " but the pipeline is configured with k=" + std::to_string(cfg.k));
    if (!cfg.outputs.any()) throw UsageError("no outputs requested");

    const unsigned workers = resolve_workers(cfg);
    RunReport report;
    report.query_count = queries.size();
    report.workers = workers;
    report.index_load_ms = index_load_ms;
    report.normalized_residues = normalized_residues;

    const auto matrix = load_matrix(cfg.matrix_name);
    const auto gaps = default_gapped_params(matrix);
    const auto dirs = assign_query_dirs(queries);
    report.queries.resize(queries.size());
    for (size_t q = 0; q < queries.size(); ++q) report.queries[q].dir = dirs[q];

    PrefilterConfig pre_cfg{cfg.max_seqs, cfg.min_ungapped_score, cfg.similar_kmer_threshold};

    // Stage 1: prefilter, fanned out over queries.
    std::vector<std::vector<PrefilterHit>> hits(queries.size());
    std::vector<std::string> short_queries(queries.size());
    detail::timed(report.prefilter_ms, [&] {
        parallel_for(queries.size(), workers, [&](size_t q) {
            if (queries[q].length() < static_cast<size_t>(idx.k)) {
                short_queries[q] = queries[q].id();
                return;  // registered with an empty hit list
            }
            try {
                hits[q] = prefilter_query(queries[q], db, idx, pre_cfg, matrix,
                                          static_cast<uint32_t>(q));
            } catch (const std::exception& e) {
                detail::stage_error("prefilter", queries[q].id(), e);
            }
        });
    });
    for (size_t q = 0; q < queries.size(); ++q) {
        if (!short_queries[q].empty())
            report.warnings.push_back("query '" + short_queries[q] + "' shorter than k=" +
                                      std::to_string(idx.k) + "; no search performed");
        report.queries[q].hits = hits[q].size();
    }

    // Stage 2: gapped alignment of the survivors.
    std::vector<std::vector<Alignment>> alignments(queries.size());
    detail::timed(report.align_ms, [&] {
        const bool outer = queries.size() > 1;
        parallel_for(queries.size(), outer ? workers : 1, [&](size_t q) {
            try {
                alignments[q] = align_hits(queries[q], hits[q], db, matrix, gaps,
                                           db.total_residues, outer ? 1 : workers, cfg.band_width);
            } catch (const std::exception& e) {
                detail::stage_error("align", queries[q].id(), e);
            }
        });
    });

    // Stage 3: convertalis writes the tuple file, then stage 4 re-reads it.
    std::filesystem::create_directories(cfg.workdir);
    const auto tuple_path = cfg.workdir / kTupleFileName;
    detail::timed(report.convertalis_ms, [&] {
        std::ofstream out(tuple_path, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write " + tuple_path.string());
        convertalis(alignments, db, queries, out);
    });

    ParsimusResult golden;
    detail::timed(report.parsimus_ms, [&] {
        std::ifstream in(tuple_path, std::ios::binary);
        if (!in) throw InputError("cannot read " + tuple_path.string());
        golden = parsimus(in, queries, cfg.max_seqs, &cfg.workdir);
    });
    report.duplicates_dropped = golden.duplicates_dropped;
    for (size_t q = 0; q < queries.size(); ++q)
        report.queries[q].golden_size = golden.golden_sets[q].members.size();

    // Stage 5: profiling, one task per query directory.
    detail::timed(report.profile_ms, [&] {
        const ProfilerOptions opt{cfg.inclusion_evalue, cfg.pseudocount_beta, cfg.iterations};
        parallel_for(queries.size(), workers, [&](size_t q) {
            try {
                const auto dir = cfg.workdir / dirs[q];
                if (cfg.outputs.alignments) {
                    std::ofstream out(dir / "alignments.tsv", std::ios::binary | std::ios::trunc);
                    out << kAlignmentTsvHeader;
                    for (const auto& aln : alignments[q])
                        out << alignment_tsv_row(aln, queries[q].id(),
                                                 SequenceRecord{db.headers[aln.target_id], {}}.id());
                    if (!out) throw InputError("cannot write alignments.tsv");
                }
                if (cfg.outputs.pssm || cfg.outputs.ascii_pssm) {
                    if (!cfg.external_profiler.empty()) {
                        detail::run_external_profiler(cfg.external_profiler, dir,
                                                      cfg.inclusion_evalue);
                    } else {
                        const PSSM pssm = build_profile(golden.golden_sets[q], matrix, gaps, opt);
                        if (cfg.outputs.pssm) {
                            std::ofstream out(dir / "pssm.bin",
                                              std::ios::binary | std::ios::trunc);
                            write_binary_pssm(pssm, out);
                        }
                        if (cfg.outputs.ascii_pssm) {
                            std::ofstream out(dir / "pssm.ascii",
                                              std::ios::binary | std::ios::trunc);
                            write_ascii_pssm(pssm, out);
                            if (!out) throw InputError("cannot write pssm.ascii");
                        }
                    }
                    report.queries[q].profile_emitted = true;
                }
            } catch (const std::exception& e) {
                detail::stage_error("profile", queries[q].id(), e);
            }
        });
    });

    report.total_ms = total.elapsed_ms() + index_load_ms;
    write_text_file(cfg.workdir / kReportFileName, report.to_kv());
    return report;
}

inline RunReport run_pipeline(const PipelineConfig& cfg) {
    int64_t load_ms = 0;
    auto [db, idx] = detail::timed(load_ms, [&] { return load_index(cfg.index_dir); });

    int64_t parse_ms = 0;
    size_t normalized = 0;
    auto queries = detail::timed(parse_ms, [&] {
        std::ifstream in(cfg.query_path, std::ios::binary);
        if (!in) throw InputError("cannot open query file '" + cfg.query_path.string() + "'");
        return parse_fasta(in, &normalized);
    });

    auto report = run_pipeline_loaded(db, idx, queries, cfg, load_ms, normalized);
    report.parse_ms = parse_ms;
    write_text_file(cfg.workdir / kReportFileName, report.to_kv());
    return report;
}

}  // namespace profgen
