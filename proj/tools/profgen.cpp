// profgen: batch protein profile search. Compiles a FASTA database into a
// k-mer indexed target store, retrieves homologs per query through a
// double-diagonal-match prefilter plus gapped local alignment, materializes
// per-query golden sub-databases and emits PSSM profiles.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "profgen/profgen.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitInternal = 3;

struct SearchArgs {
    std::string index_dir;
    std::string queries;
    std::string workdir;
    size_t max_seqs = 1000;
    double evalue = 10.0;
    int min_ungapped_score = 15;
    int k = 5;
    unsigned workers = 0;
    std::string out = "ascii-pssm";
    int similar_kmer_threshold = 0;
    bool similar_enabled = false;
    int band = 0;
    bool band_enabled = false;
    double pseudocount_beta = 10.0;
    int iterations = 1;
    std::string matrix = "BLOSUM62";
    std::string external_profiler;
};

profgen::PipelineConfig to_config(const SearchArgs& a) {
    profgen::PipelineConfig cfg;
    cfg.index_dir = a.index_dir;
    cfg.query_path = a.queries;
    cfg.workdir = a.workdir;
    cfg.max_seqs = a.max_seqs;
    cfg.inclusion_evalue = a.evalue;
    cfg.min_ungapped_score = a.min_ungapped_score;
    cfg.k = a.k;
    cfg.workers = a.workers;
    cfg.outputs = profgen::OutputSelection::parse(a.out);
    if (a.similar_enabled) cfg.similar_kmer_threshold = a.similar_kmer_threshold;
    if (a.band_enabled) cfg.band_width = a.band;
    cfg.pseudocount_beta = a.pseudocount_beta;
    cfg.iterations = a.iterations;
    cfg.matrix_name = a.matrix;
    cfg.external_profiler = a.external_profiler;
    return cfg;
}

void add_search_flags(CLI::App* cmd, SearchArgs& a) {
    cmd->add_option("--index", a.index_dir, "index directory")->required();
    cmd->add_option("--queries", a.queries, "query FASTA file")->required();
    cmd->add_option("--workdir", a.workdir, "output work directory")->required();
    cmd->add_option("--max-seqs", a.max_seqs, "max sequences retrieved per query");
    cmd->add_option("--evalue", a.evalue, "profile inclusion e-value");
    cmd->add_option("--min-ungapped-score", a.min_ungapped_score, "prefilter admission score");
    cmd->add_option("--k", a.k, "k-mer size, must match the index");
    cmd->add_option("--workers", a.workers, "worker threads (default: PROFGEN_WORKERS or cores)");
    cmd->add_option("--out", a.out, "outputs: comma list of alignments,pssm,ascii-pssm");
    cmd->add_option("--similar-kmer-threshold", a.similar_kmer_threshold,
                    "enable similar k-mer expansion at this score")
        ->each([&a](const std::string&) { a.similar_enabled = true; });
    cmd->add_option("--band", a.band, "restrict alignment to this band around the hit diagonal")
        ->each([&a](const std::string&) { a.band_enabled = true; });
    cmd->add_option("--pseudocount-beta", a.pseudocount_beta, "pseudocount mixing weight");
    cmd->add_option("--iterations", a.iterations, "profiling iterations");
    cmd->add_option("--matrix", a.matrix, "substitution matrix name or file");
    cmd->add_option("--external-profiler", a.external_profiler,
                    "delegate profiling to this command; {query} {golden} {outdir} {evalue} "
                    "are substituted per query");
}

int dispatch(CLI::App& app, int argc, char** argv) {
    try {
        app.parse(argc, argv);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            app.exit(e);
            return kExitOk;
        }
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const profgen::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const profgen::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"profgen: fast batch PSSM profile generation"};
    app.require_subcommand(1);

    // index build
    auto* index_cmd = app.add_subcommand("index", "database index operations");
    index_cmd->require_subcommand(1);
    auto* build_cmd = index_cmd->add_subcommand("build", "compile a FASTA database");
    std::string build_db, build_out;
    int build_k = 5;
    build_cmd->add_option("--db", build_db, "database FASTA file")->required();
    build_cmd->add_option("--out", build_out, "output directory")->required();
    build_cmd->add_option("--k", build_k, "k-mer size (4..7)");
    build_cmd->callback([&] {
        std::ifstream in(build_db, std::ios::binary);
        if (!in) throw profgen::InputError("cannot open database FASTA '" + build_db + "'");
        size_t normalized = 0;
        auto [db, idx] = profgen::build_index(in, build_k, &normalized);
        profgen::save_index(db, idx, build_out);
        std::cout << "indexed " << db.seq_count() << " sequences, " << db.total_residues
                  << " residues, " << idx.postings.size() << " postings (k=" << build_k << ")\n";
        if (normalized > 0)
            std::cout << "note: " << normalized << " residues normalized to X\n";
    });

    // search
    auto* search_cmd = app.add_subcommand("search", "run the search pipeline");
    SearchArgs search_args;
    add_search_flags(search_cmd, search_args);
    search_cmd->callback([&] {
        const auto report = profgen::run_pipeline(to_config(search_args));
        std::cout << report.to_kv();
    });

    // daemon
    auto* daemon_cmd = app.add_subcommand("daemon", "serve a resident index over a local socket");
    std::string daemon_index, daemon_socket;
    daemon_cmd->add_option("--index", daemon_index, "index directory")->required();
    daemon_cmd->add_option("--socket", daemon_socket, "unix socket path")->required();
    daemon_cmd->callback([&] { profgen::daemon_serve(daemon_index, daemon_socket); });

    // query (daemon client)
    auto* query_cmd = app.add_subcommand("query", "search through a running daemon");
    std::string query_socket, query_file, query_outdir;
    std::vector<std::string> query_set;
    query_cmd->add_option("--socket", query_socket, "daemon socket path")->required();
    query_cmd->add_option("--queries", query_file, "query FASTA file")->required();
    query_cmd->add_option("--outdir", query_outdir, "directory for returned files")->required();
    query_cmd->add_option("--set", query_set, "config override key=value (repeatable)");
    query_cmd->callback([&] {
        std::string config;
        for (const auto& kv : query_set) config += kv + "\n";
        const auto fasta = profgen::read_text_file(query_file);
        const auto files = profgen::daemon_query(query_socket, fasta, config);
        for (const auto& f : files) {
            const fs::path path = fs::path(query_outdir) / f.name;
            fs::create_directories(path.parent_path());
            profgen::write_text_file(path, f.content);
        }
        std::cout << "wrote " << files.size() << " files to " << query_outdir << "\n";
    });

    // daemon shutdown
    auto* stop_cmd = app.add_subcommand("stop", "shut a running daemon down");
    std::string stop_socket;
    stop_cmd->add_option("--socket", stop_socket, "daemon socket path")->required();
    stop_cmd->callback([&] { profgen::daemon_shutdown(stop_socket); });

    // matrix dump
    auto* matrix_cmd = app.add_subcommand("matrix", "substitution matrix utilities");
    matrix_cmd->require_subcommand(1);
    auto* dump_cmd = matrix_cmd->add_subcommand("dump", "print a matrix with derived statistics");
    std::string dump_name = "BLOSUM62";
    dump_cmd->add_option("--name", dump_name, "built-in name or file path");
    dump_cmd->callback([&] {
        const auto m = profgen::load_matrix(dump_name);
        std::cout << profgen::format_matrix(m);
        std::cout << "# lambda_u=" << m.lambda_u << " max_diag=" << m.max_diagonal_score() << "\n";
    });

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "synthetic scaling harness");
    bench_cmd->require_subcommand(1);
    std::string bench_scenario, bench_out, bench_workdir;
    const auto add_bench_common = [&](CLI::App* cmd) {
        cmd->add_option("--scenario", bench_scenario, "scenario file (key=value lines)")
            ->required();
        cmd->add_option("--out", bench_out, "output CSV path")->required();
        cmd->add_option("--workdir", bench_workdir, "scratch directory (default: <out>.d)");
    };
    const auto load_env = [&] {
        std::ifstream in(bench_scenario);
        if (!in) throw profgen::InputError("cannot open scenario '" + bench_scenario + "'");
        const auto scenario = profgen::parse_scenario(in);
        const fs::path wd = bench_workdir.empty() ? fs::path(bench_out + ".d") : fs::path(bench_workdir);
        return profgen::prepare_bench(scenario, wd);
    };

    auto* scaling_cmd = bench_cmd->add_subcommand("scaling", "batch-size sweep");
    add_bench_common(scaling_cmd);
    scaling_cmd->callback([&] {
        const auto env = load_env();
        const auto rows = profgen::run_scaling(env);
        profgen::write_text_file(bench_out, profgen::scaling_csv(rows, "batch_size"));
        auto summary = profgen::summarize_scaling(rows);
        size_t found = 0, total = 0;
        const double recall = profgen::measure_recall(env, &found, &total);
        std::ostringstream extra;
        extra << summary.to_kv() << "recall=" << recall << "\n"
              << "recall_found=" << found << "\n"
              << "recall_total=" << total << "\n";
        profgen::write_text_file(bench_out + ".summary", extra.str());
        std::cout << profgen::scaling_csv(rows, "batch_size") << extra.str();
    });

    auto* lengths_cmd = bench_cmd->add_subcommand("lengths", "query-length sweep");
    add_bench_common(lengths_cmd);
    lengths_cmd->callback([&] {
        const auto env = load_env();
        if (env.scenario.query_lengths.empty())
            throw profgen::UsageError("length sweep requires query_lengths in the scenario");
        const auto rows = profgen::run_length_sweep(env);
        profgen::write_text_file(bench_out, profgen::scaling_csv(rows, "query_len"));
        std::vector<double> xs, base, pipe;
        for (const auto& r : rows) {
            xs.push_back(static_cast<double>(r.x));
            base.push_back(static_cast<double>(r.baseline_ms));
            pipe.push_back(static_cast<double>(r.pipeline_ms));
        }
        std::ostringstream extra;
        extra << "baseline_length_spearman=" << profgen::spearman(xs, base) << "\n"
              << "pipeline_length_spearman=" << profgen::spearman(xs, pipe) << "\n";
        profgen::write_text_file(bench_out + ".summary", extra.str());
        std::cout << profgen::scaling_csv(rows, "query_len") << extra.str();
    });

    return dispatch(app, argc, argv);
}
