#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "profgen/align.hpp"
#include "profgen/errors.hpp"
#include "profgen/fasta.hpp"
#include "profgen/target_db.hpp"
#include "profgen/tuples.hpp"

namespace profgen {

// The per-query sub-database handed to the profiler. The query is always
// members[0], even when the search returned nothing for it.
struct GoldenSet {
    SequenceRecord query;
    std::vector<SequenceRecord> members;

    uint64_t total_residues() const {
        uint64_t n = 0;
        for (const auto& m : members) n += m.length();
        return n;
    }
};

// Filesystem-safe directory name for a query token.
inline std::string sanitize_token(const std::string& token) {
    std::string out;
    out.reserve(token.size());
    for (char c : token) {
        const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                        (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
        out.push_back(ok ? c : '_');
    }
    if (out.empty()) out = "_";
    return out;
}

// Assigns unique directory names in query input order; collisions after
// sanitization get numeric suffixes.
inline std::vector<std::string> assign_query_dirs(const std::vector<SequenceRecord>& queries) {
    std::vector<std::string> dirs;
    dirs.reserve(queries.size());
    std::unordered_map<std::string, int> used;
    for (const auto& q : queries) {
        std::string base = sanitize_token(q.id());
        int& n = used[base];
        ++n;
        dirs.push_back(n == 1 ? base : base + "_" + std::to_string(n));
    }
    return dirs;
}

namespace detail {
inline std::string tab_free(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (c == '\t' || c == '\n') c = ' ';
    return out;
}
}  // namespace detail

// Flattens per-query alignment lists into the 3-column tuple stream:
// grouped by query in input order, alignment order within each group, full
// target sequence in column 3.
inline void convertalis(const std::vector<std::vector<Alignment>>& per_query_alignments,
                        const TargetDB& db, const std::vector<SequenceRecord>& queries,
                        std::ostream& out) {
    if (per_query_alignments.size() != queries.size())
        throw InputError("convertalis: alignment lists do not match query count");
    for (size_t q = 0; q < queries.size(); ++q) {
        for (const auto& aln : per_query_alignments[q]) {
            if (aln.target_id >= db.seq_count())
                throw InputError("convertalis: dangling target id " +
                                 std::to_string(aln.target_id));
            TupleRecord rec;
            rec.query_header = detail::tab_free(queries[q].header);
            rec.target_header = detail::tab_free(db.headers[aln.target_id]);
            rec.target_sequence = residues_to_string(db.sequence(aln.target_id));
            write_tuple(rec, out);
        }
    }
}

struct ParsimusResult {
    std::vector<GoldenSet> golden_sets;  // one per query, input order
    size_t duplicates_dropped = 0;
};

// Splits the tuple stream into per-query golden sets, enforcing the member
// cap and dropping duplicate (query, target) pairs. When workdir is given,
// writes <workdir>/<query_dir>/{query.fasta,golden.fasta} for every query.
inline ParsimusResult parsimus(std::istream& tuples, const std::vector<SequenceRecord>& queries,
                               size_t max_members,
                               const std::filesystem::path* workdir = nullptr) {
    ParsimusResult result;
    result.golden_sets.reserve(queries.size());
    std::unordered_map<std::string, size_t> query_by_token;
    for (size_t q = 0; q < queries.size(); ++q) {
        query_by_token.emplace(queries[q].id(), q);
        GoldenSet set;
        set.query = queries[q];
        set.members.push_back(queries[q]);  // master sequence first
        result.golden_sets.push_back(std::move(set));
    }

    std::vector<std::unordered_set<std::string>> seen(queries.size());
    TupleReader reader(tuples);
    while (auto rec = reader.next()) {
        // Resolve by the first header token so tab-sanitized headers
        // still map back to their query.
        SequenceRecord probe{rec->query_header, {}};
        const auto it = query_by_token.find(probe.id());
        if (it == query_by_token.end())
            throw InputError("parsimus: tuple query header '" + rec->query_header +
                             "' does not match any known query");
        const size_t q = it->second;
        SequenceRecord member{rec->target_header, residues_from_string(rec->target_sequence)};
        auto& set = result.golden_sets[q];
        const std::string member_id = member.id();
        if (member_id == set.query.id() || !seen[q].insert(member_id).second) {
            ++result.duplicates_dropped;
            continue;
        }
        if (set.members.size() >= max_members) continue;  // cap reached
        set.members.push_back(std::move(member));
    }

    if (workdir) {
        const auto dirs = assign_query_dirs(queries);
        for (size_t q = 0; q < queries.size(); ++q) {
            const auto dir = *workdir / dirs[q];
            std::filesystem::create_directories(dir);
            {
                std::ofstream f(dir / "query.fasta", std::ios::binary | std::ios::trunc);
                if (!f) throw InputError("cannot write " + (dir / "query.fasta").string());
                write_fasta(queries[q], f);
            }
            {
                std::ofstream f(dir / "golden.fasta", std::ios::binary | std::ios::trunc);
                if (!f) throw InputError("cannot write " + (dir / "golden.fasta").string());
                write_fasta(result.golden_sets[q].members, f);
            }
        }
    }
    return result;
}

}  // namespace profgen
