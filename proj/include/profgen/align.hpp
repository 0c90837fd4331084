#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "profgen/errors.hpp"
#include "profgen/fasta.hpp"
#include "profgen/parallel.hpp"
#include "profgen/prefilter.hpp"
#include "profgen/substitution_matrix.hpp"
#include "profgen/target_db.hpp"

namespace profgen {

enum class EditOp : uint8_t {
    Match,      // consumes one query and one target residue
    QueryGap,   // gap in the query, consumes one target residue
    TargetGap,  // gap in the target, consumes one query residue
};

struct OpRun {
    EditOp op;
    uint32_t len;

    bool operator==(const OpRun&) const = default;
};

struct Alignment {
    uint32_t query_id = 0;
    uint32_t target_id = 0;
    int raw_score = 0;
    double bit_score = 0.0;
    double evalue = 0.0;
    // 0-based inclusive coordinates of the aligned spans.
    size_t q_start = 0, q_end = 0, t_start = 0, t_end = 0;
    std::vector<OpRun> ops;
    double identity = 0.0;
    double q_cov = 0.0, t_cov = 0.0;
};

struct BandConstraint {
    int32_t center;  // diagonal (query_pos - target_pos) the band follows
    int32_t width;   // cells with |diagonal - center| <= width are reachable
};

namespace detail {

constexpr int kNegInf = std::numeric_limits<int>::min() / 4;

// Affine-gap local alignment with traceback over an arbitrary per-cell
// score function. Tie-breaks give one canonical alignment: diagonal over
// target-gap over query-gap, gap opening over extension, and the maximum
// cell with the smallest (q_end, t_end).
template <typename ScoreFn>
std::optional<Alignment> smith_waterman_core(size_t qlen, std::span<const uint8_t> query_or_empty,
                                             std::span<const uint8_t> target,
                                             ScoreFn&& score_at, const GappedKarlinParams& gaps,
                                             std::optional<BandConstraint> band) {
    const size_t m = qlen, n = target.size();
    if (m == 0 || n == 0) throw InputError("cannot align empty sequences");
    const int open_cost = gaps.gap_open + gaps.gap_extend;
    const int extend_cost = gaps.gap_extend;

    // Traceback: bits 0-1 H source (0 stop, 1 diag, 2 target-gap, 3
    // query-gap), bit 2 F extends F, bit 3 E extends E.
    std::vector<uint8_t> tb((m + 1) * (n + 1), 0);
    std::vector<int> h_prev(n + 1, 0), h_cur(n + 1, 0);
    std::vector<int> f_col(n + 1, kNegInf);
    int best = 0;
    size_t best_i = 0, best_j = 0;

    for (size_t i = 1; i <= m; ++i) {
        size_t jlo = 1, jhi = n;
        if (band) {
            const int64_t di = static_cast<int64_t>(i);
            jlo = static_cast<size_t>(std::max<int64_t>(1, di - band->center - band->width));
            jhi = static_cast<size_t>(
                std::min<int64_t>(static_cast<int64_t>(n), di - band->center + band->width));
            std::fill(h_cur.begin(), h_cur.end(), kNegInf);
            if (jlo > jhi) {
                std::swap(h_prev, h_cur);
                continue;
            }
        }
        int e_row = kNegInf;
        uint8_t* tb_row = tb.data() + i * (n + 1);
        for (size_t j = jlo; j <= jhi; ++j) {
            // A new alignment may start at any in-band cell, so the diagonal
            // predecessor contributes at least the empty prefix (0).
            const int diag = std::max(h_prev[j - 1], 0) + score_at(i - 1, target[j - 1]);

            const int f_open = h_prev[j] - open_cost;
            const int f_ext = f_col[j] - extend_cost;
            const int f_val = std::max(f_open, f_ext);
            if (f_ext > f_open) tb_row[j] |= 0x04;
            f_col[j] = f_val;

            const int e_open = h_cur[j - 1] - open_cost;
            const int e_ext = e_row - extend_cost;
            const int e_val = std::max(e_open, e_ext);
            if (e_ext > e_open) tb_row[j] |= 0x08;
            e_row = e_val;

            int h = 0;
            uint8_t dir = 0;
            if (diag > 0) {
                h = diag;
                dir = 1;
            }
            if (f_val > h) {
                h = f_val;
                dir = 2;
            }
            if (e_val > h) {
                h = e_val;
                dir = 3;
            }
            h_cur[j] = h;
            tb_row[j] |= dir;
            if (h > best) {
                best = h;
                best_i = i;
                best_j = j;
            }
        }
        std::swap(h_prev, h_cur);
        if (!band) std::fill(h_cur.begin(), h_cur.end(), 0);
    }

    if (best <= 0) return std::nullopt;

    // Traceback from the best cell, collecting ops in reverse.
    std::vector<OpRun> rev;
    const auto push = [&rev](EditOp op) {
        if (!rev.empty() && rev.back().op == op)
            ++rev.back().len;
        else
            rev.push_back({op, 1});
    };
    size_t i = best_i, j = best_j;
    size_t identical = 0;
    enum class State { H, E, F } state = State::H;
    for (;;) {
        const uint8_t cell = tb[i * (n + 1) + j];
        if (state == State::H) {
            const uint8_t dir = cell & 0x03;
            if (dir == 0) break;
            if (dir == 1) {
                push(EditOp::Match);
                if (!query_or_empty.empty() && query_or_empty[i - 1] == target[j - 1]) ++identical;
                --i;
                --j;
            } else if (dir == 2) {
                state = State::F;
            } else {
                state = State::E;
            }
        } else if (state == State::F) {
            push(EditOp::TargetGap);
            const bool extends = cell & 0x04;
            --i;
            if (!extends) state = State::H;
        } else {
            push(EditOp::QueryGap);
            const bool extends = cell & 0x08;
            --j;
            if (!extends) state = State::H;
        }
    }

    Alignment a;
    a.raw_score = best;
    a.q_start = i;
    a.t_start = j;
    a.q_end = best_i - 1;
    a.t_end = best_j - 1;
    a.ops.assign(rev.rbegin(), rev.rend());
    size_t columns = 0;
    for (const auto& run : a.ops) columns += run.len;
    a.identity = columns ? static_cast<double>(identical) / static_cast<double>(columns) : 0.0;
    a.q_cov = static_cast<double>(a.q_end - a.q_start + 1) / static_cast<double>(m);
    a.t_cov = static_cast<double>(a.t_end - a.t_start + 1) / static_cast<double>(n);
    a.bit_score = bit_score(a.raw_score, gaps);
    return a;
}

}  // namespace detail

inline std::optional<Alignment> smith_waterman(std::span<const uint8_t> query,
                                               std::span<const uint8_t> target,
                                               const SubstitutionMatrix& matrix,
                                               const GappedKarlinParams& gaps,
                                               std::optional<BandConstraint> band = {}) {
    return detail::smith_waterman_core(
        query.size(), query, target,
        [&](size_t qpos, uint8_t t) { return matrix.score(query[qpos], t); }, gaps, band);
}

// Score-only variant in linear memory, for full-database scans.
inline int smith_waterman_score(std::span<const uint8_t> query, std::span<const uint8_t> target,
                                const SubstitutionMatrix& matrix,
                                const GappedKarlinParams& gaps) {
    const size_t m = query.size(), n = target.size();
    if (m == 0 || n == 0) throw InputError("cannot align empty sequences");
    const int open_cost = gaps.gap_open + gaps.gap_extend;
    const int extend_cost = gaps.gap_extend;
    std::vector<int> h(n + 1, 0), f(n + 1, detail::kNegInf);
    int best = 0;
    for (size_t i = 1; i <= m; ++i) {
        const auto* row = matrix.scores[query[i - 1]].data();
        int h_diag = 0;  // H[i-1][j-1]
        int e = detail::kNegInf;
        for (size_t j = 1; j <= n; ++j) {
            f[j] = std::max(h[j] - open_cost, f[j] - extend_cost);
            e = std::max(h[j - 1] - open_cost, e - extend_cost);
            int v = h_diag + row[target[j - 1]];
            v = std::max({0, v, f[j], e});
            h_diag = h[j];
            h[j] = v;
            if (v > best) best = v;
        }
    }
    return best;
}

inline void finalize_statistics(Alignment& a, size_t query_len, size_t db_residues,
                                const GappedKarlinParams& gaps) {
    a.evalue = evalue(a.raw_score, query_len, db_residues, gaps);
}

// One gapped alignment per prefilter hit; failed alignments are dropped and
// the rest ordered by (evalue, target_id). Deterministic for any worker
// count: results land in per-hit slots before the final sort.
inline std::vector<Alignment> align_hits(const SequenceRecord& query,
                                         const std::vector<PrefilterHit>& hits, const TargetDB& db,
                                         const SubstitutionMatrix& matrix,
                                         const GappedKarlinParams& gaps, size_t db_residues,
                                         unsigned workers = 1,
                                         std::optional<int32_t> band_width = {}) {
    for (const auto& hit : hits)
        if (hit.target_id >= db.seq_count())
            throw InputError("prefilter hit references unknown target id " +
                             std::to_string(hit.target_id));

    std::vector<std::optional<Alignment>> slots(hits.size());
    parallel_for(hits.size(), workers, [&](size_t i) {
        const auto& hit = hits[i];
        std::optional<BandConstraint> band;
        if (band_width) band = BandConstraint{hit.diagonal, *band_width};
        auto aln = smith_waterman(query.residues, db.sequence(hit.target_id), matrix, gaps, band);
        if (aln) {
            aln->query_id = hit.query_id;
            aln->target_id = hit.target_id;
            finalize_statistics(*aln, query.length(), db_residues, gaps);
            slots[i] = std::move(aln);
        }
    });

    std::vector<Alignment> out;
    out.reserve(hits.size());
    for (auto& slot : slots)
        if (slot) out.push_back(std::move(*slot));
    std::stable_sort(out.begin(), out.end(), [](const Alignment& a, const Alignment& b) {
        if (a.evalue != b.evalue) return a.evalue < b.evalue;
        return a.target_id < b.target_id;
    });
    return out;
}

// One TSV row per alignment, matching the documented report layout.
inline std::string alignment_tsv_row(const Alignment& a, const std::string& query_id,
                                     const std::string& target_id) {
    std::ostringstream out;
    out << query_id << '\t' << target_id << '\t' << a.raw_score << '\t';
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", a.bit_score);
    out << buf << '\t';
    std::snprintf(buf, sizeof buf, "%.3g", a.evalue);
    out << buf << '\t' << a.q_start << '\t' << a.q_end << '\t' << a.t_start << '\t' << a.t_end
        << '\t';
    std::snprintf(buf, sizeof buf, "%.4f\t%.4f\t%.4f", a.identity, a.q_cov, a.t_cov);
    out << buf << '\n';
    return out.str();
}

inline constexpr const char* kAlignmentTsvHeader =
    "query\ttarget\traw_score\tbit_score\tevalue\tq_start\tq_end\tt_start\tt_end\tidentity\tq_cov\tt_cov\n";

}  // namespace profgen
