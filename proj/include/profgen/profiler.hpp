#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "profgen/align.hpp"
#include "profgen/binio.hpp"
#include "profgen/errors.hpp"
#include "profgen/goldendb.hpp"
#include "profgen/substitution_matrix.hpp"

namespace profgen {

struct ProfileColumn {
    uint8_t query_residue = 0;
    std::array<double, kNumResidues> f{};        // weighted observed frequencies
    std::array<double, kNumResidues> g{};        // pseudocount frequencies
    std::array<double, kNumResidues> f_prime{};  // mixed frequencies
    std::array<int, kNumResidues> scores{};
    double info_content = 0.0;  // bits
    double n_eff = 1.0;         // Nc

    bool operator==(const ProfileColumn&) const = default;
};

struct PSSM {
    std::string query_header;
    std::string matrix_name;
    std::string residue_order{kResidueOrder};
    std::vector<ProfileColumn> columns;

    bool operator==(const PSSM&) const = default;
};

// Query-anchored residue stack: one row per included sequence, one entry
// per query position. -1 marks positions a row does not cover; member X
// residues are unattributable and also stored as -1. Row 0 is the query.
struct AlignmentStack {
    std::string query_header;
    std::vector<uint8_t> query_residues;
    std::vector<std::vector<int8_t>> rows;
    size_t excluded_members = 0;  // dropped by the inclusion e-value
};

namespace detail {

inline void project_member(const Alignment& aln, const std::vector<uint8_t>& member,
                           std::vector<int8_t>& row) {
    size_t q = aln.q_start, t = aln.t_start;
    for (const auto& run : aln.ops) {
        switch (run.op) {
            case EditOp::Match:
                for (uint32_t i = 0; i < run.len; ++i, ++q, ++t)
                    row[q] = member[t] < kNumResidues ? static_cast<int8_t>(member[t]) : -1;
                break;
            case EditOp::TargetGap:  // member gap against these query positions
                q += run.len;
                break;
            case EditOp::QueryGap:  // member insertion, discarded
                t += run.len;
                break;
        }
    }
}

// Sum with ascending-sorted addends: identical multisets of values produce
// bit-identical results, so member order cannot perturb the profile.
inline double stable_sum(std::vector<double>& values) {
    std::sort(values.begin(), values.end());
    double s = 0.0;
    for (double v : values) s += v;
    return s;
}

}  // namespace detail

// Aligns every golden member to the query with the supplied aligner and
// projects the survivors onto query coordinates. Members are excluded when
// their e-value against the golden set's residue count exceeds the
// inclusion threshold.
template <typename AlignFn>
AlignmentStack stack_alignments_with(const GoldenSet& golden, const GappedKarlinParams& gaps,
                                     double inclusion_evalue, AlignFn&& align_member) {
    if (golden.members.empty()) throw InputError("cannot profile an empty golden set");
    if (golden.members[0].id() != golden.query.id())
        throw InternalError("golden set does not start with its query");

    AlignmentStack stack;
    stack.query_header = golden.query.header;
    stack.query_residues = golden.query.residues;
    const size_t qlen = stack.query_residues.size();

    auto& query_row = stack.rows.emplace_back(qlen, int8_t{-1});
    for (size_t i = 0; i < qlen; ++i)
        query_row[i] =
            stack.query_residues[i] < kNumResidues ? static_cast<int8_t>(stack.query_residues[i]) : -1;

    const uint64_t golden_residues = golden.total_residues();
    for (size_t m = 1; m < golden.members.size(); ++m) {
        const auto& member = golden.members[m];
        std::optional<Alignment> aln = align_member(member);
        if (!aln) {
            ++stack.excluded_members;
            continue;
        }
        const double e = evalue(aln->raw_score, qlen, golden_residues, gaps);
        if (e > inclusion_evalue) {
            ++stack.excluded_members;
            continue;
        }
        auto& row = stack.rows.emplace_back(qlen, int8_t{-1});
        detail::project_member(*aln, member.residues, row);
    }
    return stack;
}

inline AlignmentStack stack_alignments(const GoldenSet& golden, const SubstitutionMatrix& matrix,
                                       const GappedKarlinParams& gaps,
                                       double inclusion_evalue = 10.0) {
    return stack_alignments_with(golden, gaps, inclusion_evalue,
                                 [&](const SequenceRecord& member) {
                                     return smith_waterman(golden.query.residues, member.residues,
                                                           matrix, gaps);
                                 });
}

// Position-based sequence weights, weighted frequencies, pseudocount mix,
// integer log-odds. beta is the pseudocount weight; alpha = Nc - 1.
inline PSSM build_pssm(const AlignmentStack& stack, const SubstitutionMatrix& matrix,
                       double beta = 10.0) {
    const size_t qlen = stack.query_residues.size();
    const size_t nrows = stack.rows.size();
    if (qlen == 0 || nrows == 0) throw InputError("cannot build a PSSM from an empty stack");

    // Per-column residue counts feed both the weights and Nc.
    std::vector<std::array<uint32_t, kNumResidues>> counts(qlen);
    std::vector<uint32_t> distinct(qlen, 0);
    for (size_t c = 0; c < qlen; ++c) {
        auto& col = counts[c];
        col.fill(0);
        for (const auto& row : stack.rows)
            if (row[c] >= 0) ++col[static_cast<size_t>(row[c])];
        for (uint32_t n : col) distinct[c] += n > 0;
    }

    // Henikoff position-based weights over the stacked columns.
    std::vector<double> weights(nrows, 0.0);
    for (size_t c = 0; c < qlen; ++c) {
        if (distinct[c] == 0) continue;
        const double r = static_cast<double>(distinct[c]);
        for (size_t w = 0; w < nrows; ++w) {
            const int8_t res = stack.rows[w][c];
            if (res >= 0) weights[w] += 1.0 / (r * counts[c][static_cast<size_t>(res)]);
        }
    }
    {
        std::vector<double> tmp = weights;
        const double total = detail::stable_sum(tmp);
        if (total > 0)
            for (auto& w : weights) w /= total;
    }

    // Nc: mean distinct residue count over columns any non-query member covers.
    double n_eff = 1.0;
    {
        uint64_t covered = 0;
        uint64_t distinct_sum = 0;
        for (size_t c = 0; c < qlen; ++c) {
            bool member_covers = false;
            for (size_t w = 1; w < nrows && !member_covers; ++w) member_covers = stack.rows[w][c] >= 0;
            if (member_covers) {
                ++covered;
                distinct_sum += distinct[c];
            }
        }
        if (covered > 0) n_eff = static_cast<double>(distinct_sum) / static_cast<double>(covered);
    }
    const double alpha = n_eff - 1.0;

    PSSM pssm;
    pssm.query_header = stack.query_header;
    pssm.matrix_name = matrix.name;
    pssm.columns.resize(qlen);

    std::vector<double> addends;
    for (size_t c = 0; c < qlen; ++c) {
        auto& col = pssm.columns[c];
        col.query_residue = stack.query_residues[c];
        col.n_eff = n_eff;

        // Weighted observed frequencies; background when nothing observable
        // covers the column (query X with no member residues).
        std::array<double, kNumResidues> f{};
        if (distinct[c] > 0) {
            std::array<double, kNumResidues> by_res{};
            addends.clear();
            for (int r = 0; r < kNumResidues; ++r) {
                if (counts[c][r] == 0) continue;
                std::vector<double> vals;
                for (size_t w = 0; w < nrows; ++w)
                    if (stack.rows[w][c] == r) vals.push_back(weights[w]);
                by_res[r] = detail::stable_sum(vals);
                addends.push_back(by_res[r]);
            }
            const double denom = detail::stable_sum(addends);
            for (int r = 0; r < kNumResidues; ++r) f[r] = denom > 0 ? by_res[r] / denom : 0.0;
        } else {
            f = matrix.background;
        }
        col.f = f;

        for (int i = 0; i < kNumResidues; ++i) {
            double g = 0.0;
            for (int j = 0; j < kNumResidues; ++j)
                g += f[j] / matrix.background[j] * matrix.target_freqs[j][i];
            col.g[i] = g;
        }
        for (int i = 0; i < kNumResidues; ++i)
            col.f_prime[i] =
                alpha == 0.0 ? col.g[i] : (alpha * f[i] + beta * col.g[i]) / (alpha + beta);

        double info = 0.0;
        for (int i = 0; i < kNumResidues; ++i) {
            col.scores[i] = static_cast<int>(
                std::lround(std::log(col.f_prime[i] / matrix.background[i]) / matrix.lambda_u));
            if (col.f_prime[i] > 0)
                info += col.f_prime[i] * std::log2(col.f_prime[i] / matrix.background[i]);
        }
        col.info_content = std::max(0.0, info);
    }
    return pssm;
}

struct ProfilerOptions {
    double inclusion_evalue = 10.0;
    double pseudocount_beta = 10.0;
    int iterations = 1;
};

// Full profiling pass for one golden set. Iterations beyond the first
// re-stack the members using the previous PSSM's position scores.
inline PSSM build_profile(const GoldenSet& golden, const SubstitutionMatrix& matrix,
                          const GappedKarlinParams& gaps, const ProfilerOptions& opt = {}) {
    auto stack = stack_alignments(golden, matrix, gaps, opt.inclusion_evalue);
    PSSM pssm = build_pssm(stack, matrix, opt.pseudocount_beta);
    for (int iter = 1; iter < opt.iterations; ++iter) {
        const PSSM previous = std::move(pssm);
        auto rescore = [&](const SequenceRecord& member) {
            return detail::smith_waterman_core(
                previous.columns.size(), golden.query.residues, member.residues,
                [&](size_t qpos, uint8_t t) {
                    return t < kNumResidues ? previous.columns[qpos].scores[t] : -1;
                },
                gaps, std::nullopt);
        };
        stack = stack_alignments_with(golden, gaps, opt.inclusion_evalue, rescore);
        pssm = build_pssm(stack, matrix, opt.pseudocount_beta);
    }
    return pssm;
}

// ASCII layout: two header lines, then per position the 1-based index, the
// query residue, 20 integer scores, 20 rounded percentages of the mixed
// frequencies, and the information content.
inline void write_ascii_pssm(const PSSM& pssm, std::ostream& out) {
    SequenceRecord probe{pssm.query_header, {}};
    out << "# PSSM query=" << probe.id() << " length=" << pssm.columns.size()
        << " matrix=" << pssm.matrix_name << "\n";
    out << "#  pos res";
    for (int rep = 0; rep < 2; ++rep) {
        for (char c : pssm.residue_order) out << "   " << c;
        out << (rep == 0 ? "  " : "    info\n");
    }
    char buf[32];
    for (size_t c = 0; c < pssm.columns.size(); ++c) {
        const auto& col = pssm.columns[c];
        std::snprintf(buf, sizeof buf, "%6zu   %c", c + 1, residue_letter(col.query_residue));
        out << buf;
        for (int i = 0; i < kNumResidues; ++i) {
            std::snprintf(buf, sizeof buf, " %3d", col.scores[i]);
            out << buf;
        }
        out << "  ";
        for (int i = 0; i < kNumResidues; ++i) {
            std::snprintf(buf, sizeof buf, " %3d",
                          static_cast<int>(std::lround(col.f_prime[i] * 100.0)));
            out << buf;
        }
        std::snprintf(buf, sizeof buf, "  %6.2f", col.info_content);
        out << buf << "\n";
    }
}

inline std::string ascii_pssm_string(const PSSM& pssm) {
    std::ostringstream out;
    write_ascii_pssm(pssm, out);
    return out.str();
}

namespace pssmformat {
inline constexpr char kMagic[4] = {'E', 'P', 'S', 'P'};
inline constexpr uint32_t kVersion = 1;
}  // namespace pssmformat

inline void write_binary_pssm(const PSSM& pssm, std::ostream& out) {
    BinWriter w;
    w.put_bytes(pssmformat::kMagic, 4);
    w.put<uint32_t>(pssmformat::kVersion);
    w.put<uint32_t>(static_cast<uint32_t>(pssm.columns.size()));
    for (const auto& col : pssm.columns) {
        w.put<uint8_t>(col.query_residue);
        for (int s : col.scores) w.put<int32_t>(s);
        for (double v : col.f) w.put<double>(v);
        for (double v : col.g) w.put<double>(v);
        for (double v : col.f_prime) w.put<double>(v);
        w.put<double>(col.info_content);
        w.put<double>(col.n_eff);
    }
    w.put_string(pssm.query_header);
    w.put_string(pssm.matrix_name);
    out.write(reinterpret_cast<const char*>(w.bytes().data()),
              static_cast<std::streamsize>(w.size()));
    if (!out) throw InputError("binary PSSM write failed");
}

inline PSSM read_binary_pssm(std::istream& in) {
    std::vector<uint8_t> bytes{std::istreambuf_iterator<char>(in), {}};
    BinReader r(bytes.data(), bytes.size(), "binary PSSM");
    char magic[4];
    for (auto& c : magic) c = r.get<char>();
    if (std::memcmp(magic, pssmformat::kMagic, 4) != 0) throw InputError("binary PSSM: bad magic");
    const auto version = r.get<uint32_t>();
    if (version != pssmformat::kVersion)
        throw InputError("binary PSSM: unsupported version " + std::to_string(version));
    PSSM pssm;
    const auto n = r.get<uint32_t>();
    pssm.columns.resize(n);
    for (auto& col : pssm.columns) {
        col.query_residue = r.get<uint8_t>();
        for (auto& s : col.scores) s = r.get<int32_t>();
        for (auto& v : col.f) v = r.get<double>();
        for (auto& v : col.g) v = r.get<double>();
        for (auto& v : col.f_prime) v = r.get<double>();
        col.info_content = r.get<double>();
        col.n_eff = r.get<double>();
    }
    pssm.query_header = r.get_string();
    pssm.matrix_name = r.get_string();
    return pssm;
}

}  // namespace profgen
