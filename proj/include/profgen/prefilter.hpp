#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <span>
#include <unordered_map>
#include <vector>

#include "profgen/errors.hpp"
#include "profgen/fasta.hpp"
#include "profgen/kmer_index.hpp"
#include "profgen/substitution_matrix.hpp"

namespace profgen {

struct PrefilterHit {
    uint32_t query_id = 0;
    uint32_t target_id = 0;
    int32_t diagonal = 0;  // query_pos - target_pos
    int32_t ungapped_score = 0;
};

struct PrefilterConfig {
    size_t max_seqs = 1000;           // N, the per-query result cap
    int min_ungapped_score = 15;      // admission threshold, raw matrix units
    std::optional<int> similar_kmer_threshold;  // disabled by default
};

// Best-scoring contiguous segment of substitution scores along one
// diagonal; 0 when every segment scores negative.
inline int diagonal_score(std::span<const uint8_t> query, std::span<const uint8_t> target,
                          int32_t diagonal, const SubstitutionMatrix& matrix) {
    const auto qlen = static_cast<int64_t>(query.size());
    const auto tlen = static_cast<int64_t>(target.size());
    if (diagonal <= -tlen || diagonal >= qlen)
        throw InputError("diagonal " + std::to_string(diagonal) + " out of bounds");
    const int64_t q_begin = std::max<int64_t>(0, diagonal);
    const int64_t q_end = std::min(qlen, tlen + diagonal);  // exclusive
    int best = 0, run = 0;
    for (int64_t q = q_begin; q < q_end; ++q) {
        run += matrix.score(query[q], target[q - diagonal]);
        if (run < 0) run = 0;
        if (run > best) best = run;
    }
    return best;
}

// All k-mers scoring >= threshold against the given k-mer, itself included.
// Guarded against combinatorial blow-up for k > 4.
inline std::vector<uint32_t> expand_similar_kmers(std::span<const uint8_t> kmer,
                                                  const SubstitutionMatrix& matrix,
                                                  int threshold) {
    const int k = static_cast<int>(kmer.size());
    const size_t cap = k <= 4 ? kmer_bucket_count(k) : 1000000;

    // Suffix bounds for branch pruning: best achievable score from each tail.
    std::vector<int> suffix_best(k + 1, 0);
    for (int i = k - 1; i >= 0; --i) {
        int best = matrix.score(kmer[i], 0);
        for (uint8_t r = 1; r < kNumResidues; ++r) best = std::max(best, matrix.score(kmer[i], r));
        suffix_best[i] = suffix_best[i + 1] + best;
    }

    std::vector<uint32_t> out;
    std::vector<uint8_t> word(k);
    // Iterative DFS over positions.
    const auto emit = [&](uint32_t code) {
        if (out.size() >= cap)
            throw InputError("similar k-mer expansion too large (threshold " +
                             std::to_string(threshold) + " at k=" + std::to_string(k) + ")");
        out.push_back(code);
    };
    const std::function<void(int, int, uint32_t)> walk = [&](int pos, int score, uint32_t code) {
        if (pos == k) {
            if (score >= threshold) emit(code);
            return;
        }
        for (uint8_t r = 0; r < kNumResidues; ++r) {
            const int s = score + matrix.score(kmer[pos], r);
            if (s + suffix_best[pos + 1] < threshold) continue;
            walk(pos + 1, s, code * kNumResidues + r);
        }
    };
    walk(0, 0, 0);
    std::sort(out.begin(), out.end());
    return out;
}

namespace detail {

struct DiagonalKey {
    uint64_t packed;
    bool operator==(const DiagonalKey&) const = default;
};

struct DiagonalKeyHash {
    size_t operator()(const DiagonalKey& k) const {
        uint64_t x = k.packed;
        x ^= x >> 33;
        x *= 0xff51afd7ed558ccdULL;
        x ^= x >> 33;
        return static_cast<size_t>(x);
    }
};

inline DiagonalKey make_key(uint32_t target, int32_t diagonal) {
    return {static_cast<uint64_t>(target) << 32 |
            static_cast<uint32_t>(diagonal)};
}

}  // namespace detail

// The double-match prefilter: a (target, diagonal) pair is scored once it
// has collected two k-mer matches with increasing query position, then the
// best diagonal per target is kept and the top-N admitted.
inline std::vector<PrefilterHit> prefilter_query(const SequenceRecord& query, const TargetDB& db,
                                                 const KmerIndex& idx, const PrefilterConfig& cfg,
                                                 const SubstitutionMatrix& matrix,
                                                 uint32_t query_id = 0) {
    const int k = idx.k;
    if (query.length() < static_cast<size_t>(k))
        throw InputError("query '" + query.id() + "' shorter than k=" + std::to_string(k));
    if (cfg.max_seqs < 1) throw InputError("max_seqs must be >= 1");

    struct FirstMatch {
        uint32_t qpos;
        bool triggered;
    };
    std::unordered_map<detail::DiagonalKey, FirstMatch, detail::DiagonalKeyHash> seen;
    std::vector<std::pair<uint32_t, int32_t>> triggered;  // insertion order

    const auto& residues = query.residues;
    const auto record_match = [&](uint32_t qpos, const Posting& p) {
        const int32_t diag = static_cast<int32_t>(qpos) - static_cast<int32_t>(p.pos);
        auto [it, inserted] = seen.try_emplace(detail::make_key(p.seq_id, diag),
                                               FirstMatch{qpos, false});
        if (!inserted && !it->second.triggered && qpos > it->second.qpos) {
            it->second.triggered = true;
            triggered.emplace_back(p.seq_id, diag);
        }
    };

    std::vector<uint8_t> window(k);
    for (size_t qpos = 0; qpos + k <= residues.size(); ++qpos) {
        bool has_x = false;
        for (int i = 0; i < k; ++i) {
            window[i] = residues[qpos + i];
            has_x |= window[i] >= kNumResidues;
        }
        if (has_x) continue;
        if (cfg.similar_kmer_threshold) {
            for (const uint32_t code :
                 expand_similar_kmers(window, matrix, *cfg.similar_kmer_threshold))
                for (const auto& p : idx.lookup(code)) record_match(static_cast<uint32_t>(qpos), p);
        } else {
            for (const auto& p : idx.lookup(kmer_code(window)))
                record_match(static_cast<uint32_t>(qpos), p);
        }
    }

    // Best diagonal per target; ties prefer the smaller diagonal value.
    std::unordered_map<uint32_t, PrefilterHit> best;
    for (const auto& [target, diag] : triggered) {
        const int score = diagonal_score(residues, db.sequence(target), diag, matrix);
        auto [it, inserted] =
            best.try_emplace(target, PrefilterHit{query_id, target, diag, score});
        if (!inserted && (score > it->second.ungapped_score ||
                          (score == it->second.ungapped_score && diag < it->second.diagonal)))
            it->second = PrefilterHit{query_id, target, diag, score};
    }

    // Bounded min-heap over (score desc, target asc); the heap top is the
    // current worst admitted hit.
    struct Worse {
        bool operator()(const PrefilterHit& a, const PrefilterHit& b) const {
            if (a.ungapped_score != b.ungapped_score) return a.ungapped_score < b.ungapped_score;
            return a.target_id > b.target_id;
        }
    };
    struct Better {
        bool operator()(const PrefilterHit& a, const PrefilterHit& b) const {
            return Worse{}(b, a);
        }
    };
    std::priority_queue<PrefilterHit, std::vector<PrefilterHit>, Better> heap;
    for (const auto& [target, hit] : best) {
        if (hit.ungapped_score < cfg.min_ungapped_score) continue;
        if (heap.size() < cfg.max_seqs) {
            heap.push(hit);
        } else if (Worse{}(heap.top(), hit)) {
            heap.pop();
            heap.push(hit);
        }
    }

    std::vector<PrefilterHit> hits;
    hits.reserve(heap.size());
    while (!heap.empty()) {
        hits.push_back(heap.top());
        heap.pop();
    }
    std::reverse(hits.begin(), hits.end());
    return hits;
}

}  // namespace profgen
