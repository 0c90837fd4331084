#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "profgen/binio.hpp"
#include "profgen/errors.hpp"
#include "profgen/target_db.hpp"

namespace profgen {

inline constexpr int kMinKmerK = 4;
inline constexpr int kMaxKmerK = 7;

struct Posting {
    uint32_t seq_id;
    uint32_t pos;

    bool operator==(const Posting&) const = default;
};

inline uint64_t kmer_bucket_count(int k) {
    uint64_t n = 1;
    for (int i = 0; i < k; ++i) n *= kNumResidues;
    return n;
}

// Packs k canonical residues into a base-20 code, first residue most
// significant. Windows containing X have no code and are never indexed.
inline uint32_t kmer_code(std::span<const uint8_t> window) {
    uint32_t code = 0;
    for (const uint8_t r : window) code = code * kNumResidues + r;
    return code;
}

// Inverted k-mer index over a TargetDB: a flat bucket directory (one slot
// per possible k-mer) into a postings array sorted by (seq_id, pos).
struct KmerIndex {
    int k = 0;
    uint64_t built_from = 0;  // content hash of the TargetDB
    std::vector<uint64_t> bucket_starts;  // bucket_count + 1 entries
    std::vector<Posting> postings;

    std::span<const Posting> lookup(uint32_t code) const {
        return {postings.data() + bucket_starts[code],
                postings.data() + bucket_starts[code + 1]};
    }

    bool operator==(const KmerIndex&) const = default;
};

inline KmerIndex build_kmer_index(const TargetDB& db, int k) {
    if (k < kMinKmerK || k > kMaxKmerK)
        throw InputError("k = " + std::to_string(k) + " out of range [" +
                         std::to_string(kMinKmerK) + "," + std::to_string(kMaxKmerK) + "]");
    KmerIndex idx;
    idx.k = k;
    idx.built_from = target_db_content_hash(db);
    const uint64_t buckets = kmer_bucket_count(k);

    // Two passes: bucket sizes, then fill. Iterating sequences in order and
    // positions ascending leaves every bucket sorted by (seq_id, pos).
    std::vector<uint32_t> counts(buckets, 0);
    const auto each_kmer = [&](auto&& fn) {
        for (size_t s = 0; s < db.seq_count(); ++s) {
            const auto seq = db.sequence(s);
            if (seq.size() < static_cast<size_t>(k)) continue;
            // Incremental code with an X-free run tracker.
            uint32_t code = 0;
            const uint32_t mod = static_cast<uint32_t>(kmer_bucket_count(k - 1));
            size_t run = 0;  // residues since last X
            for (size_t p = 0; p < seq.size(); ++p) {
                if (seq[p] >= kNumResidues) {
                    run = 0;
                    code = 0;
                    continue;
                }
                code = (code % mod) * kNumResidues + seq[p];
                if (++run >= static_cast<size_t>(k))
                    fn(static_cast<uint32_t>(s), static_cast<uint32_t>(p - k + 1), code);
            }
        }
    };

    each_kmer([&](uint32_t, uint32_t, uint32_t code) { ++counts[code]; });

    idx.bucket_starts.assign(buckets + 1, 0);
    for (uint64_t b = 0; b < buckets; ++b) idx.bucket_starts[b + 1] = idx.bucket_starts[b] + counts[b];
    idx.postings.resize(idx.bucket_starts[buckets]);

    std::vector<uint64_t> cursor(idx.bucket_starts.begin(), idx.bucket_starts.end() - 1);
    each_kmer([&](uint32_t s, uint32_t p, uint32_t code) {
        idx.postings[cursor[code]++] = Posting{s, p};
    });
    return idx;
}

// Parses FASTA and compiles both halves of the persisted database.
inline std::pair<TargetDB, KmerIndex> build_index(std::istream& db_fasta, int k,
                                                  size_t* normalized = nullptr) {
    auto records = parse_fasta(db_fasta, normalized);
    auto db = TargetDB::build(std::move(records));
    auto idx = build_kmer_index(db, k);
    return {std::move(db), std::move(idx)};
}

inline void save_kmer_index(const KmerIndex& idx, const std::filesystem::path& dir) {
    BinWriter w;
    w.put<uint32_t>(static_cast<uint32_t>(idx.k));
    w.put<uint32_t>(0);  // reserved
    w.put<uint64_t>(idx.built_from);
    const uint64_t buckets = kmer_bucket_count(idx.k);
    w.put<uint64_t>(buckets);
    w.put<uint64_t>(idx.postings.size());
    // Directory: one (offset, count) pair per possible k-mer.
    for (uint64_t b = 0; b < buckets; ++b) {
        w.put<uint64_t>(idx.bucket_starts[b]);
        w.put<uint32_t>(static_cast<uint32_t>(idx.bucket_starts[b + 1] - idx.bucket_starts[b]));
    }
    w.put_array(idx.postings);
    const auto file = dbformat::frame_payload(dbformat::kKindKmerIndex, w);
    write_file(dir / dbformat::kKmerIndexFile, file.data(), file.size());
}

inline KmerIndex load_kmer_index(const std::filesystem::path& dir) {
    const auto path = dir / dbformat::kKmerIndexFile;
    const auto file = read_file(path);
    auto r = dbformat::open_payload(file, dbformat::kKindKmerIndex, path.string());
    KmerIndex idx;
    idx.k = static_cast<int>(r.get<uint32_t>());
    r.get<uint32_t>();  // reserved
    idx.built_from = r.get<uint64_t>();
    const auto buckets = r.get<uint64_t>();
    if (idx.k < kMinKmerK || idx.k > kMaxKmerK || buckets != kmer_bucket_count(idx.k))
        throw InputError(path.string() + ": inconsistent k / bucket count");
    const auto posting_count = r.get<uint64_t>();
    idx.bucket_starts.resize(buckets + 1);
    idx.bucket_starts[0] = 0;
    for (uint64_t b = 0; b < buckets; ++b) {
        const auto offset = r.get<uint64_t>();
        const auto count = r.get<uint32_t>();
        if (offset != idx.bucket_starts[b])
            throw InputError(path.string() + ": directory offsets not contiguous");
        idx.bucket_starts[b + 1] = offset + count;
    }
    if (idx.bucket_starts[buckets] != posting_count)
        throw InputError(path.string() + ": posting count mismatch");
    idx.postings = r.get_array<Posting>(posting_count);
    return idx;
}

inline void save_index(const TargetDB& db, const KmerIndex& idx, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_target_db(db, dir);
    save_kmer_index(idx, dir);
}

// Loads both files and verifies the index was built from this database.
inline std::pair<TargetDB, KmerIndex> load_index(const std::filesystem::path& dir) {
    auto db = load_target_db(dir);
    auto idx = load_kmer_index(dir);
    if (idx.built_from != target_db_content_hash(db))
        throw InputError((dir / dbformat::kKmerIndexFile).string() +
                         ": index was not built from this target database");
    return {std::move(db), std::move(idx)};
}

}  // namespace profgen
