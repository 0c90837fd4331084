#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "profgen/binio.hpp"
#include "profgen/errors.hpp"
#include "profgen/fasta.hpp"

namespace profgen {

// The compiled sequence store: all residues in one pool plus per-sequence
// offsets, lengths and headers. Immutable once built; shared read-only.
struct TargetDB {
    std::vector<uint8_t> residue_pool;
    std::vector<uint64_t> offsets;
    std::vector<uint32_t> lengths;
    std::vector<std::string> headers;
    uint64_t total_residues = 0;

    size_t seq_count() const { return offsets.size(); }

    std::span<const uint8_t> sequence(size_t id) const {
        return {residue_pool.data() + offsets[id], lengths[id]};
    }

    static TargetDB build(std::vector<SequenceRecord>&& records) {
        TargetDB db;
        db.offsets.reserve(records.size());
        db.lengths.reserve(records.size());
        db.headers.reserve(records.size());
        for (auto& rec : records) {
            db.offsets.push_back(db.residue_pool.size());
            db.lengths.push_back(static_cast<uint32_t>(rec.residues.size()));
            db.residue_pool.insert(db.residue_pool.end(), rec.residues.begin(), rec.residues.end());
            db.headers.push_back(std::move(rec.header));
        }
        db.total_residues = db.residue_pool.size();
        return db;
    }

    SequenceRecord record(size_t id) const {
        const auto seq = sequence(id);
        return {headers[id], {seq.begin(), seq.end()}};
    }

    bool operator==(const TargetDB& o) const = default;
};

namespace dbformat {

inline constexpr char kMagic[4] = {'E', 'P', 'S', 'G'};
inline constexpr uint32_t kVersion = 1;
inline constexpr uint32_t kKindTargetDB = 1;
inline constexpr uint32_t kKindKmerIndex = 2;
inline constexpr const char* kTargetDBFile = "targetdb.bin";
inline constexpr const char* kKmerIndexFile = "targetdb.idx";

// Every file: magic, version, kind, payload hash, payload size, payload.
inline std::vector<uint8_t> frame_payload(uint32_t kind, const BinWriter& payload) {
    BinWriter out;
    out.put_bytes(kMagic, 4);
    out.put<uint32_t>(kVersion);
    out.put<uint32_t>(kind);
    out.put<uint64_t>(content_hash64(payload.bytes().data(), payload.size()));
    out.put<uint64_t>(static_cast<uint64_t>(payload.size()));
    out.put_bytes(payload.bytes().data(), payload.size());
    return out.bytes();
}

// Validates the frame and returns a reader positioned at the payload.
inline BinReader open_payload(const std::vector<uint8_t>& file, uint32_t expected_kind,
                              const std::string& origin) {
    BinReader hdr(file.data(), file.size(), origin);
    char magic[4];
    for (auto& c : magic) c = hdr.get<char>();
    if (std::memcmp(magic, kMagic, 4) != 0) throw InputError(origin + ": bad magic");
    const auto version = hdr.get<uint32_t>();
    if (version != kVersion)
        throw InputError(origin + ": format version " + std::to_string(version) +
                         " not supported (expected " + std::to_string(kVersion) + ")");
    const auto kind = hdr.get<uint32_t>();
    if (kind != expected_kind) throw InputError(origin + ": unexpected file kind");
    const auto hash = hdr.get<uint64_t>();
    const auto payload_size = hdr.get<uint64_t>();
    constexpr size_t kHeaderSize = 4 + 4 + 4 + 8 + 8;
    if (file.size() != kHeaderSize + payload_size) throw InputError(origin + ": truncated file");
    if (content_hash64(file.data() + kHeaderSize, payload_size) != hash)
        throw InputError(origin + ": content hash mismatch (corrupt file)");
    return {file.data() + kHeaderSize, payload_size, origin};
}

}  // namespace dbformat

inline BinWriter serialize_target_db(const TargetDB& db) {
    BinWriter w;
    w.put<uint64_t>(db.seq_count());
    w.put<uint64_t>(db.total_residues);
    w.put_array(db.offsets);
    w.put_array(db.lengths);
    w.put_array(db.residue_pool);
    for (const auto& h : db.headers) w.put_string(h);
    return w;
}

// Content hash identifying this database, used to bind the k-mer index.
inline uint64_t target_db_content_hash(const TargetDB& db) {
    const auto payload = serialize_target_db(db);
    return content_hash64(payload.bytes().data(), payload.size());
}

inline void save_target_db(const TargetDB& db, const std::filesystem::path& dir) {
    const auto file = dbformat::frame_payload(dbformat::kKindTargetDB, serialize_target_db(db));
    write_file(dir / dbformat::kTargetDBFile, file.data(), file.size());
}

inline TargetDB load_target_db(const std::filesystem::path& dir) {
    const auto path = dir / dbformat::kTargetDBFile;
    const auto file = read_file(path);
    auto r = dbformat::open_payload(file, dbformat::kKindTargetDB, path.string());
    TargetDB db;
    const auto seq_count = r.get<uint64_t>();
    db.total_residues = r.get<uint64_t>();
    db.offsets = r.get_array<uint64_t>(seq_count);
    db.lengths = r.get_array<uint32_t>(seq_count);
    db.residue_pool = r.get_array<uint8_t>(db.total_residues);
    db.headers.reserve(seq_count);
    for (uint64_t i = 0; i < seq_count; ++i) db.headers.push_back(r.get_string());
    return db;
}

}  // namespace profgen
