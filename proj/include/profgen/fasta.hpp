#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include "profgen/alphabet.hpp"
#include "profgen/errors.hpp"

namespace profgen {

// A parsed FASTA entry. The header is everything after '>' up to the
// newline, kept verbatim; residues are alphabet indices (X-normalized).
struct SequenceRecord {
    std::string header;
    std::vector<uint8_t> residues;

    // First whitespace-delimited header token, used as the identifier.
    std::string id() const {
        const size_t start = header.find_first_not_of(" \t");
        if (start == std::string::npos) return {};
        const size_t end = header.find_first_of(" \t", start);
        return header.substr(start, end == std::string::npos ? std::string::npos : end - start);
    }

    size_t length() const { return residues.size(); }

    bool operator==(const SequenceRecord& o) const = default;
};

inline std::vector<uint8_t> residues_from_string(std::string_view text, size_t* normalized = nullptr,
                                                 const char* context = "sequence") {
    std::vector<uint8_t> out;
    out.reserve(text.size());
    for (char c : text) {
        const int idx = residue_index(c);
        if (idx >= 0) {
            out.push_back(static_cast<uint8_t>(idx));
        } else if (is_ambiguous_letter(c) || (std::isalpha(static_cast<unsigned char>(c)))) {
            out.push_back(kResidueX);
            if (normalized) ++(*normalized);
        } else {
            throw InputError(std::string(context) + ": invalid residue character '" +
                             std::string(1, c) + "'");
        }
    }
    return out;
}

// Streaming FASTA reader; memory use is bounded by the largest record.
class FastaReader {
public:
    explicit FastaReader(std::istream& in) : in_(in) {}

    std::optional<SequenceRecord> next() {
        std::string line;
        if (!pending_header_) {
            // Find the first record, tolerating leading blank lines.
            while (std::getline(in_, line)) {
                strip_eol(line);
                if (line.empty()) continue;
                if (line[0] != '>') throw InputError("FASTA: expected '>' at start of input");
                pending_header_ = line.substr(1);
                break;
            }
            if (!pending_header_) return std::nullopt;  // empty input
        }

        SequenceRecord rec;
        rec.header = *pending_header_;
        pending_header_.reset();
        std::string body;
        while (std::getline(in_, line)) {
            strip_eol(line);
            if (!line.empty() && line[0] == '>') {
                pending_header_ = line.substr(1);
                break;
            }
            body += line;
        }
        if (body.empty())
            throw InputError("FASTA: record '" + rec.id() + "' has an empty sequence body");
        rec.residues = residues_from_string(body, &normalized_residues_, "FASTA");
        ++records_read_;
        return rec;
    }

    // Count of residue letters normalized to X so far.
    size_t normalized_residues() const { return normalized_residues_; }
    size_t records_read() const { return records_read_; }

private:
    static void strip_eol(std::string& s) {
        while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
    }

    std::istream& in_;
    std::optional<std::string> pending_header_;
    size_t normalized_residues_ = 0;
    size_t records_read_ = 0;
};

// Reads all records; rejects duplicate identifiers (first header token).
inline std::vector<SequenceRecord> parse_fasta(std::istream& in, size_t* normalized = nullptr) {
    FastaReader reader(in);
    std::vector<SequenceRecord> records;
    std::unordered_set<std::string> seen;
    while (auto rec = reader.next()) {
        if (!seen.insert(rec->id()).second)
            throw InputError("FASTA: duplicate identifier '" + rec->id() + "'");
        records.push_back(std::move(*rec));
    }
    if (normalized) *normalized += reader.normalized_residues();
    return records;
}

inline void write_fasta(const SequenceRecord& rec, std::ostream& out, size_t wrap = 60) {
    out << '>' << rec.header << '\n';
    const std::string body = residues_to_string(rec.residues);
    for (size_t i = 0; i < body.size(); i += wrap)
        out << body.substr(i, wrap) << '\n';
}

inline void write_fasta(const std::vector<SequenceRecord>& records, std::ostream& out,
                        size_t wrap = 60) {
    for (const auto& rec : records) write_fasta(rec, out, wrap);
}

}  // namespace profgen
