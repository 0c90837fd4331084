#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "profgen/errors.hpp"
#include "profgen/fasta.hpp"

namespace profgen {

inline constexpr const char* kTupleFileName = "epsapg.tuple";

// One line of the 3-column intermediate format: query header, target header,
// full target sequence. Tab-separated, LF-terminated, no quoting.
struct TupleRecord {
    std::string query_header;
    std::string target_header;
    std::string target_sequence;

    bool operator==(const TupleRecord& o) const = default;
};

namespace detail {
inline void validate_tuple_field(const std::string& s, const char* what) {
    if (s.find_first_of("\t\n") != std::string::npos)
        throw InputError(std::string("tuple ") + what + " contains a tab or newline");
}
}  // namespace detail

// Streaming reader over the tuple format; errors carry the 1-based line.
class TupleReader {
public:
    explicit TupleReader(std::istream& in) : in_(in) {}

    std::optional<TupleRecord> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            const size_t t1 = line.find('\t');
            const size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
            if (t1 == std::string::npos || t2 == std::string::npos ||
                line.find('\t', t2 + 1) != std::string::npos)
                throw InputError("tuple line " + std::to_string(line_no_) +
                                 ": expected exactly 3 tab-separated fields");
            TupleRecord rec;
            rec.query_header = line.substr(0, t1);
            rec.target_header = line.substr(t1 + 1, t2 - t1 - 1);
            rec.target_sequence = line.substr(t2 + 1);
            for (char c : rec.target_sequence)
                if (residue_index(c) < 0)
                    throw InputError("tuple line " + std::to_string(line_no_) +
                                     ": invalid residue '" + std::string(1, c) + "' in column 3");
            return rec;
        }
        return std::nullopt;
    }

private:
    std::istream& in_;
    size_t line_no_ = 0;
};

inline std::vector<TupleRecord> read_tuples(std::istream& in) {
    TupleReader reader(in);
    std::vector<TupleRecord> out;
    while (auto rec = reader.next()) out.push_back(std::move(*rec));
    return out;
}

inline void write_tuple(const TupleRecord& rec, std::ostream& out) {
    detail::validate_tuple_field(rec.query_header, "query header");
    detail::validate_tuple_field(rec.target_header, "target header");
    detail::validate_tuple_field(rec.target_sequence, "target sequence");
    out << rec.query_header << '\t' << rec.target_header << '\t' << rec.target_sequence << '\n';
}

inline void write_tuples(const std::vector<TupleRecord>& records, std::ostream& out) {
    for (const auto& rec : records) write_tuple(rec, out);
}

}  // namespace profgen
