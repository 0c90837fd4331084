#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "profgen/alphabet.hpp"
#include "profgen/errors.hpp"
#include "profgen/matrices_data.hpp"

namespace profgen {

// Integer log-odds substitution scores over the 21-letter alphabet plus the
// statistical quantities derived from them: the ungapped scale lambda_u
// (nats), background frequencies and implied pair target frequencies.
struct SubstitutionMatrix {
    std::string name;
    std::array<std::array<int, kAlphabetSize>, kAlphabetSize> scores{};
    double lambda_u = 0.0;
    std::array<double, kNumResidues> background{};
    std::array<std::array<double, kNumResidues>, kNumResidues> target_freqs{};

    int score(uint8_t a, uint8_t b) const { return scores[a][b]; }

    int max_diagonal_score() const {
        int m = scores[0][0];
        for (int i = 1; i < kNumResidues; ++i) m = std::max(m, scores[i][i]);
        return m;
    }

    // Largest relative deviation of a recomputed target-frequency row sum
    // from its background frequency. Small for self-consistent matrices.
    double row_sum_deviation() const {
        double worst = 0.0;
        for (int i = 0; i < kNumResidues; ++i) {
            double s = 0.0;
            for (int j = 0; j < kNumResidues; ++j) s += target_freqs[i][j];
            worst = std::max(worst, std::abs(s - background[i]) / background[i]);
        }
        return worst;
    }
};

// Gapped Karlin-Altschul parameters paired with a matrix and gap penalties.
// A gap of length g costs gap_open + g * gap_extend.
struct GappedKarlinParams {
    double lambda_g = 0.0;
    double k_const = 0.0;
    int gap_open = 0;
    int gap_extend = 0;
};

namespace detail {

inline double restricted_sum(const SubstitutionMatrix& m, double lambda) {
    double s = 0.0;
    for (int i = 0; i < kNumResidues; ++i)
        for (int j = 0; j < kNumResidues; ++j)
            s += m.background[i] * m.background[j] * std::exp(lambda * m.scores[i][j]);
    return s;
}

// Solves sum_ij P_i P_j exp(lambda * s_ij) = 1 for the unique positive root.
inline double solve_ungapped_lambda(const SubstitutionMatrix& m) {
    // Bracket the root by doubling; f(0) = 0 and f is eventually positive
    // only if the matrix has at least one positive score.
    double hi = 1.0;
    const double kMaxLambda = 64.0;
    while (detail::restricted_sum(m, hi) < 1.0) {
        hi *= 2.0;
        if (hi > kMaxLambda) throw InputError("matrix '" + m.name + "': no positive lambda root");
    }
    double lo = 0.0;
    // f just above zero must be < 1 (negative expected score); if not, the
    // matrix admits no Karlin statistics.
    if (detail::restricted_sum(m, 1e-6) >= 1.0)
        throw InputError("matrix '" + m.name + "': no positive lambda root");
    for (int iter = 0; iter < 200 && hi - lo > 1e-10; ++iter) {
        const double mid = 0.5 * (lo + hi);
        (detail::restricted_sum(m, mid) < 1.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct ParsedTable {
    std::vector<char> letters;
    std::vector<std::vector<int>> rows;
};

inline ParsedTable parse_matrix_table(std::string_view text, const std::string& origin) {
    ParsedTable t;
    std::istringstream in{std::string(text)};
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        if (!have_header) {
            std::string tok;
            while (ls >> tok) {
                if (tok.size() != 1)
                    throw InputError(origin + ": malformed matrix header token '" + tok + "'");
                t.letters.push_back(static_cast<char>(std::toupper(tok[0])));
            }
            if (t.letters.empty()) throw InputError(origin + ": empty matrix header");
            have_header = true;
            continue;
        }
        std::string label;
        ls >> label;
        if (label.size() != 1)
            throw InputError(origin + ": malformed matrix row label '" + label + "'");
        std::vector<int> row;
        long v;
        while (ls >> v) row.push_back(static_cast<int>(v));
        if (row.size() != t.letters.size())
            throw InputError(origin + ": matrix row '" + label + "' has " +
                             std::to_string(row.size()) + " entries, expected " +
                             std::to_string(t.letters.size()));
        // Row order must follow the header order.
        const size_t idx = t.rows.size();
        if (idx >= t.letters.size() || std::toupper(label[0]) != t.letters[idx])
            throw InputError(origin + ": matrix row label '" + label + "' does not match header order");
        t.rows.push_back(std::move(row));
    }
    if (t.rows.size() != t.letters.size())
        throw InputError(origin + ": matrix has " + std::to_string(t.rows.size()) +
                         " rows, expected " + std::to_string(t.letters.size()));
    return t;
}

}  // namespace detail

// Builds a SubstitutionMatrix from matrix text. Rows/columns for letters
// outside the canonical 20 (B, Z, X, *, ...) are ignored so published files
// load unchanged; X entries always follow the fixed policy (-1 vs anything,
// 0 vs X). Background defaults to uniform when none is supplied.
inline SubstitutionMatrix parse_matrix(std::string_view text, const std::string& name,
                                       const double* background20 = nullptr) {
    const auto table = detail::parse_matrix_table(text, name);

    std::array<int, kNumResidues> col_of{};
    col_of.fill(-1);
    for (size_t c = 0; c < table.letters.size(); ++c) {
        const int idx = residue_index(table.letters[c]);
        if (idx >= 0 && idx < kNumResidues) col_of[idx] = static_cast<int>(c);
    }
    for (int i = 0; i < kNumResidues; ++i)
        if (col_of[i] < 0)
            throw InputError(name + ": matrix is missing residue '" +
                             std::string(1, kResidueOrder[i]) + "'");

    SubstitutionMatrix m;
    m.name = name;
    for (int i = 0; i < kNumResidues; ++i)
        for (int j = 0; j < kNumResidues; ++j)
            m.scores[i][j] = table.rows[col_of[i]][col_of[j]];

    for (int i = 0; i < kNumResidues; ++i)
        for (int j = i + 1; j < kNumResidues; ++j)
            if (m.scores[i][j] != m.scores[j][i])
                throw InputError(name + ": matrix is not symmetric at (" +
                                 std::string(1, kResidueOrder[i]) + "," +
                                 std::string(1, kResidueOrder[j]) + ")");

    for (int i = 0; i < kNumResidues; ++i) {
        m.scores[i][kResidueX] = -1;
        m.scores[kResidueX][i] = -1;
    }
    m.scores[kResidueX][kResidueX] = 0;

    double sum = 0.0;
    for (int i = 0; i < kNumResidues; ++i) {
        m.background[i] = background20 ? background20[i] : 1.0 / kNumResidues;
        if (m.background[i] <= 0.0) throw InputError(name + ": background frequency must be positive");
        sum += m.background[i];
    }
    for (auto& p : m.background) p /= sum;

    m.lambda_u = detail::solve_ungapped_lambda(m);
    for (int i = 0; i < kNumResidues; ++i)
        for (int j = 0; j < kNumResidues; ++j)
            m.target_freqs[i][j] =
                m.background[i] * m.background[j] * std::exp(m.lambda_u * m.scores[i][j]);
    return m;
}

// Loads a built-in matrix by name or a matrix file by path.
inline SubstitutionMatrix load_matrix(const std::string& name_or_path) {
    std::string lower;
    for (char c : name_or_path) lower.push_back(static_cast<char>(std::tolower(c)));
    if (lower == "blosum62")
        return parse_matrix(builtin::kBlosum62Text, "BLOSUM62", builtin::kBlosum62Background.data());

    std::ifstream f(name_or_path, std::ios::binary);
    if (!f) throw InputError("unknown matrix '" + name_or_path + "' (not a built-in, not a readable file)");
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_matrix(buf.str(), name_or_path);
}

inline std::vector<std::string> builtin_matrix_names() { return {"BLOSUM62"}; }

// Matrix text in the on-disk format, suitable for dumping and reloading.
inline std::string format_matrix(const SubstitutionMatrix& m) {
    std::ostringstream out;
    out << "# " << m.name << "\n ";
    for (int j = 0; j < kAlphabetSize; ++j)
        out << "  " << residue_letter(static_cast<uint8_t>(j)) << " ";
    out << "\n";
    for (int i = 0; i < kAlphabetSize; ++i) {
        out << residue_letter(static_cast<uint8_t>(i));
        for (int j = 0; j < kAlphabetSize; ++j) {
            char buf[8];
            std::snprintf(buf, sizeof buf, " %3d", m.scores[i][j]);
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

// Published gapped constants for BLOSUM62 with gap open 11 / extend 1.
inline GappedKarlinParams default_gapped_params(const SubstitutionMatrix& m) {
    GappedKarlinParams p{0.267, 0.041, 11, 1};
    if (p.lambda_g > m.lambda_u)
        throw InputError("gapped lambda exceeds ungapped lambda of matrix '" + m.name + "'");
    if (p.gap_open + p.gap_extend <= m.max_diagonal_score())
        throw InputError("gap penalties too small for matrix '" + m.name + "'");
    return p;
}

// E = K * m * n * exp(-lambda * S)
inline double evalue(int raw_score, size_t query_len, size_t db_residues,
                     const GappedKarlinParams& params) {
    return params.k_const * static_cast<double>(query_len) * static_cast<double>(db_residues) *
           std::exp(-params.lambda_g * raw_score);
}

inline double bit_score(int raw_score, const GappedKarlinParams& params) {
    return (params.lambda_g * raw_score - std::log(params.k_const)) / std::log(2.0);
}

}  // namespace profgen
