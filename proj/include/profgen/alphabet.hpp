#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace profgen {

// Canonical residue order, fixed everywhere including PSSM output columns.
inline constexpr std::string_view kResidueOrder = "ARNDCQEGHILKMFPSTWYV";
inline constexpr int kNumResidues = 20;
inline constexpr uint8_t kResidueX = 20;  // ambiguous residue
inline constexpr int kAlphabetSize = 21;

// Letters seen in real databases that carry no per-residue statistics;
// they normalize to X at parse time and the normalization is counted.
inline constexpr std::string_view kAmbiguousLetters = "BZJUObzjuo*";

namespace detail {
constexpr std::array<int8_t, 256> build_letter_table() {
    std::array<int8_t, 256> t{};
    for (auto& v : t) v = -1;
    for (int i = 0; i < kNumResidues; ++i) {
        const auto c = static_cast<unsigned char>(kResidueOrder[i]);
        t[c] = static_cast<int8_t>(i);
        t[c + 32] = static_cast<int8_t>(i);  // lowercase
    }
    t['X'] = kResidueX;
    t['x'] = kResidueX;
    return t;
}
inline constexpr auto kLetterTable = build_letter_table();
}  // namespace detail

// Index of a residue letter (case-insensitive), -1 if not in the alphabet.
constexpr int residue_index(char c) {
    return detail::kLetterTable[static_cast<unsigned char>(c)];
}

constexpr bool is_ambiguous_letter(char c) {
    for (char a : kAmbiguousLetters)
        if (a == c) return true;
    return false;
}

constexpr char residue_letter(uint8_t index) {
    return index < kNumResidues ? kResidueOrder[index] : 'X';
}

template <typename Container>
std::string residues_to_string(const Container& residues) {
    std::string s;
    s.reserve(residues.size());
    for (auto r : residues) s.push_back(residue_letter(static_cast<uint8_t>(r)));
    return s;
}

}  // namespace profgen
