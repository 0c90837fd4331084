#pragma once

#include <array>
#include <string_view>

namespace profgen::builtin {

// BLOSUM62 in the text format load_matrix() reads: a header row of residue
// letters, then one labeled row per residue. Numbers match the published
// half-bit matrix so this block can be diffed against reference copies.
inline constexpr std::string_view kBlosum62Text =
    "# BLOSUM62, half-bit scale\n"
    "   A  R  N  D  C  Q  E  G  H  I  L  K  M  F  P  S  T  W  Y  V\n"
    "A  4 -1 -2 -2  0 -1 -1  0 -2 -1 -1 -1 -1 -2 -1  1  0 -3 -2  0\n"
    "R -1  5  0 -2 -3  1  0 -2  0 -3 -2  2 -1 -3 -2 -1 -1 -3 -2 -3\n"
    "N -2  0  6  1 -3  0  0  0  1 -3 -3  0 -2 -3 -2  1  0 -4 -2 -3\n"
    "D -2 -2  1  6 -3  0  2 -1 -1 -3 -4 -1 -3 -3 -1  0 -1 -4 -3 -3\n"
    "C  0 -3 -3 -3  9 -3 -4 -3 -3 -1 -1 -3 -1 -2 -3 -1 -1 -2 -2 -1\n"
    "Q -1  1  0  0 -3  5  2 -2  0 -3 -2  1  0 -3 -1  0 -1 -2 -1 -2\n"
    "E -1  0  0  2 -4  2  5 -2  0 -3 -3  1 -2 -3 -1  0 -1 -3 -2 -2\n"
    "G  0 -2  0 -1 -3 -2 -2  6 -2 -4 -4 -2 -3 -3 -2  0 -2 -2 -3 -3\n"
    "H -2  0  1 -1 -3  0  0 -2  8 -3 -3 -1 -2 -1 -2 -1 -2 -2  2 -3\n"
    "I -1 -3 -3 -3 -1 -3 -3 -4 -3  4  2 -3  1  0 -3 -2 -1 -3 -1  3\n"
    "L -1 -2 -3 -4 -1 -2 -3 -4 -3  2  4 -2  2  0 -3 -2 -1 -2 -1  1\n"
    "K -1  2  0 -1 -3  1  1 -2 -1 -3 -2  5 -1 -3 -1  0 -1 -3 -2 -2\n"
    "M -1 -1 -2 -3 -1  0 -2 -3 -2  1  2 -1  5  0 -2 -1 -1 -1 -1  1\n"
    "F -2 -3 -3 -3 -2 -3 -3 -3 -1  0  0 -3  0  6 -4 -2 -2  1  3 -1\n"
    "P -1 -2 -2 -1 -3 -1 -1 -2 -2 -3 -3 -1 -2 -4  7 -1 -1 -4 -3 -2\n"
    "S  1 -1  1  0 -1  0  0  0 -1 -2 -2  0 -1 -2 -1  4  1 -3 -2 -2\n"
    "T  0 -1  0 -1 -1 -1 -1 -2 -2 -1 -1 -1 -1 -2 -1  1  5 -2 -2  0\n"
    "W -3 -3 -4 -4 -2 -2 -3 -2 -2 -3 -2 -3 -1  1 -4 -3 -2 11  2 -3\n"
    "Y -2 -2 -2 -3 -2 -1 -2 -3  2 -1 -1 -2 -1  3 -3 -2 -2  2  7 -1\n"
    "V  0 -3 -3 -3 -1 -2 -2 -3 -3  3  1 -2  1 -1 -2 -2  0 -3 -1  4\n";

// Background frequencies implied by the integer matrix: the unique positive
// composition p solving sum_j p_j * exp(lambda * s_ij) = 1 for every row.
// Using the implied composition (rather than the marginals of the data the
// matrix was built from) keeps the recomputed pair frequencies exactly
// consistent with the rounded scores. Normalized exactly at load.
inline constexpr std::array<double, 20> kBlosum62Background = {
    7.8374845430378420e-02,  // A
    6.7616135548513115e-02,  // R
    3.8975208058329459e-02,  // N
    5.3636103066126319e-02,  // D
    2.4406884081784368e-02,  // C
    4.2560403818250170e-02,  // Q
    4.7412901901526172e-02,  // E
    7.0053387880802301e-02,  // G
    2.4857417475259361e-02,  // H
    6.7341629468468730e-02,  // I
    8.9288857224701320e-02,  // L
    5.0077539129781627e-02,  // K
    3.1143399872445333e-02,  // M
    5.5932013565845880e-02,  // F
    4.9129880629456157e-02,  // P
    5.3254347284988331e-02,  // S
    5.3515685591899403e-02,  // T
    1.3735745515607109e-02,  // W
    2.9746696750288227e-02,  // Y
    5.8940917705548199e-02,  // V
};

}  // namespace profgen::builtin
