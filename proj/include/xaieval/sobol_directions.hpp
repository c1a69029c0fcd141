#pragma once

// Sobol sequence direction numbers (Joe & Kuo D6 table, first 512 dimensions).
// Each entry: polynomial degree s, encoded inner coefficients a, and the
// initial values m_1..m_s. Dimension 0 (van der Corput base 2) is implicit.

#include <array>
#include <cstdint>

namespace xaieval::detail {

inline constexpr int kSobolMaxDims = 512;
inline constexpr int kSobolMaxDegree = 18;

struct SobolDim {
    std::uint8_t s;
    std::uint32_t a;
    std::array<std::uint32_t, kSobolMaxDegree> m;
};

inline constexpr std::array<SobolDim, 511> kSobolDims = {{
    {1, 0, {{1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {2, 1, {{1, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {3, 1, {{1, 3, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {3, 2, {{1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {4, 1, {{1, 1, 3, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {4, 4, {{1, 3, 5, 13, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {5, 2, {{1, 1, 5, 5, 17, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {5, 4, {{1, 1, 5, 5, 5, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {5, 7, {{1, 1, 7, 11, 19, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {5, 11, {{1, 1, 5, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {5, 13, {{1, 1, 1, 3, 11, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {5, 14, {{1, 3, 5, 5, 31, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {6, 1, {{1, 3, 3, 9, 7, 49, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {6, 13, {{1, 1, 1, 15, 21, 21, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {6, 16, {{1, 3, 1, 13, 27, 49, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {6, 19, {{1, 1, 1, 15, 7, 5, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {6, 22, {{1, 3, 1, 15, 13, 25, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {6, 25, {{1, 1, 5, 5, 19, 61, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {7, 1, {{1, 3, 7, 11, 23, 15, 103, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {7, 4, {{1, 3, 7, 13, 13, 15, 69, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {7, 7, {{1, 1, 3, 13, 7, 35, 63, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {7, 8, {{1, 3, 5, 9, 1, 25, 53, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {7, 14, {{1, 3, 1, 13, 9, 35, 107, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {7, 19, {{1, 3, 1, 5, 27, 61, 31, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {7, 21, {{1, 1, 5, 11, 19, 41, 61, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {7, 28, {{1, 3, 5, 3, 3, 13, 69, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {7, 31, {{1, 1, 7, 13, 1, 19, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {7, 32, {{1, 3, 7, 5, 13, 19, 59, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {7, 37, {{1, 1, 3, 9, 25, 29, 41, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {7, 41, {{1, 3, 5, 13, 23, 1, 55, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {7, 42, {{1, 3, 7, 3, 13, 59, 17, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {7, 50, {{1, 3, 1, 3, 5, 53, 69, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {7, 55, {{1, 1, 5, 5, 23, 33, 13, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {7, 56, {{1, 1, 7, 7, 1, 61, 123, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {7, 59, {{1, 1, 7, 9, 13, 61, 49, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {7, 62, {{1, 3, 3, 5, 3, 55, 33, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {8, 14, {{1, 3, 1, 15, 31, 13, 49, 245, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {8, 21, {{1, 3, 5, 15, 31, 59, 63, 97, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {8, 22, {{1, 3, 1, 11, 11, 11, 77, 249, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {8, 38, {{1, 3, 1, 11, 27, 43, 71, 9, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {8, 47, {{1, 1, 7, 15, 21, 11, 81, 45, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {8, 49, {{1, 3, 7, 3, 25, 31, 65, 79, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {8, 50, {{1, 3, 1, 1, 19, 11, 3, 205, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {8, 52, {{1, 1, 5, 9, 19, 21, 29, 157, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {8, 56, {{1, 3, 7, 11, 1, 33, 89, 185, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {8, 67, {{1, 3, 3, 3, 15, 9, 79, 71, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {8, 70, {{1, 3, 7, 11, 15, 39, 119, 27, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {8, 84, {{1, 1, 3, 1, 11, 31, 97, 225, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {8, 97, {{1, 1, 1, 3, 23, 43, 57, 177, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {8, 103, {{1, 3, 7, 7, 17, 17, 37, 71, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {8, 115, {{1, 3, 1, 5, 27, 63, 123, 213, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {8, 122, {{1, 1, 3, 5, 11, 43, 53, 133, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 8, {{1, 3, 5, 5, 29, 17, 47, 173, 479, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 13, {{1, 3, 3, 11, 3, 1, 109, 9, 69, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 16, {{1, 1, 1, 5, 17, 39, 23, 5, 343, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 22, {{1, 3, 1, 5, 25, 15, 31, 103, 499, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 25, {{1, 1, 1, 11, 11, 17, 63, 105, 183, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 44, {{1, 1, 5, 11, 9, 29, 97, 231, 363, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 47, {{1, 1, 5, 15, 19, 45, 41, 7, 383, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 52, {{1, 3, 7, 7, 31, 19, 83, 137, 221, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 55, {{1, 1, 1, 3, 23, 15, 111, 223, 83, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 59, {{1, 1, 5, 13, 31, 15, 55, 25, 161, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 62, {{1, 1, 3, 13, 25, 47, 39, 87, 257, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 67, {{1, 1, 1, 11, 21, 53, 125, 249, 293, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 74, {{1, 1, 7, 11, 11, 7, 57, 79, 323, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 81, {{1, 1, 5, 5, 17, 13, 81, 3, 131, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 82, {{1, 1, 7, 13, 23, 7, 65, 251, 475, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 87, {{1, 3, 5, 1, 9, 43, 3, 149, 11, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 91, {{1, 1, 3, 13, 31, 13, 13, 255, 487, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 94, {{1, 3, 3, 1, 5, 63, 89, 91, 127, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 103, {{1, 1, 3, 3, 1, 19, 123, 127, 237, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 104, {{1, 1, 5, 7, 23, 31, 37, 243, 289, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 109, {{1, 1, 5, 11, 17, 53, 117, 183, 491, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 122, {{1, 1, 1, 5, 1, 13, 13, 209, 345, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 124, {{1, 1, 3, 15, 1, 57, 115, 7, 33, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 137, {{1, 3, 1, 11, 7, 43, 81, 207, 175, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 138, {{1, 3, 1, 1, 15, 27, 63, 255, 49, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 143, {{1, 3, 5, 3, 27, 61, 105, 171, 305, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 145, {{1, 1, 5, 3, 1, 3, 57, 249, 149, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 152, {{1, 1, 3, 5, 5, 57, 15, 13, 159, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 157, {{1, 1, 1, 11, 7, 11, 105, 141, 225, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 167, {{1, 3, 3, 5, 27, 59, 121, 101, 271, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 173, {{1, 3, 5, 9, 11, 49, 51, 59, 115, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 176, {{1, 1, 7, 1, 23, 45, 125, 71, 419, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 181, {{1, 1, 3, 5, 23, 5, 105, 109, 75, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 182, {{1, 1, 7, 15, 7, 11, 67, 121, 453, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 185, {{1, 3, 7, 3, 9, 13, 31, 27, 449, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 191, {{1, 3, 1, 15, 19, 39, 39, 89, 15, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 194, {{1, 1, 1, 1, 1, 33, 73, 145, 379, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 199, {{1, 3, 1, 15, 15, 43, 29, 13, 483, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 218, {{1, 1, 7, 3, 19, 27, 85, 131, 431, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 220, {{1, 3, 3, 3, 5, 35, 23, 195, 349, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 227, {{1, 3, 3, 7, 9, 27, 39, 59, 297, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 229, {{1, 1, 3, 9, 11, 17, 13, 241, 157, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 230, {{1, 3, 7, 15, 25, 57, 33, 189, 213, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 234, {{1, 1, 7, 1, 9, 55, 73, 83, 217, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 236, {{1, 3, 3, 13, 19, 27, 23, 113, 249, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 241, {{1, 3, 5, 3, 23, 43, 3, 253, 479, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 244, {{1, 1, 5, 5, 11, 5, 45, 117, 217, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {9, 253, {{1, 3, 3, 7, 29, 37, 33, 123, 147, 0, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 4, {{1, 3, 1, 15, 5, 5, 37, 227, 223, 459, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 13, {{1, 1, 7, 5, 5, 39, 63, 255, 135, 487, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 19, {{1, 3, 1, 7, 9, 7, 87, 249, 217, 599, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 22, {{1, 1, 3, 13, 9, 47, 7, 225, 363, 247, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 50, {{1, 3, 7, 13, 19, 13, 9, 67, 9, 737, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 55, {{1, 3, 5, 5, 19, 59, 7, 41, 319, 677, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 64, {{1, 1, 5, 3, 31, 63, 15, 43, 207, 789, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 69, {{1, 1, 7, 9, 13, 39, 3, 47, 497, 169, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 98, {{1, 3, 1, 7, 21, 17, 97, 19, 415, 905, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 107, {{1, 3, 7, 1, 3, 31, 71, 111, 165, 127, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 115, {{1, 1, 5, 11, 1, 61, 83, 119, 203, 847, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 121, {{1, 3, 3, 13, 9, 61, 19, 97, 47, 35, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 127, {{1, 1, 7, 7, 15, 29, 63, 95, 417, 469, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 134, {{1, 3, 1, 9, 25, 9, 71, 57, 213, 385, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 140, {{1, 3, 5, 13, 31, 47, 101, 57, 39, 341, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 145, {{1, 1, 3, 3, 31, 57, 125, 173, 365, 551, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 152, {{1, 3, 7, 1, 13, 57, 67, 157, 451, 707, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 158, {{1, 1, 1, 7, 21, 13, 105, 89, 429, 965, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 161, {{1, 1, 5, 9, 17, 51, 45, 119, 157, 141, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 171, {{1, 3, 7, 7, 13, 45, 91, 9, 129, 741, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 181, {{1, 3, 7, 1, 23, 57, 67, 141, 151, 571, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 194, {{1, 1, 3, 11, 17, 47, 93, 107, 375, 157, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 199, {{1, 3, 3, 5, 11, 21, 43, 51, 169, 915, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 203, {{1, 1, 5, 3, 15, 55, 101, 67, 455, 625, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 208, {{1, 3, 5, 9, 1, 23, 29, 47, 345, 595, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 227, {{1, 3, 7, 7, 5, 49, 29, 155, 323, 589, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 242, {{1, 3, 3, 7, 5, 41, 127, 61, 261, 717, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 251, {{1, 3, 7, 7, 17, 23, 117, 67, 129, 1009, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 253, {{1, 1, 3, 13, 11, 39, 21, 207, 123, 305, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 265, {{1, 1, 3, 9, 29, 3, 95, 47, 231, 73, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 266, {{1, 3, 1, 9, 1, 29, 117, 21, 441, 259, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 274, {{1, 3, 1, 13, 21, 39, 125, 211, 439, 723, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 283, {{1, 1, 7, 3, 17, 63, 115, 89, 49, 773, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 289, {{1, 3, 7, 13, 11, 33, 101, 107, 63, 73, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 295, {{1, 1, 5, 5, 13, 57, 63, 135, 437, 177, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 301, {{1, 1, 3, 7, 27, 63, 93, 47, 417, 483, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 316, {{1, 1, 3, 1, 23, 29, 1, 191, 49, 23, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 319, {{1, 1, 3, 15, 25, 55, 9, 101, 219, 607, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 324, {{1, 3, 1, 7, 7, 19, 51, 251, 393, 307, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 346, {{1, 3, 3, 3, 25, 55, 17, 75, 337, 3, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 352, {{1, 1, 1, 13, 25, 17, 65, 45, 479, 413, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 361, {{1, 1, 7, 7, 27, 49, 99, 161, 213, 727, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 367, {{1, 3, 5, 1, 23, 5, 43, 41, 251, 857, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 382, {{1, 3, 3, 7, 11, 61, 39, 87, 383, 835, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 395, {{1, 1, 3, 15, 13, 7, 29, 7, 505, 923, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 398, {{1, 3, 7, 1, 5, 31, 47, 157, 445, 501, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 400, {{1, 1, 3, 7, 1, 43, 9, 147, 115, 605, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 412, {{1, 3, 3, 13, 5, 1, 119, 211, 455, 1001, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 419, {{1, 1, 3, 5, 13, 19, 3, 243, 75, 843, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 422, {{1, 3, 7, 7, 1, 19, 91, 249, 357, 589, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 426, {{1, 1, 1, 9, 1, 25, 109, 197, 279, 411, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 428, {{1, 3, 1, 15, 23, 57, 59, 135, 191, 75, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 433, {{1, 1, 5, 15, 29, 21, 39, 253, 383, 349, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 446, {{1, 3, 3, 5, 19, 45, 61, 151, 199, 981, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 454, {{1, 3, 5, 13, 9, 61, 107, 141, 141, 1, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 457, {{1, 3, 1, 11, 27, 25, 85, 105, 309, 979, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 472, {{1, 3, 3, 11, 19, 7, 115, 223, 349, 43, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 493, {{1, 1, 7, 9, 21, 39, 123, 21, 275, 927, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 505, {{1, 1, 7, 13, 15, 41, 47, 243, 303, 437, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {10, 508, {{1, 1, 1, 7, 7, 3, 15, 99, 409, 719, 0, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 2, {{1, 3, 3, 15, 27, 49, 113, 123, 113, 67, 469, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 11, {{1, 3, 7, 11, 3, 23, 87, 169, 119, 483, 199, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 21, {{1, 1, 5, 15, 7, 17, 109, 229, 179, 213, 741, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 22, {{1, 1, 5, 13, 11, 17, 25, 135, 403, 557, 1433, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 35, {{1, 3, 1, 1, 1, 61, 67, 215, 189, 945, 1243, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 49, {{1, 1, 7, 13, 17, 33, 9, 221, 429, 217, 1679, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 50, {{1, 1, 3, 11, 27, 3, 15, 93, 93, 865, 1049, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 56, {{1, 3, 7, 7, 25, 41, 121, 35, 373, 379, 1547, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 61, {{1, 3, 3, 9, 11, 35, 45, 205, 241, 9, 59, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 70, {{1, 3, 1, 7, 3, 51, 7, 177, 53, 975, 89, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 74, {{1, 1, 3, 5, 27, 1, 113, 231, 299, 759, 861, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 79, {{1, 3, 3, 15, 25, 29, 5, 255, 139, 891, 2031, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 84, {{1, 3, 1, 1, 13, 9, 109, 193, 419, 95, 17, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 88, {{1, 1, 7, 9, 3, 7, 29, 41, 135, 839, 867, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 103, {{1, 1, 7, 9, 25, 49, 123, 217, 113, 909, 215, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 104, {{1, 1, 7, 3, 23, 15, 43, 133, 217, 327, 901, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 112, {{1, 1, 3, 3, 13, 53, 63, 123, 477, 711, 1387, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 115, {{1, 1, 3, 15, 7, 29, 75, 119, 181, 957, 247, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 117, {{1, 1, 1, 11, 27, 25, 109, 151, 267, 99, 1461, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 122, {{1, 3, 7, 15, 5, 5, 53, 145, 11, 725, 1501, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 134, {{1, 3, 7, 1, 9, 43, 71, 229, 157, 607, 1835, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 137, {{1, 3, 3, 13, 25, 1, 5, 27, 471, 349, 127, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 146, {{1, 1, 1, 1, 23, 37, 9, 221, 269, 897, 1685, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 148, {{1, 1, 3, 3, 31, 29, 51, 19, 311, 553, 1969, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 157, {{1, 3, 7, 5, 5, 55, 17, 39, 475, 671, 1529, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 158, {{1, 1, 7, 1, 1, 35, 47, 27, 437, 395, 1635, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 162, {{1, 1, 7, 3, 13, 23, 43, 135, 327, 139, 389, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 164, {{1, 3, 7, 3, 9, 25, 91, 25, 429, 219, 513, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 168, {{1, 1, 3, 5, 13, 29, 119, 201, 277, 157, 2043, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 173, {{1, 3, 5, 3, 29, 57, 13, 17, 167, 739, 1031, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 185, {{1, 3, 3, 5, 29, 21, 95, 27, 255, 679, 1531, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 186, {{1, 3, 7, 15, 9, 5, 21, 71, 61, 961, 1201, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 191, {{1, 3, 5, 13, 15, 57, 33, 93, 459, 867, 223, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 193, {{1, 1, 1, 15, 17, 43, 127, 191, 67, 177, 1073, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 199, {{1, 1, 1, 15, 23, 7, 21, 199, 75, 293, 1611, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 213, {{1, 3, 7, 13, 15, 39, 21, 149, 65, 741, 319, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 214, {{1, 3, 7, 11, 23, 13, 101, 89, 277, 519, 711, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 220, {{1, 3, 7, 15, 19, 27, 85, 203, 441, 97, 1895, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 227, {{1, 3, 1, 3, 29, 25, 21, 155, 11, 191, 197, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 236, {{1, 1, 7, 5, 27, 11, 81, 101, 457, 675, 1687, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 242, {{1, 3, 1, 5, 25, 5, 65, 193, 41, 567, 781, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 251, {{1, 3, 1, 5, 11, 15, 113, 77, 411, 695, 1111, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 256, {{1, 1, 3, 9, 11, 53, 119, 171, 55, 297, 509, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 259, {{1, 1, 1, 1, 11, 39, 113, 139, 165, 347, 595, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 265, {{1, 3, 7, 11, 9, 17, 101, 13, 81, 325, 1733, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 266, {{1, 3, 1, 1, 21, 43, 115, 9, 113, 907, 645, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 276, {{1, 1, 7, 3, 9, 25, 117, 197, 159, 471, 475, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 292, {{1, 3, 1, 9, 11, 21, 57, 207, 485, 613, 1661, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 304, {{1, 1, 7, 7, 27, 55, 49, 223, 89, 85, 1523, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 310, {{1, 1, 5, 3, 19, 41, 45, 51, 447, 299, 1355, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 316, {{1, 3, 1, 13, 1, 33, 117, 143, 313, 187, 1073, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 319, {{1, 1, 7, 7, 5, 11, 65, 97, 377, 377, 1501, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 322, {{1, 3, 1, 1, 21, 35, 95, 65, 99, 23, 1239, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 328, {{1, 1, 5, 9, 3, 37, 95, 167, 115, 425, 867, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 334, {{1, 3, 3, 13, 1, 37, 27, 189, 81, 679, 773, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 339, {{1, 1, 3, 11, 1, 61, 99, 233, 429, 969, 49, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 341, {{1, 1, 1, 7, 25, 63, 99, 165, 245, 793, 1143, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 345, {{1, 1, 5, 11, 11, 43, 55, 65, 71, 283, 273, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 346, {{1, 1, 5, 5, 9, 3, 101, 251, 355, 379, 1611, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 362, {{1, 1, 1, 15, 21, 63, 85, 99, 49, 749, 1335, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 367, {{1, 1, 5, 13, 27, 9, 121, 43, 255, 715, 289, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 372, {{1, 3, 1, 5, 27, 19, 17, 223, 77, 571, 1415, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 375, {{1, 1, 5, 3, 13, 59, 125, 251, 195, 551, 1737, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 376, {{1, 3, 3, 15, 13, 27, 49, 105, 389, 971, 755, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 381, {{1, 3, 5, 15, 23, 43, 35, 107, 447, 763, 253, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 385, {{1, 3, 5, 11, 21, 3, 17, 39, 497, 407, 611, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 388, {{1, 1, 7, 13, 15, 31, 113, 17, 23, 507, 1995, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 392, {{1, 1, 7, 15, 3, 15, 31, 153, 423, 79, 503, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 409, {{1, 1, 7, 9, 19, 25, 23, 171, 505, 923, 1989, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 415, {{1, 1, 5, 9, 21, 27, 121, 223, 133, 87, 697, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 416, {{1, 1, 5, 5, 9, 19, 107, 99, 319, 765, 1461, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 421, {{1, 1, 3, 3, 19, 25, 3, 101, 171, 729, 187, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 428, {{1, 1, 3, 1, 13, 23, 85, 93, 291, 209, 37, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 431, {{1, 1, 1, 15, 25, 25, 77, 253, 333, 947, 1073, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 434, {{1, 1, 3, 9, 17, 29, 55, 47, 255, 305, 2037, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 439, {{1, 3, 3, 9, 29, 63, 9, 103, 489, 939, 1523, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 446, {{1, 3, 7, 15, 7, 31, 89, 175, 369, 339, 595, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 451, {{1, 3, 7, 13, 25, 5, 71, 207, 251, 367, 665, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 453, {{1, 3, 3, 3, 21, 25, 75, 35, 31, 321, 1603, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 457, {{1, 1, 1, 9, 11, 1, 65, 5, 11, 329, 535, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 458, {{1, 1, 5, 3, 19, 13, 17, 43, 379, 485, 383, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 471, {{1, 3, 5, 13, 13, 9, 85, 147, 489, 787, 1133, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 475, {{1, 3, 1, 1, 5, 51, 37, 129, 195, 297, 1783, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 478, {{1, 1, 3, 15, 19, 57, 59, 181, 455, 697, 2033, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 484, {{1, 3, 7, 1, 27, 9, 65, 145, 325, 189, 201, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 493, {{1, 3, 1, 15, 31, 23, 19, 5, 485, 581, 539, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 494, {{1, 1, 7, 13, 11, 15, 65, 83, 185, 847, 831, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 499, {{1, 3, 5, 7, 7, 55, 73, 15, 303, 511, 1905, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 502, {{1, 3, 5, 9, 7, 21, 45, 15, 397, 385, 597, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 517, {{1, 3, 7, 3, 23, 13, 73, 221, 511, 883, 1265, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 518, {{1, 1, 3, 11, 1, 51, 73, 185, 33, 975, 1441, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 524, {{1, 3, 3, 9, 19, 59, 21, 39, 339, 37, 143, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 527, {{1, 1, 7, 1, 31, 33, 19, 167, 117, 635, 639, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 555, {{1, 1, 1, 3, 5, 13, 59, 83, 355, 349, 1967, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 560, {{1, 1, 1, 5, 19, 3, 53, 133, 97, 863, 983, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 565, {{1, 3, 1, 13, 9, 41, 91, 105, 173, 97, 625, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 569, {{1, 1, 5, 3, 7, 49, 115, 133, 71, 231, 1063, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 578, {{1, 1, 7, 5, 17, 43, 47, 45, 497, 547, 757, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 580, {{1, 3, 5, 15, 21, 61, 123, 191, 249, 31, 631, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 587, {{1, 3, 7, 9, 17, 7, 11, 185, 127, 169, 1951, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 589, {{1, 1, 5, 13, 11, 11, 9, 49, 29, 125, 791, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 590, {{1, 1, 1, 15, 31, 41, 13, 167, 273, 429, 57, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 601, {{1, 3, 5, 3, 27, 7, 35, 209, 65, 265, 1393, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 607, {{1, 3, 1, 13, 31, 19, 53, 143, 135, 9, 1021, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 611, {{1, 1, 7, 13, 31, 5, 115, 153, 143, 957, 623, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 614, {{1, 1, 5, 11, 25, 19, 29, 31, 297, 943, 443, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 617, {{1, 3, 3, 5, 21, 11, 127, 81, 479, 25, 699, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 618, {{1, 1, 3, 11, 25, 31, 97, 19, 195, 781, 705, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 625, {{1, 1, 5, 5, 31, 11, 75, 207, 197, 885, 2037, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 628, {{1, 1, 1, 11, 9, 23, 29, 231, 307, 17, 1497, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 635, {{1, 1, 5, 11, 11, 43, 111, 233, 307, 523, 1259, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 641, {{1, 1, 7, 5, 1, 21, 107, 229, 343, 933, 217, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 647, {{1, 1, 1, 11, 3, 21, 125, 131, 405, 599, 1469, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 654, {{1, 3, 5, 5, 9, 39, 33, 81, 389, 151, 811, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 659, {{1, 1, 7, 7, 7, 1, 59, 223, 265, 529, 2021, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 662, {{1, 3, 1, 3, 9, 23, 85, 181, 47, 265, 49, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 672, {{1, 3, 5, 11, 19, 23, 9, 7, 157, 299, 1983, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 675, {{1, 3, 1, 5, 15, 5, 21, 105, 29, 339, 1041, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 682, {{1, 1, 1, 1, 5, 33, 65, 85, 111, 705, 479, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 684, {{1, 1, 1, 7, 9, 35, 77, 87, 151, 321, 101, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 689, {{1, 1, 5, 7, 17, 1, 51, 197, 175, 811, 1229, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 695, {{1, 3, 3, 15, 23, 37, 85, 185, 239, 543, 731, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 696, {{1, 3, 1, 7, 7, 55, 111, 109, 289, 439, 243, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 713, {{1, 1, 7, 11, 17, 53, 35, 217, 259, 853, 1667, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 719, {{1, 3, 1, 9, 1, 63, 87, 17, 73, 565, 1091, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 724, {{1, 1, 3, 3, 11, 41, 1, 57, 295, 263, 1029, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 733, {{1, 1, 5, 1, 27, 45, 109, 161, 411, 421, 1395, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 734, {{1, 3, 5, 11, 25, 35, 47, 191, 339, 417, 1727, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 740, {{1, 1, 5, 15, 21, 1, 93, 251, 351, 217, 1767, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 747, {{1, 3, 3, 11, 3, 7, 75, 155, 313, 211, 491, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 749, {{1, 3, 3, 5, 11, 9, 101, 161, 453, 913, 1067, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 752, {{1, 1, 3, 1, 15, 45, 127, 141, 163, 727, 1597, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 755, {{1, 3, 3, 7, 1, 33, 63, 73, 73, 341, 1691, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 762, {{1, 3, 5, 13, 15, 39, 53, 235, 77, 99, 949, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 770, {{1, 1, 5, 13, 31, 17, 97, 13, 215, 301, 1927, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 782, {{1, 1, 7, 1, 1, 37, 91, 93, 441, 251, 1131, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 784, {{1, 3, 7, 9, 25, 5, 105, 69, 81, 943, 1459, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 787, {{1, 3, 7, 11, 31, 43, 13, 209, 27, 1017, 501, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 789, {{1, 1, 7, 15, 1, 33, 31, 233, 161, 507, 387, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 793, {{1, 3, 3, 5, 5, 53, 33, 177, 503, 627, 1927, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 796, {{1, 1, 7, 11, 7, 61, 119, 31, 457, 229, 1875, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 803, {{1, 1, 5, 15, 19, 5, 53, 201, 157, 885, 1057, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 805, {{1, 3, 7, 9, 1, 35, 51, 113, 249, 425, 1009, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 810, {{1, 3, 5, 7, 21, 53, 37, 155, 119, 345, 631, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 815, {{1, 3, 5, 7, 15, 31, 109, 69, 503, 595, 1879, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 824, {{1, 3, 3, 1, 25, 35, 65, 131, 403, 705, 503, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 829, {{1, 3, 7, 7, 19, 33, 11, 153, 45, 633, 499, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 830, {{1, 3, 3, 5, 11, 3, 29, 93, 487, 33, 703, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 832, {{1, 1, 3, 15, 21, 53, 107, 179, 387, 927, 1757, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 841, {{1, 1, 3, 7, 21, 45, 51, 147, 175, 317, 361, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 847, {{1, 1, 1, 7, 7, 13, 15, 243, 269, 795, 1965, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 849, {{1, 1, 3, 5, 19, 33, 57, 115, 443, 537, 627, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 861, {{1, 3, 3, 9, 3, 39, 25, 61, 185, 717, 1049, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 871, {{1, 3, 7, 3, 7, 37, 107, 153, 7, 269, 1581, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 878, {{1, 1, 7, 3, 7, 41, 91, 41, 145, 489, 1245, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 889, {{1, 1, 5, 9, 7, 7, 105, 81, 403, 407, 283, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 892, {{1, 1, 7, 9, 27, 55, 29, 77, 193, 963, 949, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 901, {{1, 1, 5, 3, 25, 51, 107, 63, 403, 917, 815, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 908, {{1, 1, 7, 3, 7, 61, 19, 51, 457, 599, 535, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 920, {{1, 3, 7, 1, 23, 51, 105, 153, 239, 215, 1847, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 923, {{1, 1, 3, 5, 27, 23, 79, 49, 495, 45, 1935, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 942, {{1, 1, 1, 11, 11, 47, 55, 133, 495, 999, 1461, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 949, {{1, 1, 3, 15, 27, 51, 93, 17, 355, 763, 1675, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 950, {{1, 3, 1, 3, 1, 3, 79, 119, 499, 17, 995, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 954, {{1, 1, 1, 1, 15, 43, 45, 17, 167, 973, 799, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 961, {{1, 1, 1, 3, 27, 49, 89, 29, 483, 913, 2023, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 968, {{1, 1, 3, 3, 5, 11, 75, 7, 41, 851, 611, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 971, {{1, 3, 1, 3, 7, 57, 39, 123, 257, 283, 507, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 973, {{1, 3, 3, 11, 27, 23, 113, 229, 187, 299, 133, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 979, {{1, 1, 3, 13, 9, 63, 101, 77, 451, 169, 337, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 982, {{1, 3, 7, 3, 3, 59, 45, 195, 229, 415, 409, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 986, {{1, 3, 5, 3, 11, 19, 71, 93, 43, 857, 369, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 998, {{1, 3, 7, 9, 19, 33, 115, 19, 241, 703, 247, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 1001, {{1, 3, 5, 11, 5, 35, 21, 155, 463, 1005, 1073, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 1010, {{1, 3, 7, 3, 25, 15, 109, 83, 93, 69, 1189, 0, 0, 0, 0, 0, 0, 0}}},
    {11, 1012, {{1, 3, 5, 7, 5, 21, 93, 133, 135, 167, 903, 0, 0, 0, 0, 0, 0, 0}}},
    {12, 41, {{1, 1, 7, 7, 3, 59, 121, 161, 285, 815, 1769, 3705, 0, 0, 0, 0, 0, 0}}},
    {12, 52, {{1, 3, 1, 1, 3, 47, 103, 171, 381, 609, 185, 373, 0, 0, 0, 0, 0, 0}}},
    {12, 61, {{1, 3, 3, 15, 23, 33, 107, 131, 441, 445, 689, 2059, 0, 0, 0, 0, 0, 0}}},
    {12, 62, {{1, 3, 3, 11, 7, 53, 101, 167, 435, 803, 1255, 3781, 0, 0, 0, 0, 0, 0}}},
    {12, 76, {{1, 1, 5, 11, 15, 59, 41, 19, 135, 835, 1263, 505, 0, 0, 0, 0, 0, 0}}},
    {12, 104, {{1, 1, 7, 11, 21, 49, 23, 219, 127, 961, 1065, 385, 0, 0, 0, 0, 0, 0}}},
    {12, 117, {{1, 3, 5, 15, 7, 47, 117, 217, 45, 731, 1639, 733, 0, 0, 0, 0, 0, 0}}},
    {12, 131, {{1, 1, 7, 11, 27, 57, 91, 87, 81, 35, 1269, 1007, 0, 0, 0, 0, 0, 0}}},
    {12, 143, {{1, 1, 3, 11, 15, 37, 53, 219, 193, 937, 1899, 3733, 0, 0, 0, 0, 0, 0}}},
    {12, 145, {{1, 3, 5, 3, 13, 11, 27, 19, 199, 393, 965, 2195, 0, 0, 0, 0, 0, 0}}},
    {12, 157, {{1, 3, 1, 3, 5, 1, 37, 173, 413, 1023, 553, 409, 0, 0, 0, 0, 0, 0}}},
    {12, 167, {{1, 3, 1, 7, 15, 29, 123, 95, 255, 373, 1799, 3841, 0, 0, 0, 0, 0, 0}}},
    {12, 171, {{1, 3, 5, 13, 21, 57, 51, 17, 511, 195, 1157, 1831, 0, 0, 0, 0, 0, 0}}},
    {12, 176, {{1, 1, 1, 15, 29, 19, 7, 73, 295, 519, 587, 3523, 0, 0, 0, 0, 0, 0}}},
    {12, 181, {{1, 1, 5, 13, 13, 35, 115, 191, 123, 535, 717, 1661, 0, 0, 0, 0, 0, 0}}},
    {12, 194, {{1, 3, 3, 5, 23, 21, 47, 251, 379, 921, 1119, 297, 0, 0, 0, 0, 0, 0}}},
    {12, 217, {{1, 3, 3, 9, 29, 53, 121, 201, 135, 193, 523, 2943, 0, 0, 0, 0, 0, 0}}},
    {12, 236, {{1, 1, 1, 7, 29, 45, 125, 9, 99, 867, 425, 601, 0, 0, 0, 0, 0, 0}}},
    {12, 239, {{1, 3, 1, 9, 13, 15, 67, 181, 109, 293, 1305, 3079, 0, 0, 0, 0, 0, 0}}},
    {12, 262, {{1, 3, 3, 9, 5, 35, 15, 209, 305, 87, 767, 2795, 0, 0, 0, 0, 0, 0}}},
    {12, 283, {{1, 3, 3, 11, 27, 57, 113, 123, 179, 643, 149, 523, 0, 0, 0, 0, 0, 0}}},
    {12, 286, {{1, 1, 3, 15, 11, 17, 67, 223, 63, 657, 335, 3309, 0, 0, 0, 0, 0, 0}}},
    {12, 307, {{1, 1, 1, 9, 25, 29, 109, 159, 39, 513, 571, 1761, 0, 0, 0, 0, 0, 0}}},
    {12, 313, {{1, 1, 3, 1, 5, 63, 75, 19, 455, 601, 123, 691, 0, 0, 0, 0, 0, 0}}},
    {12, 319, {{1, 1, 1, 3, 21, 5, 45, 169, 377, 513, 1951, 2565, 0, 0, 0, 0, 0, 0}}},
    {12, 348, {{1, 1, 3, 11, 3, 33, 119, 69, 253, 907, 805, 1449, 0, 0, 0, 0, 0, 0}}},
    {12, 352, {{1, 1, 5, 13, 31, 15, 17, 7, 499, 61, 687, 1867, 0, 0, 0, 0, 0, 0}}},
    {12, 357, {{1, 3, 7, 11, 17, 33, 73, 77, 299, 243, 641, 2345, 0, 0, 0, 0, 0, 0}}},
    {12, 391, {{1, 1, 7, 11, 9, 35, 31, 235, 359, 647, 379, 1161, 0, 0, 0, 0, 0, 0}}},
    {12, 398, {{1, 3, 3, 15, 31, 25, 5, 67, 33, 45, 437, 4067, 0, 0, 0, 0, 0, 0}}},
    {12, 400, {{1, 1, 3, 11, 7, 17, 37, 87, 333, 253, 1517, 2921, 0, 0, 0, 0, 0, 0}}},
    {12, 412, {{1, 1, 7, 15, 7, 15, 107, 189, 153, 769, 1521, 3427, 0, 0, 0, 0, 0, 0}}},
    {12, 415, {{1, 3, 5, 13, 5, 61, 113, 37, 293, 393, 113, 43, 0, 0, 0, 0, 0, 0}}},
    {12, 422, {{1, 1, 1, 15, 29, 43, 107, 31, 167, 147, 301, 1021, 0, 0, 0, 0, 0, 0}}},
    {12, 440, {{1, 1, 1, 13, 3, 1, 35, 93, 195, 181, 2027, 1491, 0, 0, 0, 0, 0, 0}}},
    {12, 460, {{1, 3, 3, 3, 13, 33, 77, 199, 153, 221, 1699, 3671, 0, 0, 0, 0, 0, 0}}},
    {12, 465, {{1, 3, 5, 13, 7, 49, 123, 155, 495, 681, 819, 809, 0, 0, 0, 0, 0, 0}}},
    {12, 468, {{1, 3, 5, 15, 27, 61, 117, 189, 183, 887, 617, 4053, 0, 0, 0, 0, 0, 0}}},
    {12, 515, {{1, 1, 1, 7, 31, 59, 125, 235, 389, 369, 447, 1039, 0, 0, 0, 0, 0, 0}}},
    {12, 536, {{1, 3, 5, 1, 5, 39, 115, 89, 249, 377, 431, 3747, 0, 0, 0, 0, 0, 0}}},
    {12, 539, {{1, 1, 1, 5, 7, 47, 59, 157, 77, 445, 699, 3439, 0, 0, 0, 0, 0, 0}}},
    {12, 551, {{1, 1, 3, 5, 11, 21, 19, 75, 11, 599, 1575, 735, 0, 0, 0, 0, 0, 0}}},
    {12, 558, {{1, 3, 5, 3, 19, 13, 41, 69, 199, 143, 1761, 3215, 0, 0, 0, 0, 0, 0}}},
    {12, 563, {{1, 3, 5, 7, 19, 43, 25, 41, 41, 11, 1647, 2783, 0, 0, 0, 0, 0, 0}}},
    {12, 570, {{1, 3, 1, 9, 19, 45, 111, 97, 405, 399, 457, 3219, 0, 0, 0, 0, 0, 0}}},
    {12, 595, {{1, 1, 3, 1, 23, 15, 65, 121, 59, 985, 829, 2259, 0, 0, 0, 0, 0, 0}}},
    {12, 598, {{1, 1, 3, 7, 17, 13, 107, 229, 75, 551, 1299, 2363, 0, 0, 0, 0, 0, 0}}},
    {12, 617, {{1, 1, 5, 5, 21, 57, 23, 199, 509, 139, 2007, 3875, 0, 0, 0, 0, 0, 0}}},
    {12, 647, {{1, 3, 1, 11, 19, 53, 15, 229, 215, 741, 695, 823, 0, 0, 0, 0, 0, 0}}},
    {12, 654, {{1, 3, 7, 1, 29, 3, 17, 163, 417, 559, 549, 319, 0, 0, 0, 0, 0, 0}}},
    {12, 678, {{1, 3, 1, 13, 17, 9, 47, 133, 365, 7, 1937, 1071, 0, 0, 0, 0, 0, 0}}},
    {12, 713, {{1, 3, 5, 7, 19, 37, 55, 163, 301, 249, 689, 2327, 0, 0, 0, 0, 0, 0}}},
    {12, 738, {{1, 3, 5, 13, 11, 23, 61, 205, 257, 377, 615, 1457, 0, 0, 0, 0, 0, 0}}},
    {12, 747, {{1, 3, 5, 1, 23, 37, 13, 75, 331, 495, 579, 3367, 0, 0, 0, 0, 0, 0}}},
    {12, 750, {{1, 1, 1, 9, 1, 23, 49, 129, 475, 543, 883, 2531, 0, 0, 0, 0, 0, 0}}},
    {12, 757, {{1, 3, 1, 5, 23, 59, 51, 35, 343, 695, 219, 369, 0, 0, 0, 0, 0, 0}}},
    {12, 772, {{1, 3, 3, 1, 27, 17, 63, 97, 71, 507, 1929, 613, 0, 0, 0, 0, 0, 0}}},
    {12, 803, {{1, 1, 5, 1, 21, 31, 11, 109, 247, 409, 1817, 2173, 0, 0, 0, 0, 0, 0}}},
    {12, 810, {{1, 1, 3, 15, 23, 9, 7, 209, 301, 23, 147, 1691, 0, 0, 0, 0, 0, 0}}},
    {12, 812, {{1, 1, 7, 5, 5, 19, 37, 229, 249, 277, 1115, 2309, 0, 0, 0, 0, 0, 0}}},
    {12, 850, {{1, 1, 1, 5, 5, 63, 5, 249, 285, 431, 343, 2467, 0, 0, 0, 0, 0, 0}}},
    {12, 862, {{1, 1, 1, 11, 7, 45, 35, 75, 505, 537, 29, 2919, 0, 0, 0, 0, 0, 0}}},
    {12, 906, {{1, 3, 5, 15, 11, 39, 15, 63, 263, 9, 199, 445, 0, 0, 0, 0, 0, 0}}},
    {12, 908, {{1, 3, 3, 3, 27, 63, 53, 171, 227, 63, 1049, 827, 0, 0, 0, 0, 0, 0}}},
    {12, 929, {{1, 1, 3, 13, 7, 11, 115, 183, 179, 937, 1785, 381, 0, 0, 0, 0, 0, 0}}},
    {12, 930, {{1, 3, 1, 11, 13, 15, 107, 81, 53, 295, 1785, 3757, 0, 0, 0, 0, 0, 0}}},
    {12, 954, {{1, 3, 3, 13, 11, 5, 109, 243, 3, 505, 323, 1373, 0, 0, 0, 0, 0, 0}}},
    {12, 964, {{1, 3, 3, 11, 21, 51, 17, 177, 381, 937, 1263, 3889, 0, 0, 0, 0, 0, 0}}},
    {12, 982, {{1, 3, 5, 9, 27, 25, 85, 193, 143, 573, 1189, 2995, 0, 0, 0, 0, 0, 0}}},
    {12, 985, {{1, 3, 5, 11, 13, 9, 81, 21, 159, 953, 91, 1751, 0, 0, 0, 0, 0, 0}}},
    {12, 991, {{1, 1, 3, 3, 27, 61, 11, 253, 391, 333, 1105, 635, 0, 0, 0, 0, 0, 0}}},
    {12, 992, {{1, 3, 3, 15, 9, 57, 95, 81, 419, 735, 251, 1141, 0, 0, 0, 0, 0, 0}}},
    {12, 1067, {{1, 1, 5, 9, 31, 39, 59, 13, 319, 807, 1241, 2433, 0, 0, 0, 0, 0, 0}}},
    {12, 1070, {{1, 3, 3, 5, 27, 13, 107, 141, 423, 937, 2027, 3233, 0, 0, 0, 0, 0, 0}}},
    {12, 1096, {{1, 3, 3, 9, 9, 25, 125, 23, 443, 835, 1245, 847, 0, 0, 0, 0, 0, 0}}},
    {12, 1099, {{1, 1, 7, 15, 17, 17, 83, 107, 411, 285, 847, 1571, 0, 0, 0, 0, 0, 0}}},
    {12, 1116, {{1, 1, 3, 13, 29, 61, 37, 81, 349, 727, 1453, 1957, 0, 0, 0, 0, 0, 0}}},
    {12, 1143, {{1, 3, 7, 11, 31, 13, 59, 77, 273, 591, 1265, 1533, 0, 0, 0, 0, 0, 0}}},
    {12, 1165, {{1, 1, 7, 7, 13, 17, 25, 25, 187, 329, 347, 1473, 0, 0, 0, 0, 0, 0}}},
    {12, 1178, {{1, 3, 7, 7, 5, 51, 37, 99, 221, 153, 503, 2583, 0, 0, 0, 0, 0, 0}}},
    {12, 1184, {{1, 3, 1, 13, 19, 27, 11, 69, 181, 479, 1183, 3229, 0, 0, 0, 0, 0, 0}}},
    {12, 1202, {{1, 3, 3, 13, 23, 21, 103, 147, 323, 909, 947, 315, 0, 0, 0, 0, 0, 0}}},
    {12, 1213, {{1, 3, 1, 3, 23, 1, 31, 59, 93, 513, 45, 2271, 0, 0, 0, 0, 0, 0}}},
    {12, 1221, {{1, 3, 5, 1, 7, 43, 109, 59, 231, 41, 1515, 2385, 0, 0, 0, 0, 0, 0}}},
    {12, 1240, {{1, 3, 1, 5, 31, 57, 49, 223, 283, 1013, 11, 701, 0, 0, 0, 0, 0, 0}}},
    {12, 1246, {{1, 1, 5, 1, 19, 53, 55, 31, 31, 299, 495, 693, 0, 0, 0, 0, 0, 0}}},
    {12, 1252, {{1, 3, 3, 9, 5, 33, 77, 253, 427, 791, 731, 1019, 0, 0, 0, 0, 0, 0}}},
    {12, 1255, {{1, 3, 7, 11, 1, 9, 119, 203, 53, 877, 1707, 3499, 0, 0, 0, 0, 0, 0}}},
    {12, 1267, {{1, 1, 3, 7, 13, 39, 55, 159, 423, 113, 1653, 3455, 0, 0, 0, 0, 0, 0}}},
    {12, 1293, {{1, 1, 3, 5, 21, 47, 51, 59, 55, 411, 931, 251, 0, 0, 0, 0, 0, 0}}},
    {12, 1301, {{1, 3, 7, 3, 31, 25, 81, 115, 405, 239, 741, 455, 0, 0, 0, 0, 0, 0}}},
    {12, 1305, {{1, 1, 5, 1, 31, 3, 101, 83, 479, 491, 1779, 2225, 0, 0, 0, 0, 0, 0}}},
    {12, 1332, {{1, 3, 3, 3, 9, 37, 107, 161, 203, 503, 767, 3435, 0, 0, 0, 0, 0, 0}}},
    {12, 1349, {{1, 3, 7, 9, 1, 27, 61, 119, 233, 39, 1375, 4089, 0, 0, 0, 0, 0, 0}}},
    {12, 1384, {{1, 1, 5, 9, 1, 31, 45, 51, 369, 587, 383, 2813, 0, 0, 0, 0, 0, 0}}},
    {12, 1392, {{1, 3, 7, 5, 31, 7, 49, 119, 487, 591, 1627, 53, 0, 0, 0, 0, 0, 0}}},
    {12, 1402, {{1, 1, 7, 1, 9, 47, 1, 223, 369, 711, 1603, 1917, 0, 0, 0, 0, 0, 0}}},
    {12, 1413, {{1, 3, 5, 3, 21, 37, 111, 17, 483, 739, 1193, 2775, 0, 0, 0, 0, 0, 0}}},
    {12, 1417, {{1, 3, 3, 7, 17, 11, 51, 117, 455, 191, 1493, 3821, 0, 0, 0, 0, 0, 0}}},
    {12, 1423, {{1, 1, 5, 9, 23, 39, 99, 181, 343, 485, 99, 1931, 0, 0, 0, 0, 0, 0}}},
    {12, 1451, {{1, 3, 1, 7, 29, 49, 31, 71, 489, 527, 1763, 2909, 0, 0, 0, 0, 0, 0}}},
    {12, 1480, {{1, 1, 5, 11, 5, 5, 73, 189, 321, 57, 1191, 3685, 0, 0, 0, 0, 0, 0}}},
    {12, 1491, {{1, 1, 5, 15, 13, 45, 125, 207, 371, 415, 315, 983, 0, 0, 0, 0, 0, 0}}},
    {12, 1503, {{1, 3, 3, 5, 25, 59, 33, 31, 239, 919, 1859, 2709, 0, 0, 0, 0, 0, 0}}},
    {12, 1504, {{1, 3, 5, 13, 27, 61, 23, 115, 61, 413, 1275, 3559, 0, 0, 0, 0, 0, 0}}},
    {12, 1513, {{1, 3, 7, 15, 5, 59, 101, 81, 47, 967, 809, 3189, 0, 0, 0, 0, 0, 0}}},
    {12, 1538, {{1, 1, 5, 11, 31, 15, 39, 25, 173, 505, 809, 2677, 0, 0, 0, 0, 0, 0}}},
    {12, 1544, {{1, 1, 5, 9, 19, 13, 95, 89, 511, 127, 1395, 2935, 0, 0, 0, 0, 0, 0}}},
    {12, 1547, {{1, 1, 5, 5, 31, 45, 9, 57, 91, 303, 1295, 3215, 0, 0, 0, 0, 0, 0}}},
    {12, 1555, {{1, 3, 3, 3, 19, 15, 113, 187, 217, 489, 1285, 1803, 0, 0, 0, 0, 0, 0}}},
    {12, 1574, {{1, 1, 3, 1, 13, 29, 57, 139, 255, 197, 537, 2183, 0, 0, 0, 0, 0, 0}}},
    {12, 1603, {{1, 3, 1, 15, 11, 7, 53, 255, 467, 9, 757, 3167, 0, 0, 0, 0, 0, 0}}},
    {12, 1615, {{1, 3, 3, 15, 21, 13, 9, 189, 359, 323, 49, 333, 0, 0, 0, 0, 0, 0}}},
    {12, 1618, {{1, 3, 7, 11, 7, 37, 21, 119, 401, 157, 1659, 1069, 0, 0, 0, 0, 0, 0}}},
    {12, 1629, {{1, 1, 5, 7, 17, 33, 115, 229, 149, 151, 2027, 279, 0, 0, 0, 0, 0, 0}}},
    {12, 1634, {{1, 1, 5, 15, 5, 49, 77, 155, 383, 385, 1985, 945, 0, 0, 0, 0, 0, 0}}},
    {12, 1636, {{1, 3, 7, 3, 7, 55, 85, 41, 357, 527, 1715, 1619, 0, 0, 0, 0, 0, 0}}},
    {12, 1639, {{1, 1, 3, 1, 21, 45, 115, 21, 199, 967, 1581, 3807, 0, 0, 0, 0, 0, 0}}},
    {12, 1657, {{1, 1, 3, 7, 21, 39, 117, 191, 169, 73, 413, 3417, 0, 0, 0, 0, 0, 0}}},
    {12, 1667, {{1, 1, 1, 13, 1, 31, 57, 195, 231, 321, 367, 1027, 0, 0, 0, 0, 0, 0}}},
    {12, 1681, {{1, 3, 7, 3, 11, 29, 47, 161, 71, 419, 1721, 437, 0, 0, 0, 0, 0, 0}}},
    {12, 1697, {{1, 1, 7, 3, 11, 9, 43, 65, 157, 1, 1851, 823, 0, 0, 0, 0, 0, 0}}},
    {12, 1704, {{1, 1, 1, 5, 21, 15, 31, 101, 293, 299, 127, 1321, 0, 0, 0, 0, 0, 0}}},
    {12, 1709, {{1, 1, 7, 1, 27, 1, 11, 229, 241, 705, 43, 1475, 0, 0, 0, 0, 0, 0}}},
    {12, 1722, {{1, 3, 7, 1, 5, 15, 73, 183, 193, 55, 1345, 49, 0, 0, 0, 0, 0, 0}}},
    {12, 1730, {{1, 3, 3, 3, 19, 3, 55, 21, 169, 663, 1675, 137, 0, 0, 0, 0, 0, 0}}},
    {12, 1732, {{1, 1, 1, 13, 7, 21, 69, 67, 373, 965, 1273, 2279, 0, 0, 0, 0, 0, 0}}},
    {12, 1802, {{1, 1, 7, 7, 21, 23, 17, 43, 341, 845, 465, 3355, 0, 0, 0, 0, 0, 0}}},
    {12, 1804, {{1, 3, 5, 5, 25, 5, 81, 101, 233, 139, 359, 2057, 0, 0, 0, 0, 0, 0}}},
    {12, 1815, {{1, 1, 3, 11, 15, 39, 55, 3, 471, 765, 1143, 3941, 0, 0, 0, 0, 0, 0}}},
    {12, 1826, {{1, 1, 7, 15, 9, 57, 81, 79, 215, 433, 333, 3855, 0, 0, 0, 0, 0, 0}}},
    {12, 1832, {{1, 1, 5, 5, 19, 45, 83, 31, 209, 363, 701, 1303, 0, 0, 0, 0, 0, 0}}},
    {12, 1843, {{1, 3, 7, 5, 1, 13, 55, 163, 435, 807, 287, 2031, 0, 0, 0, 0, 0, 0}}},
    {12, 1849, {{1, 3, 3, 7, 3, 3, 17, 197, 39, 169, 489, 1769, 0, 0, 0, 0, 0, 0}}},
    {12, 1863, {{1, 1, 3, 5, 29, 43, 87, 161, 289, 339, 1233, 2353, 0, 0, 0, 0, 0, 0}}},
    {12, 1905, {{1, 3, 3, 9, 21, 9, 77, 1, 453, 167, 1643, 2227, 0, 0, 0, 0, 0, 0}}},
    {12, 1928, {{1, 1, 7, 1, 15, 7, 67, 33, 193, 241, 1031, 2339, 0, 0, 0, 0, 0, 0}}},
    {12, 1933, {{1, 3, 1, 11, 1, 63, 45, 65, 265, 661, 849, 1979, 0, 0, 0, 0, 0, 0}}},
    {12, 1939, {{1, 3, 1, 13, 19, 49, 3, 11, 159, 213, 659, 2839, 0, 0, 0, 0, 0, 0}}},
    {12, 1976, {{1, 3, 5, 11, 9, 29, 27, 227, 253, 449, 1403, 3427, 0, 0, 0, 0, 0, 0}}},
    {12, 1996, {{1, 1, 3, 1, 7, 3, 77, 143, 277, 779, 1499, 475, 0, 0, 0, 0, 0, 0}}},
    {12, 2013, {{1, 1, 1, 5, 11, 23, 87, 131, 393, 849, 193, 3189, 0, 0, 0, 0, 0, 0}}},
    {12, 2014, {{1, 3, 5, 11, 3, 3, 89, 9, 449, 243, 1501, 1739, 0, 0, 0, 0, 0, 0}}},
    {12, 2020, {{1, 3, 1, 9, 29, 29, 113, 15, 65, 611, 135, 3687, 0, 0, 0, 0, 0, 0}}},
    {13, 13, {{1, 1, 1, 9, 21, 19, 39, 151, 395, 501, 1339, 959, 2725, 0, 0, 0, 0, 0}}},
    {13, 19, {{1, 3, 7, 1, 7, 35, 45, 33, 119, 225, 1631, 1695, 1459, 0, 0, 0, 0, 0}}},
    {13, 26, {{1, 1, 1, 3, 25, 55, 37, 79, 167, 907, 1075, 271, 4059, 0, 0, 0, 0, 0}}},
    {13, 41, {{1, 3, 5, 13, 5, 13, 53, 165, 437, 67, 1705, 3177, 8095, 0, 0, 0, 0, 0}}},
    {13, 50, {{1, 3, 3, 13, 27, 57, 95, 55, 443, 245, 1945, 1725, 1929, 0, 0, 0, 0, 0}}},
    {13, 55, {{1, 3, 1, 9, 5, 33, 109, 35, 99, 827, 341, 2401, 2411, 0, 0, 0, 0, 0}}},
    {13, 69, {{1, 1, 5, 9, 7, 33, 43, 39, 87, 799, 635, 3481, 7159, 0, 0, 0, 0, 0}}},
    {13, 70, {{1, 3, 1, 1, 31, 15, 45, 27, 337, 113, 987, 2065, 2529, 0, 0, 0, 0, 0}}},
    {13, 79, {{1, 1, 5, 9, 5, 15, 105, 123, 479, 289, 1609, 2177, 4629, 0, 0, 0, 0, 0}}},
    {13, 82, {{1, 3, 5, 11, 31, 47, 97, 87, 385, 195, 1041, 651, 3271, 0, 0, 0, 0, 0}}},
    {13, 87, {{1, 1, 3, 7, 17, 3, 101, 55, 87, 629, 1687, 1387, 2745, 0, 0, 0, 0, 0}}},
    {13, 93, {{1, 3, 5, 5, 7, 21, 9, 237, 313, 549, 1107, 117, 6183, 0, 0, 0, 0, 0}}},
    {13, 94, {{1, 1, 3, 9, 9, 5, 55, 201, 487, 851, 1103, 2993, 4055, 0, 0, 0, 0, 0}}},
    {13, 97, {{1, 1, 5, 9, 31, 19, 59, 7, 363, 381, 1167, 2057, 5715, 0, 0, 0, 0, 0}}},
    {13, 100, {{1, 3, 3, 15, 23, 63, 19, 227, 387, 827, 487, 1049, 7471, 0, 0, 0, 0, 0}}},
    {13, 112, {{1, 3, 1, 5, 23, 25, 61, 245, 363, 863, 963, 3583, 6475, 0, 0, 0, 0, 0}}},
    {13, 121, {{1, 1, 5, 1, 5, 27, 81, 85, 275, 49, 235, 3291, 1195, 0, 0, 0, 0, 0}}},
    {13, 134, {{1, 1, 5, 7, 23, 53, 85, 107, 511, 779, 1265, 1093, 7859, 0, 0, 0, 0, 0}}},
    {13, 138, {{1, 3, 3, 1, 9, 21, 75, 219, 59, 485, 1739, 3845, 1109, 0, 0, 0, 0, 0}}},
    {13, 148, {{1, 3, 5, 1, 13, 41, 19, 143, 293, 391, 2023, 1791, 4399, 0, 0, 0, 0, 0}}},
    {13, 151, {{1, 3, 7, 15, 21, 13, 21, 195, 215, 413, 523, 2099, 2341, 0, 0, 0, 0, 0}}},
    {13, 157, {{1, 1, 1, 3, 29, 51, 47, 57, 135, 575, 943, 1673, 541, 0, 0, 0, 0, 0}}},
    {13, 161, {{1, 3, 5, 1, 9, 13, 113, 175, 447, 115, 657, 4077, 5973, 0, 0, 0, 0, 0}}},
    {13, 179, {{1, 1, 1, 11, 17, 41, 37, 95, 297, 579, 911, 2207, 2387, 0, 0, 0, 0, 0}}},
    {13, 181, {{1, 3, 5, 3, 23, 11, 23, 231, 93, 667, 711, 1563, 7961, 0, 0, 0, 0, 0}}},
    {13, 188, {{1, 1, 7, 3, 17, 59, 13, 181, 141, 991, 1817, 457, 1711, 0, 0, 0, 0, 0}}},
    {13, 196, {{1, 3, 3, 5, 31, 59, 81, 205, 245, 537, 1049, 997, 1815, 0, 0, 0, 0, 0}}},
    {13, 203, {{1, 3, 7, 5, 17, 13, 9, 79, 17, 185, 5, 2211, 6263, 0, 0, 0, 0, 0}}},
    {13, 206, {{1, 3, 7, 13, 7, 53, 61, 145, 13, 285, 1203, 947, 2933, 0, 0, 0, 0, 0}}},
    {13, 223, {{1, 1, 7, 3, 31, 19, 69, 217, 47, 441, 1893, 673, 4451, 0, 0, 0, 0, 0}}},
    {13, 224, {{1, 1, 1, 1, 25, 9, 23, 225, 385, 629, 603, 3747, 4241, 0, 0, 0, 0, 0}}},
}};

}  // namespace xaieval::detail
