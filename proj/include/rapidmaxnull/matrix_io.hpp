#pragma once

// Matrix files.
//
// Binary (.mat0):   8-byte magic "RMNMAT0\0", u32 version (=1), u64 rows,
//                   u64 cols, then rows*cols IEEE-754 doubles, row-major,
//                   all little-endian. Round-trips bit-exactly.
// CSV:              first row "v,n,n1,n2" (integers), then v rows of n
//                   values printed with 17 significant digits.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>

#include "rapidmaxnull/types.hpp"

namespace rapidmaxnull {

inline constexpr std::array<char, 8> kMatrixMagic = {'R', 'M', 'N', 'M', 'A', 'T', '0', '\0'};
inline constexpr std::uint32_t kMatrixVersion = 1;
inline constexpr std::size_t kMatrixHeaderBytes = 8 + 4 + 8 + 8;

void write_binary(const RowMatrix& m, const std::filesystem::path& path);
RowMatrix read_binary(const std::filesystem::path& path);

/// Writes binary unless the extension is ".csv".
void write_matrix(const DataMatrix& x, const std::filesystem::path& path);

/// Reads binary or CSV by extension. Binary files carry no group split, so
/// `n1` is required for them unless the groups are equal (n1 = n / 2).
DataMatrix read_matrix(const std::filesystem::path& path,
                       std::optional<std::size_t> n1 = std::nullopt);

}  // namespace rapidmaxnull
