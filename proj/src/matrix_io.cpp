#include "rapidmaxnull/matrix_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "rapidmaxnull/errors.hpp"

namespace rapidmaxnull {
namespace {

template <typename T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

template <typename T>
void put(std::ostream& out, T value) {
  value = to_little(value);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, std::size_t offset, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw DataError(fmt::format("{}: truncated header at byte offset {}", path.string(), offset));
  }
  return to_little(value);
}

bool is_csv(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".csv";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::size_t parse_count(const std::string& s, const char* name,
                        const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const long long value = std::stoll(s, &used);
    if (used != s.size() || value < 0) throw std::invalid_argument(s);
    return static_cast<std::size_t>(value);
  } catch (const std::exception&) {
    throw DataError(fmt::format("{}: malformed header field {} '{}'", path.string(), name, s));
  }
}

void write_csv(const DataMatrix& x, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << fmt::format("{},{},{},{}\n", x.voxels(), x.subjects(), x.n1(), x.n2());
  const auto& m = x.values();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << fmt::format("{:.17g}", m(i, j));
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

DataMatrix read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  const auto header = split_csv(line);
  if (header.size() != 4) {
    throw DataError(path.string() + ": header must be 'v,n,n1,n2', got '" + line + "'");
  }
  const auto v = parse_count(header[0], "v", path);
  const auto n = parse_count(header[1], "n", path);
  const auto n1 = parse_count(header[2], "n1", path);
  const auto n2 = parse_count(header[3], "n2", path);
  if (v == 0) throw DataError(path.string() + ": header declares v=0 voxels");
  if (n1 + n2 != n) {
    throw DataError(fmt::format("{}: header n1+n2={} does not equal n={}", path.string(), n1 + n2, n));
  }
  RowMatrix values(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < v; ++r) {
    if (!std::getline(in, line)) {
      throw DataError(fmt::format("{}: expected {} data rows, found {}", path.string(), v, r));
    }
    const auto cells = split_csv(line);
    if (cells.size() != n) {
      throw DataError(fmt::format("{}: data row {} has {} cells, expected {}", path.string(), r,
                                  cells.size(), n));
    }
    for (std::size_t c = 0; c < n; ++c) {
      double value = 0.0;
      try {
        std::size_t used = 0;
        value = std::stod(cells[c], &used);
        if (used != cells[c].size()) throw std::invalid_argument(cells[c]);
      } catch (const std::exception&) {
        throw DataError(fmt::format("{}: unparsable value '{}' at row {}, col {}", path.string(),
                                    cells[c], r, c));
      }
      if (!std::isfinite(value)) {
        throw DataError(fmt::format("{}: non-finite value '{}' at row {}, col {}", path.string(),
                                    cells[c], r, c));
      }
      values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = value;
    }
  }
  while (std::getline(in, line)) {
    if (!line.empty()) throw DataError(path.string() + ": trailing data after declared rows");
  }
  return DataMatrix(std::move(values), n1);
}

}  // namespace

void write_binary(const RowMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(kMatrixMagic.data(), kMatrixMagic.size());
  put<std::uint32_t>(out, kMatrixVersion);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
  } else {
    for (Eigen::Index i = 0; i < m.size(); ++i) put<double>(out, m.data()[i]);
  }
  if (!out) throw DataError("write failed for " + path.string());
}

RowMatrix read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMatrixMagic) {
    throw DataError(path.string() + ": bad magic at byte offset 0 (not a .mat0 file)");
  }
  const auto version = get<std::uint32_t>(in, 8, path);
  if (version != kMatrixVersion) {
    throw DataError(fmt::format("{}: unsupported version {} at byte offset 8", path.string(), version));
  }
  const auto rows = get<std::uint64_t>(in, 12, path);
  const auto cols = get<std::uint64_t>(in, 20, path);
  if (rows == 0) throw DataError(path.string() + ": zero row count at byte offset 12");
  if (cols == 0) throw DataError(path.string() + ": zero column count at byte offset 20");
  const auto file_size = std::filesystem::file_size(path);
  if (cols > (file_size / sizeof(double)) / rows + 1 ||
      file_size != kMatrixHeaderBytes + rows * cols * sizeof(double)) {
    throw DataError(fmt::format("{}: dimension mismatch, header declares {}x{} ({} payload bytes) "
                                "but file has {} bytes",
                                path.string(), rows, cols, rows * cols * sizeof(double), file_size));
  }
  RowMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  if (!in.read(reinterpret_cast<char*>(m.data()),
               static_cast<std::streamsize>(rows * cols * sizeof(double)))) {
    throw DataError(path.string() + ": truncated payload");
  }
  if constexpr (std::endian::native != std::endian::little) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = to_little(m.data()[i]);
  }
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (!std::isfinite(m.data()[i])) {
      throw DataError(fmt::format("{}: non-finite entry at byte offset {} (row {}, col {})",
                                  path.string(), kMatrixHeaderBytes + i * sizeof(double),
                                  i / m.cols(), i % m.cols()));
    }
  }
  return m;
}

void write_matrix(const DataMatrix& x, const std::filesystem::path& path) {
  if (is_csv(path)) {
    write_csv(x, path);
  } else {
    write_binary(x.values(), path);
  }
}

DataMatrix read_matrix(const std::filesystem::path& path, std::optional<std::size_t> n1) {
  if (is_csv(path)) {
    auto x = read_csv(path);
    if (n1 && *n1 != x.n1()) {
      throw UsageError(fmt::format("--n1={} conflicts with the CSV header n1={}", *n1, x.n1()));
    }
    return x;
  }
  auto values = read_binary(path);
  const auto n = static_cast<std::size_t>(values.cols());
  return DataMatrix(std::move(values), n1.value_or(n / 2));
}

}  // namespace rapidmaxnull
