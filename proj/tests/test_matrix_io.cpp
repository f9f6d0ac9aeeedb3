#include <doctest.h>

#include <cstring>
#include <fstream>

#include "helpers.hpp"
#include "rapidmaxnull/errors.hpp"
#include "rapidmaxnull/matrix_io.hpp"

using namespace rapidmaxnull;

namespace {

std::string message_of(const std::filesystem::path& p) {
  try {
    read_binary(p);
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

void patch(const std::filesystem::path& p, std::size_t offset, const void* bytes,
           std::size_t count) {
  std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(static_cast<std::streamoff>(offset));
  f.write(static_cast<const char*>(bytes), static_cast<std::streamsize>(count));
}

}  // namespace

TEST_CASE("binary files round-trip bit-exactly") {
  const auto dir = test::scratch_dir("io_roundtrip");
  auto rng = make_stream(77, StreamDomain::kSimulation, 0);
  for (int c = 0; c < 100; ++c) {
    const std::size_t rows = 1 + rng() % 40;
    const std::size_t cols = 1 + rng() % 12;
    RowMatrix m = test::gaussian(rows, cols, 1000 + c, 1e3);
    if (c % 10 == 0) m(0, 0) = -0.0;
    if (c % 10 == 1) m(0, 0) = 5e-324;
    const auto path = dir / "m.mat0";
    write_binary(m, path);
    CHECK(std::filesystem::file_size(path) == kMatrixHeaderBytes + rows * cols * 8);
    const RowMatrix back = read_binary(path);
    REQUIRE(back.rows() == m.rows());
    REQUIRE(back.cols() == m.cols());
    CHECK(std::memcmp(back.data(), m.data(), rows * cols * sizeof(double)) == 0);
  }
}

TEST_CASE("corrupt binary files name the offending offset") {
  const auto dir = test::scratch_dir("io_corrupt");
  const auto path = dir / "m.mat0";
  write_binary(test::gaussian(3, 2, 1), path);

  SUBCASE("bad magic") {
    patch(path, 0, "XXXX", 4);
    CHECK(message_of(path).find("offset 0") != std::string::npos);
  }
  SUBCASE("wrong version") {
    const std::uint32_t v = 9;
    patch(path, 8, &v, 4);
    CHECK(message_of(path).find("offset 8") != std::string::npos);
  }
  SUBCASE("zero rows") {
    const std::uint64_t z = 0;
    patch(path, 12, &z, 8);
    CHECK(message_of(path).find("offset 12") != std::string::npos);
  }
  SUBCASE("truncated payload") {
    std::filesystem::resize_file(path, kMatrixHeaderBytes + 8);
    CHECK_THROWS_AS(read_binary(path), DataError);
  }
  SUBCASE("non-finite entry") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    patch(path, kMatrixHeaderBytes + 3 * 8, &nan, 8);
    const auto msg = message_of(path);
    CHECK(msg.find("offset 52") != std::string::npos);
    CHECK(msg.find("row 1") != std::string::npos);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(read_binary(dir / "absent.mat0"), DataError); }
}

TEST_CASE("data matrices round-trip through both formats") {
  const auto dir = test::scratch_dir("io_data");
  const DataMatrix x(test::gaussian(5, 7, 3), 3);

  SUBCASE("csv keeps the group split") {
    write_matrix(x, dir / "x.csv");
    const auto back = read_matrix(dir / "x.csv");
    CHECK(back.n1() == 3);
    CHECK((back.values().array() == x.values().array()).all());
    CHECK_THROWS_AS(read_matrix(dir / "x.csv", 4), UsageError);
    CHECK_NOTHROW(read_matrix(dir / "x.csv", 3));
  }
  SUBCASE("binary takes n1 from the caller, default n/2") {
    write_matrix(x, dir / "x.mat0");
    CHECK(read_matrix(dir / "x.mat0", 4).n1() == 4);
    CHECK(read_matrix(dir / "x.mat0").n1() == 3);
    const DataMatrix even(test::gaussian(5, 8, 3), 4);
    write_matrix(even, dir / "e.mat0");
    CHECK(read_matrix(dir / "e.mat0").n1() == 4);
  }
}
