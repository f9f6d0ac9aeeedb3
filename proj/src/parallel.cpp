#include "rapidmaxnull/parallel.hpp"

#include <cstdlib>
#include <string>

#include "rapidmaxnull/errors.hpp"

namespace rapidmaxnull {

unsigned resolve_threads_from(const char* text) {
  if (text == nullptr || *text == '\0') return std::max(1u, std::thread::hardware_concurrency());
  const std::string s(text);
  std::size_t used = 0;
  long value = 0;
  try {
    value = std::stol(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || value < 1) {
    throw UsageError("thread count must be a positive integer, got '" + s + "'");
  }
  return static_cast<unsigned>(value);
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return resolve_threads_from(std::getenv("RAPIDMAXNULL_THREADS"));
}

}  // namespace rapidmaxnull
