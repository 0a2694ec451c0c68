#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace negsob {

/// Error type for all recoverable failures. Messages name the offending
/// entity (matrix, element, facet, file position, ...).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] void fail(const std::string& msg);

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

/// Work counter backing the linear-complexity assertions. One unit is a
/// constant-flop visit of one element, facet atom, or vertex; superlinear
/// code paths show up as counts growing faster than the level-summed
/// element totals.
class OpCounter {
 public:
  static void reset();
  static void add(std::uint64_t n);
  static std::uint64_t count();
};

/// Formats a double so that repeated runs produce byte-identical CSV.
std::string fmt_double(double v);

std::string fmt_int(long long v);

}  // namespace negsob
