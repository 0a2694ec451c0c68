#include "negsob/common.hpp"

#include <atomic>
#include <cstdio>

namespace negsob {

void fail(const std::string& msg) { throw Error(msg); }

namespace {
std::atomic<std::uint64_t> g_op_count{0};
}

void OpCounter::reset() { g_op_count.store(0, std::memory_order_relaxed); }

void OpCounter::add(std::uint64_t n) {
  g_op_count.fetch_add(n, std::memory_order_relaxed);
}

std::uint64_t OpCounter::count() {
  return g_op_count.load(std::memory_order_relaxed);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_int(long long v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%lld", v);
  return buf;
}

}  // namespace negsob
