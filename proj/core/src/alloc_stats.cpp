#include "dim/alloc_stats.hpp"

#include <atomic>

namespace dim::alloc {

namespace {
std::atomic<int64_t> g_current{0};
std::atomic<int64_t> g_peak{0};
std::atomic<bool> g_active{false};
}  // namespace

void reset_peak() {
  g_peak.store(g_current.load(std::memory_order_relaxed),
               std::memory_order_relaxed);
}

int64_t current_bytes() { return g_current.load(std::memory_order_relaxed); }
int64_t peak_bytes() { return g_peak.load(std::memory_order_relaxed); }
bool hooks_active() { return g_active.load(std::memory_order_relaxed); }

void on_alloc(std::size_t bytes) {
  int64_t cur = g_current.fetch_add(static_cast<int64_t>(bytes),
                                    std::memory_order_relaxed) +
                static_cast<int64_t>(bytes);
  int64_t peak = g_peak.load(std::memory_order_relaxed);
  while (cur > peak &&
         !g_peak.compare_exchange_weak(peak, cur, std::memory_order_relaxed)) {
  }
}

void on_free(std::size_t bytes) {
  g_current.fetch_sub(static_cast<int64_t>(bytes), std::memory_order_relaxed);
}

void mark_hooks_active() { g_active.store(true, std::memory_order_relaxed); }

}  // namespace dim::alloc
