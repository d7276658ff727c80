#pragma once

#include <cstddef>
#include <cstdint>

namespace dim::alloc {

// Heap accounting for the allocation-counting harness. The counters only move
// when dim::alloc_hooks (global operator new/delete overrides) is linked into
// the binary; otherwise they stay at zero.
void reset_peak();
int64_t current_bytes();
int64_t peak_bytes();
bool hooks_active();

// Internal entry points used by the hook TU.
void on_alloc(std::size_t bytes);
void on_free(std::size_t bytes);
void mark_hooks_active();

}  // namespace dim::alloc
