// Global operator new/delete overrides that feed dim::alloc counters.
// Each allocation stores its size in a small header so frees can be
// attributed exactly (sized delete is not guaranteed for arrays).

#include <cstdlib>
#include <new>

#include "dim/alloc_stats.hpp"

namespace {

constexpr std::size_t kHeader = 2 * sizeof(std::max_align_t);

struct HookInit {
  HookInit() { dim::alloc::mark_hooks_active(); }
};
HookInit g_init;

void* counted_alloc(std::size_t size) {
  void* raw = std::malloc(size + kHeader);
  if (!raw) throw std::bad_alloc();
  *static_cast<std::size_t*>(raw) = size;
  dim::alloc::on_alloc(size);
  return static_cast<char*>(raw) + kHeader;
}

void counted_free(void* ptr) noexcept {
  if (!ptr) return;
  void* raw = static_cast<char*>(ptr) - kHeader;
  dim::alloc::on_free(*static_cast<std::size_t*>(raw));
  std::free(raw);
}

}  // namespace

void* operator new(std::size_t size) { return counted_alloc(size); }
void* operator new[](std::size_t size) { return counted_alloc(size); }
void* operator new(std::size_t size, const std::nothrow_t&) noexcept {
  try {
    return counted_alloc(size);
  } catch (...) {
    return nullptr;
  }
}
void* operator new[](std::size_t size, const std::nothrow_t&) noexcept {
  try {
    return counted_alloc(size);
  } catch (...) {
    return nullptr;
  }
}

void operator delete(void* ptr) noexcept { counted_free(ptr); }
void operator delete[](void* ptr) noexcept { counted_free(ptr); }
void operator delete(void* ptr, std::size_t) noexcept { counted_free(ptr); }
void operator delete[](void* ptr, std::size_t) noexcept { counted_free(ptr); }
void operator delete(void* ptr, const std::nothrow_t&) noexcept { counted_free(ptr); }
void operator delete[](void* ptr, const std::nothrow_t&) noexcept { counted_free(ptr); }
