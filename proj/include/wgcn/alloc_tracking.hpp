#pragma once

#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <new>

// Byte counters fed by replacement global allocation functions. The
// replacements are only emitted where WGCN_INSTALL_ALLOCATION_TRACKING()
// appears, which must be exactly one translation unit of a program.

namespace wgcn::alloc {

inline std::atomic<std::size_t> current_bytes{0};
inline std::atomic<std::size_t> peak_bytes{0};
inline std::atomic<bool> installed{false};

inline void record_allocation(std::size_t n) noexcept {
    const std::size_t now = current_bytes.fetch_add(n, std::memory_order_relaxed) + n;
    std::size_t peak = peak_bytes.load(std::memory_order_relaxed);
    while (now > peak && !peak_bytes.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
    }
}

inline void record_release(std::size_t n) noexcept { current_bytes.fetch_sub(n, std::memory_order_relaxed); }

/// Restarts peak tracking from the current live byte count.
inline void reset_peak() noexcept { peak_bytes.store(current_bytes.load(std::memory_order_relaxed)); }

inline bool tracking_enabled() noexcept { return installed.load(); }

inline constexpr std::size_t kHeader = alignof(std::max_align_t);

inline void* tracked_malloc(std::size_t n) {
    void* raw = std::malloc(n + kHeader);
    if (!raw) throw std::bad_alloc();
    *static_cast<std::size_t*>(raw) = n;
    record_allocation(n);
    return static_cast<char*>(raw) + kHeader;
}

inline void tracked_free(void* p) noexcept {
    if (!p) return;
    char* raw = static_cast<char*>(p) - kHeader;
    record_release(*reinterpret_cast<std::size_t*>(raw));
    std::free(raw);
}

}  // namespace wgcn::alloc

#define WGCN_INSTALL_ALLOCATION_TRACKING()                                                       \
    void* operator new(std::size_t n) { return ::wgcn::alloc::tracked_malloc(n); }              \
    void* operator new[](std::size_t n) { return ::wgcn::alloc::tracked_malloc(n); }            \
    void operator delete(void* p) noexcept { ::wgcn::alloc::tracked_free(p); }                  \
    void operator delete[](void* p) noexcept { ::wgcn::alloc::tracked_free(p); }                \
    void operator delete(void* p, std::size_t) noexcept { ::wgcn::alloc::tracked_free(p); }     \
    void operator delete[](void* p, std::size_t) noexcept { ::wgcn::alloc::tracked_free(p); }   \
    namespace {                                                                                 \
    const bool wgcn_alloc_installed_ = (::wgcn::alloc::installed.store(true), true);            \
    }
