#include "hetreg/alloc_counter.hpp"

#include <atomic>

namespace hetreg::alloctrack {

namespace {
std::atomic<bool> g_active{false};
thread_local std::int64_t t_current = 0;
thread_local std::int64_t t_peak = 0;
} // namespace

bool active() noexcept { return g_active.load(std::memory_order_relaxed); }
void mark_active() noexcept { g_active.store(true, std::memory_order_relaxed); }

std::int64_t current_bytes() noexcept { return t_current; }
std::int64_t peak_bytes() noexcept { return t_peak; }
void reset_peak() noexcept { t_peak = t_current; }

void on_alloc(std::size_t bytes) noexcept {
    t_current += static_cast<std::int64_t>(bytes);
    if (t_current > t_peak) t_peak = t_current;
}

void on_free(std::size_t bytes) noexcept { t_current -= static_cast<std::int64_t>(bytes); }

} // namespace hetreg::alloctrack
