#pragma once

#include <cstddef>
#include <cstdint>

namespace hetreg::alloctrack {

/// True when the global operator new/delete hooks are linked into the binary.
bool active() noexcept;
void mark_active() noexcept; // called by the hook translation unit

// Per-thread live/peak heap bytes, fed by the hooks; zero when inactive.
std::int64_t current_bytes() noexcept;
std::int64_t peak_bytes() noexcept;
void reset_peak() noexcept; // peak := current

void on_alloc(std::size_t bytes) noexcept;
void on_free(std::size_t bytes) noexcept;

/// Peak allocation above the level at construction, read via delta().
class PeakScope {
public:
    PeakScope() : base_(current_bytes()) { reset_peak(); }
    std::int64_t delta() const noexcept {
        const std::int64_t d = peak_bytes() - base_;
        return d > 0 ? d : 0;
    }

private:
    std::int64_t base_;
};

} // namespace hetreg::alloctrack
