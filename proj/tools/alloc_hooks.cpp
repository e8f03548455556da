// Global operator new/delete instrumentation. Every allocation is padded
// with a small header carrying the usable size and the malloc base pointer,
// so frees can be attributed exactly. Linked into the CLI binary only; the
// core library reads the counters through hetreg/alloc_counter.hpp and sees
// zeros when these hooks are absent.

#include <cstdint>
#include <cstdlib>
#include <new>

#include "hetreg/alloc_counter.hpp"

namespace {

struct Header {
    std::size_t size;
    void *base;
};

constexpr std::size_t kMinAlign = 16;

void *instrumented_alloc(std::size_t size, std::size_t align) noexcept {
    if (align < kMinAlign) align = kMinAlign;
    const std::size_t slack = sizeof(Header) + align;
    void *base = std::malloc(size + slack);
    if (!base) return nullptr;
    auto addr = reinterpret_cast<std::uintptr_t>(base) + sizeof(Header);
    addr = (addr + align - 1) & ~(align - 1);
    auto *header = reinterpret_cast<Header *>(addr) - 1;
    header->size = size;
    header->base = base;
    hetreg::alloctrack::on_alloc(size);
    return reinterpret_cast<void *>(addr);
}

void instrumented_free(void *ptr) noexcept {
    if (!ptr) return;
    auto *header = reinterpret_cast<Header *>(ptr) - 1;
    hetreg::alloctrack::on_free(header->size);
    std::free(header->base);
}

struct ActivationMarker {
    ActivationMarker() { hetreg::alloctrack::mark_active(); }
};
ActivationMarker g_marker;

} // namespace

void *operator new(std::size_t size) {
    if (void *p = instrumented_alloc(size, kMinAlign)) return p;
    throw std::bad_alloc();
}

void *operator new[](std::size_t size) {
    if (void *p = instrumented_alloc(size, kMinAlign)) return p;
    throw std::bad_alloc();
}

void *operator new(std::size_t size, std::align_val_t align) {
    if (void *p = instrumented_alloc(size, static_cast<std::size_t>(align))) return p;
    throw std::bad_alloc();
}

void *operator new[](std::size_t size, std::align_val_t align) {
    if (void *p = instrumented_alloc(size, static_cast<std::size_t>(align))) return p;
    throw std::bad_alloc();
}

void *operator new(std::size_t size, const std::nothrow_t &) noexcept {
    return instrumented_alloc(size, kMinAlign);
}

void *operator new[](std::size_t size, const std::nothrow_t &) noexcept {
    return instrumented_alloc(size, kMinAlign);
}

void operator delete(void *ptr) noexcept { instrumented_free(ptr); }
void operator delete[](void *ptr) noexcept { instrumented_free(ptr); }
void operator delete(void *ptr, std::size_t) noexcept { instrumented_free(ptr); }
void operator delete[](void *ptr, std::size_t) noexcept { instrumented_free(ptr); }
void operator delete(void *ptr, std::align_val_t) noexcept { instrumented_free(ptr); }
void operator delete[](void *ptr, std::align_val_t) noexcept { instrumented_free(ptr); }
void operator delete(void *ptr, std::size_t, std::align_val_t) noexcept {
    instrumented_free(ptr);
}
void operator delete[](void *ptr, std::size_t, std::align_val_t) noexcept {
    instrumented_free(ptr);
}
void operator delete(void *ptr, const std::nothrow_t &) noexcept { instrumented_free(ptr); }
void operator delete[](void *ptr, const std::nothrow_t &) noexcept { instrumented_free(ptr); }
