#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace tuckit {

/// Tracks live and peak allocation in 64-bit words for one owner (typically
/// one simulated rank). Thread-safe so buffers may be released from a thread
/// other than the one that allocated them.
class MemoryMeter {
public:
    void charge(std::size_t words) {
        const auto now = current_.fetch_add(static_cast<std::int64_t>(words),
                                            std::memory_order_relaxed) +
                         static_cast<std::int64_t>(words);
        auto peak = peak_.load(std::memory_order_relaxed);
        while (now > peak &&
               !peak_.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
        }
    }

    void release(std::size_t words) {
        current_.fetch_sub(static_cast<std::int64_t>(words), std::memory_order_relaxed);
    }

    [[nodiscard]] std::int64_t current_words() const {
        return current_.load(std::memory_order_relaxed);
    }

    [[nodiscard]] std::int64_t peak_words() const {
        return peak_.load(std::memory_order_relaxed);
    }

    void reset() {
        current_.store(0, std::memory_order_relaxed);
        peak_.store(0, std::memory_order_relaxed);
    }

private:
    std::atomic<std::int64_t> current_{0};
    std::atomic<std::int64_t> peak_{0};
};

/// Thread-local meter slot. Null outside of metered scopes; numeric buffers
/// allocated while a meter is bound carry that meter for their whole lifetime.
inline MemoryMeter*& active_meter() {
    thread_local MemoryMeter* meter = nullptr;
    return meter;
}

/// RAII binding of a meter to the current thread.
class MeterScope {
public:
    explicit MeterScope(MemoryMeter* meter) : previous_(active_meter()) {
        active_meter() = meter;
    }
    ~MeterScope() { active_meter() = previous_; }
    MeterScope(const MeterScope&) = delete;
    MeterScope& operator=(const MeterScope&) = delete;

private:
    MemoryMeter* previous_;
};

/// Allocator that charges the meter bound at construction time. Containers
/// keep the allocator with the buffer, so words are released against the
/// meter that was charged even if the buffer is freed on another thread.
template <class T>
class MeteredAllocator {
public:
    using value_type = T;
    using propagate_on_container_copy_assignment = std::true_type;
    using propagate_on_container_move_assignment = std::true_type;
    using propagate_on_container_swap = std::true_type;

    MeteredAllocator() noexcept : meter_(active_meter()) {}
    explicit MeteredAllocator(MemoryMeter* meter) noexcept : meter_(meter) {}
    template <class U>
    MeteredAllocator(const MeteredAllocator<U>& other) noexcept : meter_(other.meter()) {}

    [[nodiscard]] T* allocate(std::size_t n) {
        if (meter_ != nullptr) meter_->charge(words(n));
        return std::allocator<T>().allocate(n);
    }

    void deallocate(T* p, std::size_t n) {
        std::allocator<T>().deallocate(p, n);
        if (meter_ != nullptr) meter_->release(words(n));
    }

    /// Fresh copies are charged to the context doing the copying.
    [[nodiscard]] MeteredAllocator select_on_container_copy_construction() const {
        return MeteredAllocator();
    }

    [[nodiscard]] MemoryMeter* meter() const { return meter_; }

    template <class U>
    friend bool operator==(const MeteredAllocator& a, const MeteredAllocator<U>& b) {
        return a.meter_ == b.meter();
    }

private:
    static std::size_t words(std::size_t n) { return (n * sizeof(T) + 7) / 8; }

    MemoryMeter* meter_;
};

/// Numeric buffer type used for all tensor and matrix payloads.
using DVec = std::vector<double, MeteredAllocator<double>>;

}  // namespace tuckit
