#pragma once

#include <array>
#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace tipscan {

struct Shape4 {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;

    std::size_t count() const noexcept {
        return static_cast<std::size_t>(n) * c * h * w;
    }
    bool operator==(const Shape4&) const = default;
};

std::string to_string(const Shape4& shape);

// 64-byte aligned storage. Vectorized kernels pick their summation order from
// pointer alignment, so a fixed alignment keeps results bitwise reproducible.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using AlignedDoubles = std::vector<double, AlignedAllocator<double>>;

/// Dense NCHW tensor of doubles.
class Tensor4 {
public:
    Tensor4() = default;
    explicit Tensor4(Shape4 shape, double fill = 0.0) : shape_(shape), values_(shape.count(), fill) {}
    Tensor4(Shape4 shape, std::vector<double> values);

    const Shape4& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return values_.size(); }

    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    double& at(int n, int c, int h, int w) { return values_[index(n, c, h, w)]; }
    double at(int n, int c, int h, int w) const { return values_[index(n, c, h, w)]; }

    /// Pointer to the start of sample n.
    double* sample(int n) { return values_.data() + static_cast<std::size_t>(n) * per_sample(); }
    const double* sample(int n) const {
        return values_.data() + static_cast<std::size_t>(n) * per_sample();
    }
    std::size_t per_sample() const noexcept {
        return static_cast<std::size_t>(shape_.c) * shape_.h * shape_.w;
    }

    void fill(double v);
    bool all_finite() const;
    double squared_norm() const;

    bool operator==(const Tensor4&) const = default;

private:
    std::size_t index(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }

    Shape4 shape_;
    AlignedDoubles values_;
};

}  // namespace tipscan
