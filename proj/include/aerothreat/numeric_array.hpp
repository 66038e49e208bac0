#pragma once

#include "aerothreat/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace aerothreat {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape &shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

/// Dense row-major array of doubles with an explicit shape.
class NumericArray {
public:
    NumericArray() = default;

    explicit NumericArray(Shape shape, double fill = 0.0)
        : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

    NumericArray(Shape shape, std::vector<double> values)
        : shape_(std::move(shape)), values_(std::move(values)) {
        if (values_.size() != shape_size(shape_)) {
            throw ValidationError(fmt::format("array of shape [{}] needs {} values, got {}",
                                              fmt::join(shape_, ","), shape_size(shape_), values_.size()));
        }
    }

    [[nodiscard]] const Shape &shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

    [[nodiscard]] double *data() noexcept { return values_.data(); }
    [[nodiscard]] const double *data() const noexcept { return values_.data(); }
    [[nodiscard]] std::span<double> values() noexcept { return values_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::vector<double> &storage() noexcept { return values_; }
    [[nodiscard]] const std::vector<double> &storage() const noexcept { return values_; }

    double &operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    // 3-d (h, w, c) and 4-d (n, h, w, c) accessors used by image code.
    double &at(std::size_t y, std::size_t x, std::size_t c) {
        return values_[(y * shape_[1] + x) * shape_[2] + c];
    }
    double at(std::size_t y, std::size_t x, std::size_t c) const {
        return values_[(y * shape_[1] + x) * shape_[2] + c];
    }
    double &at(std::size_t n, std::size_t y, std::size_t x, std::size_t c) {
        return values_[((n * shape_[1] + y) * shape_[2] + x) * shape_[3] + c];
    }
    double at(std::size_t n, std::size_t y, std::size_t x, std::size_t c) const {
        return values_[((n * shape_[1] + y) * shape_[2] + x) * shape_[3] + c];
    }

    void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

    [[nodiscard]] bool all_finite() const noexcept {
        for (double v : values_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    friend bool operator==(const NumericArray &, const NumericArray &) = default;

private:
    Shape shape_;
    std::vector<double> values_;
};

inline std::string shape_string(const Shape &shape) {
    return fmt::format("({})", fmt::join(shape, ","));
}

}  // namespace aerothreat
