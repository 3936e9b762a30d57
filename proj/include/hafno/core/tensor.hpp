#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hafno {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor of 64-bit floats.
///
/// Fields use channels-first layout [C, H, W]. Complex tensors carry a
/// trailing extent of 2 holding interleaved (re, im) pairs.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape()); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t c, std::size_t h, std::size_t w) {
        return data_[(c * shape_[1] + h) * shape_[2] + w];
    }
    double at(std::size_t c, std::size_t h, std::size_t w) const {
        return data_[(c * shape_[1] + h) * shape_[2] + w];
    }

    double item() const;

    /// Same data, new shape of equal element count.
    Tensor reshaped(Shape shape) const;

    void fill(double v);
    bool all_finite() const;

    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Interpret an interleaved (re, im) buffer as complex values.
inline std::span<std::complex<double>> as_complex(std::span<double> d) {
    return {reinterpret_cast<std::complex<double>*>(d.data()), d.size() / 2};
}
inline std::span<const std::complex<double>> as_complex(std::span<const double> d) {
    return {reinterpret_cast<const std::complex<double>*>(d.data()), d.size() / 2};
}

// Field helpers for [C, H, W] tensors.
Tensor cyclic_shift(const Tensor& x, long shift_h, long shift_w);
double max_abs_diff(const Tensor& a, const Tensor& b);
double max_abs(const Tensor& a);
double l2_norm(const Tensor& a);

}  // namespace hafno
