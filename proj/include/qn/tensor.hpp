#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace qn {

// Dense shape of rank 1-4. Rank-4 order is (batch, channels, height, width).
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<int> dims);
    explicit Shape(std::vector<int> dims);

    int rank() const { return static_cast<int>(dims_.size()); }
    int dim(int i) const { return dims_[static_cast<size_t>(i)]; }
    const std::vector<int>& dims() const { return dims_; }
    std::int64_t count() const;

    // Flat row-major offset of a rank-4 index.
    std::int64_t offset(int n, int c, int h, int w) const;

    bool operator==(const Shape& o) const { return dims_ == o.dims_; }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const;  // "1x3x32x32"

private:
    std::vector<int> dims_;
};

// Dense fp32 tensor, row-major in declared dim order. Immutable by
// convention once handed to a layer; ops return new tensors.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> values);

    const Shape& shape() const { return shape_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& values() { return data_; }
    const std::vector<float>& values() const { return data_; }

    float& at(int n, int c, int h, int w) { return data_[static_cast<size_t>(shape_.offset(n, c, h, w))]; }
    float at(int n, int c, int h, int w) const { return data_[static_cast<size_t>(shape_.offset(n, c, h, w))]; }

    bool all_finite() const;

private:
    Shape shape_;
    std::vector<float> data_;
};

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);

// Mean over H and W of a rank-4 tensor -> (batch, channels, 1, 1).
// Accumulates rows top to bottom, columns left to right, divide at the end.
Tensor reduce_mean_hw(const Tensor& t);

}  // namespace qn
