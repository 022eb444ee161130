#include "qn/tensor.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace qn {

namespace {

void check_dims(const std::vector<int>& dims) {
    if (dims.empty() || dims.size() > 4) {
        throw std::invalid_argument("shape rank must be 1..4, got " + std::to_string(dims.size()));
    }
    std::int64_t count = 1;
    for (int d : dims) {
        if (d < 1) throw std::invalid_argument("shape extent must be >= 1, got " + std::to_string(d));
        count *= d;
        if (count > std::numeric_limits<std::int32_t>::max()) {
            throw std::invalid_argument("shape element count overflows");
        }
    }
}

}  // namespace

Shape::Shape(std::initializer_list<int> dims) : dims_(dims) { check_dims(dims_); }

Shape::Shape(std::vector<int> dims) : dims_(std::move(dims)) { check_dims(dims_); }

std::int64_t Shape::count() const {
    std::int64_t n = 1;
    for (int d : dims_) n *= d;
    return n;
}

std::int64_t Shape::offset(int n, int c, int h, int w) const {
    if (rank() != 4) throw std::invalid_argument("4d index on rank-" + std::to_string(rank()) + " tensor");
    return ((static_cast<std::int64_t>(n) * dims_[1] + c) * dims_[2] + h) * dims_[3] + w;
}

std::string Shape::str() const {
    std::ostringstream os;
    for (size_t i = 0; i < dims_.size(); ++i) {
        if (i) os << 'x';
        os << dims_[i];
    }
    return os.str();
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_.count()), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (static_cast<std::int64_t>(data_.size()) != shape_.count()) {
        throw std::invalid_argument("value list length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_.str());
    }
}

bool Tensor::all_finite() const {
    for (float v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                                    b.shape().str());
    }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out(a.shape());
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    for (std::int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] + pb[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a.shape());
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    for (std::int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] * pb[i];
    return out;
}

Tensor scale(const Tensor& a, float s) {
    Tensor out(a.shape());
    const float* pa = a.data();
    float* po = out.data();
    for (std::int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] * s;
    return out;
}

Tensor reduce_mean_hw(const Tensor& t) {
    if (t.shape().rank() != 4) {
        throw std::invalid_argument("reduce_mean_hw: rank-4 tensor required, got rank " +
                                    std::to_string(t.shape().rank()));
    }
    const int n = t.shape().dim(0), c = t.shape().dim(1), h = t.shape().dim(2), w = t.shape().dim(3);
    Tensor out(Shape{n, c, 1, 1});
    const float* p = t.data();
    float* po = out.data();
    const float denom = static_cast<float>(h) * static_cast<float>(w);
    for (int i = 0; i < n * c; ++i) {
        float sum = 0.0f;
        const float* plane = p + static_cast<std::int64_t>(i) * h * w;
        for (int j = 0; j < h * w; ++j) sum += plane[j];
        po[i] = sum / denom;
    }
    return out;
}

}  // namespace qn
