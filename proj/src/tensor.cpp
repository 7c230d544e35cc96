#include "bira/tensor.hpp"

#include <cmath>
#include <sstream>

namespace bira {

i64 shape_numel(const Shape& s) {
    i64 n = 1;
    for (i64 d : s) {
        if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(s));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != static_cast<i64>(data.size())) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
}

Tensor Tensor::zeros(Shape s) {
    i64 n = shape_numel(s);
    return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

Tensor Tensor::full(Shape s, double v) {
    i64 n = shape_numel(s);
    return Tensor(std::move(s), std::vector<double>(static_cast<std::size_t>(n), v));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::from_vec(std::vector<double> d) {
    Shape s{static_cast<i64>(d.size())};
    return Tensor(std::move(s), std::move(d));
}

static i64 flat_index(const Shape& shape, std::initializer_list<i64> idx) {
    if (idx.size() != shape.size()) {
        throw ShapeError("index rank " + std::to_string(idx.size()) + " does not match shape " +
                         shape_str(shape));
    }
    i64 flat = 0;
    std::size_t k = 0;
    for (i64 i : idx) {
        if (i < 0 || i >= shape[k]) {
            throw ShapeError("index out of bounds for shape " + shape_str(shape));
        }
        flat = flat * shape[k] + i;
        ++k;
    }
    return flat;
}

double& Tensor::at(std::initializer_list<i64> idx) {
    return data[static_cast<std::size_t>(flat_index(shape, idx))];
}

double Tensor::at(std::initializer_list<i64> idx) const {
    return data[static_cast<std::size_t>(flat_index(shape, idx))];
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace bira
