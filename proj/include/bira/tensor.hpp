#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "bira/error.hpp"

namespace bira {

using i64 = std::int64_t;
using Shape = std::vector<i64>;

i64 shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense N-dimensional array of doubles, row-major.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> d);

    static Tensor zeros(Shape s);
    static Tensor full(Shape s, double v);
    static Tensor scalar(double v);
    static Tensor from_vec(std::vector<double> d);  // 1-D

    i64 numel() const { return static_cast<i64>(data.size()); }
    i64 ndim() const { return static_cast<i64>(shape.size()); }
    i64 dim(std::size_t i) const { return shape.at(i); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    double& at(std::initializer_list<i64> idx);
    double at(std::initializer_list<i64> idx) const;

    bool all_finite() const;
};

}  // namespace bira
