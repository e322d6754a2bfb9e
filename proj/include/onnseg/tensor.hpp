#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "onnseg/error.hpp"

namespace onnseg {

/// Rank-4 extent in NCHW order. All tensors in the engine are rank 4;
/// vectors live as (1,C,1,1) and scalars as (1,1,1,1).
struct Shape4 {
    int n = 1, c = 1, h = 1, w = 1;

    std::int64_t numel() const {
        return static_cast<std::int64_t>(n) * c * h * w;
    }
    bool operator==(const Shape4&) const = default;
    std::string str() const;
};

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense rank-4 array of 64-bit floats in row-major NCHW order, with an
/// optional gradient buffer of the same length.
class Tensor {
public:
    Shape4 shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad; // empty until ensure_grad()

    // Set on tensors produced by tape ops; their grads are scratch that each
    // backward pass re-zeroes, while leaf grads accumulate across passes.
    bool tape_node = false;

    static TensorPtr zeros(Shape4 s, bool requires_grad = false);
    static TensorPtr full(Shape4 s, double value, bool requires_grad = false);
    static TensorPtr from(Shape4 s, std::vector<double> values, bool requires_grad = false);
    static TensorPtr scalar(double value);

    std::int64_t numel() const { return shape.numel(); }
    bool is_scalar() const { return shape == Shape4{1, 1, 1, 1}; }

    std::int64_t index(int ni, int ci, int hi, int wi) const {
        return ((static_cast<std::int64_t>(ni) * shape.c + ci) * shape.h + hi) * shape.w + wi;
    }
    double& at(int ni, int ci, int hi, int wi) { return data[index(ni, ci, hi, wi)]; }
    double at(int ni, int ci, int hi, int wi) const { return data[index(ni, ci, hi, wi)]; }

    double value() const; // scalar tensors only

    void ensure_grad();   // allocate (zeroed) if absent
    void zero_grad();
    bool all_finite() const;
};

/// Throws DimensionError naming both shapes when they differ.
void check_same_shape(const Shape4& a, const Shape4& b, const char* where);

} // namespace onnseg
