#include "onnseg/tensor.hpp"

#include <cmath>
#include <sstream>

namespace onnseg {

std::string Shape4::str() const {
    std::ostringstream os;
    os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
    return os.str();
}

TensorPtr Tensor::zeros(Shape4 s, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    t->shape = s;
    t->data.assign(static_cast<std::size_t>(s.numel()), 0.0);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr Tensor::full(Shape4 s, double value, bool requires_grad) {
    auto t = zeros(s, requires_grad);
    std::fill(t->data.begin(), t->data.end(), value);
    return t;
}

TensorPtr Tensor::from(Shape4 s, std::vector<double> values, bool requires_grad) {
    if (static_cast<std::int64_t>(values.size()) != s.numel())
        throw DimensionError("Tensor::from: " + std::to_string(values.size()) +
                             " values for shape " + s.str());
    auto t = std::make_shared<Tensor>();
    t->shape = s;
    t->data = std::move(values);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr Tensor::scalar(double value) {
    return full({1, 1, 1, 1}, value);
}

double Tensor::value() const {
    if (!is_scalar())
        throw ContractError("Tensor::value: tensor of shape " + shape.str() + " is not scalar");
    return data[0];
}

void Tensor::ensure_grad() {
    if (grad.empty())
        grad.assign(data.size(), 0.0);
}

void Tensor::zero_grad() {
    if (!grad.empty())
        std::fill(grad.begin(), grad.end(), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

void check_same_shape(const Shape4& a, const Shape4& b, const char* where) {
    if (!(a == b))
        throw DimensionError(std::string(where) + ": shape mismatch " + a.str() + " vs " + b.str());
}

} // namespace onnseg
