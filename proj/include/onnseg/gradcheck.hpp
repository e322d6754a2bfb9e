#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "onnseg/autodiff.hpp"

namespace onnseg {

/// Builds the computation on the supplied tape and returns the scalar loss.
/// Must be deterministic: evaluating twice on the same parameter values has
/// to produce bit-identical losses.
using ForwardClosure = std::function<TensorPtr(Tape&)>;

struct GradCheckOptions {
    double step = 1e-5;          // central-difference h
    double denom_floor = 1e-12;  // rel err = |a-n| / max(|a|,|n|,floor)
    // 0 checks every element; otherwise this many elements per tensor are
    // sampled with the seeded generator below (used for large models where
    // exhaustive finite differences are not affordable).
    std::int64_t max_elements_per_tensor = 0;
    std::uint64_t sample_seed = 0;
};

struct GradCheckItem {
    std::string name;
    double max_rel_err = 0.0;
    std::int64_t elements_checked = 0;
};

struct GradCheckReport {
    std::vector<GradCheckItem> items;
    double max_rel_err = 0.0;
    bool passed(double tol) const { return max_rel_err <= tol; }
};

/// Central-difference check of analytic gradients for every named parameter:
/// numeric = (f(x+h) - f(x-h)) / 2h at 64-bit precision. Throws
/// DeterminismError if two identical evaluations of the closure differ.
GradCheckReport grad_check(const ForwardClosure& f,
                           const std::vector<std::pair<std::string, TensorPtr>>& params,
                           const GradCheckOptions& opt = {});

} // namespace onnseg
