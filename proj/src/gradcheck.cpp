#include "onnseg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "onnseg/rng.hpp"

namespace onnseg {

GradCheckReport grad_check(const ForwardClosure& f,
                           const std::vector<std::pair<std::string, TensorPtr>>& params,
                           const GradCheckOptions& opt) {
    for (const auto& [name, t] : params)
        if (!t->requires_grad)
            throw ContractError("grad_check: parameter '" + name + "' has requires_grad=false");

    // determinism probe: bit-identical losses for identical inputs
    {
        Tape t1, t2;
        const double v1 = f(t1)->value();
        const double v2 = f(t2)->value();
        if (!(v1 == v2))
            throw DeterminismError("grad_check: closure is not deterministic (" +
                                   std::to_string(v1) + " vs " + std::to_string(v2) + ")");
    }

    // analytic gradients
    for (const auto& [name, t] : params) {
        t->ensure_grad();
        t->zero_grad();
    }
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        auto loss = f(tape);
        tape.backward(loss);
        analytic.reserve(params.size());
        for (const auto& [name, t] : params)
            analytic.push_back(t->grad);
    }

    auto eval = [&]() {
        Tape tape;
        return f(tape)->value();
    };

    Rng rng(opt.sample_seed);
    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& tensor = *params[pi].second;
        const std::int64_t n = tensor.numel();
        std::vector<std::int64_t> idx;
        if (opt.max_elements_per_tensor > 0 && n > opt.max_elements_per_tensor) {
            for (std::int64_t k = 0; k < opt.max_elements_per_tensor; ++k)
                idx.push_back(static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(n))));
            std::sort(idx.begin(), idx.end());
            idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
        } else {
            idx.resize(static_cast<std::size_t>(n));
            for (std::int64_t k = 0; k < n; ++k) idx[static_cast<std::size_t>(k)] = k;
        }

        GradCheckItem item;
        item.name = params[pi].first;
        for (std::int64_t i : idx) {
            const double saved = tensor.data[i];
            tensor.data[i] = saved + opt.step;
            const double fp = eval();
            tensor.data[i] = saved - opt.step;
            const double fm = eval();
            tensor.data[i] = saved;
            const double numeric = (fp - fm) / (2.0 * opt.step);
            const double a = analytic[pi][i];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), opt.denom_floor});
            const double rel = std::fabs(a - numeric) / denom;
            item.max_rel_err = std::max(item.max_rel_err, rel);
            ++item.elements_checked;
        }
        report.max_rel_err = std::max(report.max_rel_err, item.max_rel_err);
        report.items.push_back(std::move(item));
    }
    return report;
}

} // namespace onnseg
