#include "onnseg/params.hpp"

#include <cmath>

namespace onnseg {

TensorPtr ParamStore::add(const std::string& name, TensorPtr t, bool trainable) {
    if (index_.count(name))
        throw ValidationError("ParamStore: duplicate parameter name '" + name + "'");
    index_[name] = entries_.size();
    entries_.push_back({name, t, trainable});
    return t;
}

TensorPtr ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
        throw ValidationError("ParamStore: unknown parameter '" + name + "'");
    return entries_[it->second].tensor;
}

std::vector<std::pair<std::string, TensorPtr>> ParamStore::trainable() const {
    std::vector<std::pair<std::string, TensorPtr>> out;
    for (const auto& e : entries_)
        if (e.trainable) out.emplace_back(e.name, e.tensor);
    return out;
}

std::int64_t ParamStore::trainable_count() const {
    std::int64_t n = 0;
    for (const auto& e : entries_)
        if (e.trainable) n += e.tensor->numel();
    return n;
}

std::int64_t ParamStore::total_count() const {
    std::int64_t n = 0;
    for (const auto& e : entries_) n += e.tensor->numel();
    return n;
}

void ParamStore::zero_grads() {
    for (const auto& e : entries_)
        if (e.trainable) {
            e.tensor->ensure_grad();
            e.tensor->zero_grad();
        }
}

void init_uniform_fanin(Tensor& t, int fan_in, double extra_scale, Rng& rng) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in)) * extra_scale;
    for (double& v : t.data)
        v = rng.uniform(-bound, bound);
}

} // namespace onnseg
