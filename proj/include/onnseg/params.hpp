#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "onnseg/rng.hpp"
#include "onnseg/tensor.hpp"

namespace onnseg {

/// Named parameter registry. Registration order is fixed by model
/// construction, which makes initialization, optimizer iteration and
/// checkpoint layout deterministic. Buffers (running statistics) live here
/// too, flagged non-trainable so the optimizer skips them while checkpoints
/// still carry them.
class ParamStore {
public:
    struct Entry {
        std::string name;
        TensorPtr tensor;
        bool trainable = true;
    };

    TensorPtr add(const std::string& name, TensorPtr t, bool trainable = true);
    TensorPtr get(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) != 0; }

    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<std::pair<std::string, TensorPtr>> trainable() const;
    std::int64_t trainable_count() const;
    std::int64_t total_count() const;
    void zero_grads();

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Fan-in-scaled uniform init: U(-sqrt(1/fan_in), +sqrt(1/fan_in)) times an
/// optional extra factor (SelfONN order-q kernels use 1/q!).
void init_uniform_fanin(Tensor& t, int fan_in, double extra_scale, Rng& rng);

} // namespace onnseg
