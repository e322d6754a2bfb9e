#pragma once

#include <omp.h>

namespace onnseg::kern {

template <typename Fn>
void parallel_for(std::int64_t count, Fn&& fn) {
    if (engine() == Engine::OpenMP && count > 1) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < count; ++i)
            fn(i);
    } else {
        for (std::int64_t i = 0; i < count; ++i)
            fn(i);
    }
}

} // namespace onnseg::kern
