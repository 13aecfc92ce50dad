#pragma once

// Index sweeps over independent cases. The OpenMP variant and the serial
// reference must produce identical result vectors for a pure `fn`.

#include <cstddef>
#include <type_traits>
#include <vector>

namespace hybridsim {

template <class Fn>
using SweepResult = std::invoke_result_t<Fn&, std::size_t>;

template <class Fn>
std::vector<SweepResult<Fn>> sweep_serial(std::size_t n, Fn&& fn) {
    std::vector<SweepResult<Fn>> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
}

template <class Fn>
std::vector<SweepResult<Fn>> sweep(std::size_t n, Fn&& fn) {
    // vector<bool> packs bits and is not safe to write concurrently.
    static_assert(!std::is_same_v<SweepResult<Fn>, bool>, "return an int or a struct, not bool");
    std::vector<SweepResult<Fn>> out(n);
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 16)
    for (long long i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    return out;
}

}  // namespace hybridsim
