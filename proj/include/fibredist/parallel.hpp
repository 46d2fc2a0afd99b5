#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fibredist {

// Execution backend for the data-parallel kernels. The serial path is the
// reference; every kernel must give bit-identical results under both.
enum class Backend { serial, openmp };

inline constexpr Backend kDefaultBackend = Backend::openmp;

namespace parallel {

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

// Calls fn(i) for i in [0, n). Each index must write only to its own slot.
// The first exception thrown by any iteration is rethrown after the loop.
template <typename Fn>
void for_each_index(Backend backend, std::size_t n, Fn&& fn) {
    if (backend == Backend::serial || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < count; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace parallel
}  // namespace fibredist
