#include "lateralis/parallel.hpp"

#include "lateralis/error.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace lateralis::parallel {

int thread_count() noexcept { return omp_get_max_threads(); }

void set_thread_count(int n) noexcept { omp_set_num_threads(n < 1 ? 1 : n); }

int apply_env_override() {
    if (const char* env = std::getenv("LATERALIS_THREADS"); env && *env) {
        char* end = nullptr;
        long n = std::strtol(env, &end, 10);
        if (*end != '\0' || n < 1 || n > 4096)
            throw Error(ErrorCode::config, "LATERALIS_THREADS must be a positive integer, got '" + std::string(env) + "'");
        set_thread_count(static_cast<int>(n));
    }
    return thread_count();
}

}  // namespace lateralis::parallel
