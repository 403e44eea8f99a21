#include "wigner2e/parallel.hpp"

#include <atomic>

#include "wigner2e/errors.hpp"

namespace wigner2e {

namespace {
std::atomic<int> g_workers{1};
}

void set_worker_count(int n) {
    if (n < 1) throw ValidationError("worker count must be >= 1");
    g_workers.store(n);
}

int worker_count() { return g_workers.load(); }

}  // namespace wigner2e
