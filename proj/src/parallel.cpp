#include "stm/parallel.hpp"

#include <atomic>

namespace stm {
namespace {

int hardware_threads() {
    const auto n = static_cast<int>(std::thread::hardware_concurrency());
    return n > 0 ? n : 1;
}

std::atomic<int> g_thread_limit{hardware_threads()};

} // namespace

void set_thread_limit(int threads) { g_thread_limit = threads < 1 ? hardware_threads() : threads; }

int thread_limit() { return g_thread_limit.load(); }

} // namespace stm
