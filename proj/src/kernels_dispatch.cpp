#include <cstdlib>
#include <stdexcept>
#include <string>

#include "blbf/kernels.hpp"

namespace blbf::kern {

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

namespace {

const KernelTable* pick_default() {
    if (const char* env = std::getenv("BLBF_KERNELS")) {
        std::string want(env);
        if (want == "scalar") return &kScalar;
#if defined(__x86_64__) || defined(_M_X64)
        if (want == "avx2" && avx2_available()) return &kAvx2;
#endif
    }
#if defined(__x86_64__) || defined(_M_X64)
    if (avx2_available()) return &kAvx2;
#endif
    return &kScalar;
}

const KernelTable*& current() {
    static const KernelTable* table = pick_default();
    return table;
}

}  // namespace

const KernelTable& active() { return *current(); }

void force_impl(const std::string& name) {
    if (name == "scalar") {
        current() = &kScalar;
        return;
    }
#if defined(__x86_64__) || defined(_M_X64)
    if (name == "avx2") {
        if (!avx2_available()) throw std::runtime_error("avx2 not supported on this CPU");
        current() = &kAvx2;
        return;
    }
#endif
    throw std::runtime_error("unknown kernel implementation: " + name);
}

}  // namespace blbf::kern
