#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

#include "dpf/kernels.hpp"

namespace dpf::kernels {
namespace {

std::atomic<const Table*> g_active{nullptr};

const Table* resolve_auto() {
#if defined(__x86_64__) || defined(_M_X64)
  if (const char* env = std::getenv("DPF_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return &scalar_table();
    if (std::strcmp(env, "avx2") == 0) {
      if (!avx2_supported())
        throw std::runtime_error("DPF_KERNELS=avx2 but CPU lacks AVX2+FMA");
      return &avx2_table();
    }
    throw std::runtime_error(std::string("unknown DPF_KERNELS value: ") + env);
  }
  if (avx2_supported()) return &avx2_table();
#endif
  return &scalar_table();
}

}  // namespace

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Table& active() {
  const Table* t = g_active.load(std::memory_order_acquire);
  if (!t) {
    t = resolve_auto();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

void select(Impl impl) {
  switch (impl) {
    case Impl::Auto:
      g_active.store(resolve_auto(), std::memory_order_release);
      return;
    case Impl::Scalar:
      g_active.store(&scalar_table(), std::memory_order_release);
      return;
    case Impl::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      if (avx2_supported()) {
        g_active.store(&avx2_table(), std::memory_order_release);
        return;
      }
#endif
      throw std::runtime_error("AVX2 kernels not supported on this CPU");
  }
  throw std::runtime_error("invalid kernel implementation");
}

}  // namespace dpf::kernels
