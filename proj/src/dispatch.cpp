#include "rdrnet/dispatch.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "rdrnet/error.hpp"

namespace rdrnet {
namespace {

std::atomic<int> g_override{-1};
std::atomic<int> g_threads{0};

bool cpu_has_avx2() {
#if defined(RDRNET_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

bool available(Isa isa) { return isa == Isa::Scalar || (isa == Isa::Avx2 && cpu_has_avx2()); }

}  // namespace

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa detected_isa() { return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar; }

Isa active_isa() {
  const int o = g_override.load(std::memory_order_relaxed);
  if (o >= 0) return static_cast<Isa>(o);
  static const Isa from_env = [] {
    const char* env = std::getenv("RDRNET_ISA");
    if (env && std::string(env) == "scalar") return Isa::Scalar;
    return detected_isa();
  }();
  return from_env;
}

void set_isa_override(Isa isa) {
  if (!available(isa)) throw ContractError(std::string("ISA not available: ") + isa_name(isa));
  g_override.store(static_cast<int>(isa));
}

void clear_isa_override() { g_override.store(-1); }

ScopedIsa::ScopedIsa(Isa isa) : had_override_(g_override.load() >= 0), previous_(active_isa()) {
  set_isa_override(isa);
}

ScopedIsa::~ScopedIsa() {
  if (had_override_)
    g_override.store(static_cast<int>(previous_));
  else
    clear_isa_override();
}

int num_threads() {
  int n = g_threads.load(std::memory_order_relaxed);
  if (n > 0) return n;
  static const int from_env = [] {
    const char* env = std::getenv("RDRNET_THREADS");
    const int v = env ? std::atoi(env) : 0;
    return v > 0 ? v : 1;
  }();
  return from_env;
}

void set_num_threads(int n) { g_threads.store(n > 0 ? n : 0); }

}  // namespace rdrnet
