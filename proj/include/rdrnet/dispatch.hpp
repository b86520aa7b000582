#pragma once

#include <string_view>

namespace rdrnet {

// Kernel families. Scalar is the reference loop nest; SIMD variants reproduce its
// per-element accumulation order exactly, so outputs are bit-identical.
enum class Isa { Scalar, Avx2 };

const char* isa_name(Isa isa);

// Best ISA supported by both the build and the running CPU.
Isa detected_isa();

// Effective ISA: override if set, else RDRNET_ISA env ("scalar"/"avx2"), else detected.
Isa active_isa();

// Throws ContractError if `isa` is unavailable on this machine.
void set_isa_override(Isa isa);
void clear_isa_override();

class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa);
  ~ScopedIsa();
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  bool had_override_;
  Isa previous_;
};

// Intra-op thread count; defaults to RDRNET_THREADS or 1.
int num_threads();
void set_num_threads(int n);

}  // namespace rdrnet
