#include "sdbli/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace sdbli::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(SDBLI_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

struct Selection {
  const Ops* ops;
  std::string name;
};

Selection select() {
  const char* req = std::getenv("SDBLI_KERNELS");
  std::string want = req ? req : "auto";
  if (want == "scalar") return {&scalar::ops, "scalar"};
#if defined(SDBLI_HAVE_AVX2)
  if (want == "avx2") {
    if (!cpu_has_avx2())
      throw std::runtime_error("SDBLI_KERNELS=avx2 but CPU lacks AVX2/FMA");
    return {&avx2::ops, "avx2"};
  }
  if (want == "auto" && cpu_has_avx2()) return {&avx2::ops, "avx2"};
#else
  if (want == "avx2")
    throw std::runtime_error("SDBLI_KERNELS=avx2 but this build has no AVX2 kernels");
#endif
  if (want != "auto" && want != "scalar" && want != "avx2")
    throw std::runtime_error("unknown SDBLI_KERNELS value: " + want);
  return {&scalar::ops, "scalar"};
}

const Selection& selection() {
  static const Selection s = select();
  return s;
}

}  // namespace

const Ops& active() { return *selection().ops; }

const std::string& active_name() { return selection().name; }

bool avx2_available() { return cpu_has_avx2(); }

}  // namespace sdbli::kernels
