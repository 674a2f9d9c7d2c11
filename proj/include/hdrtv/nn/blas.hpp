#pragma once
#include <dlfcn.h>
#include <stdlib.h>

#include "hdrtv/error.hpp"

namespace hdrtv::nn {

namespace detail {

// Standard CBLAS ABI constants; the library is loaded by soname below.
enum { kRowMajor = 101, kNoTrans = 111, kTrans = 112 };

struct BlasApi {
  void (*sgemm)(int order, int ta, int tb, int m, int n, int k, float alpha, const float* a,
                int lda, const float* b, int ldb, float beta, float* c, int ldc);
  void (*dgemm)(int order, int ta, int tb, int m, int n, int k, double alpha, const double* a,
                int lda, const double* b, int ldb, double beta, double* c, int ldc);
};

// The BLAS is loaded at first use rather than linked, for two reasons. Its
// runtime kernel detection reads cpu model ids that virtual machines often
// mask, silently landing on the plain SSE2 kernels (several times slower);
// deferring the load lets us pick the widest level the cpu actually reports
// before the library's own init runs. And the math must be single threaded:
// with a fixed seed a training step is bitwise reproducible on one machine,
// which a thread pool would break. An explicit OPENBLAS_CORETYPE in the
// environment wins over the probe.
inline const BlasApi& blas() {
  static const BlasApi api = [] {
    if (__builtin_cpu_supports("avx512f"))
      setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 0);
    else if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
      setenv("OPENBLAS_CORETYPE", "HASWELL", 0);
    void* h = dlopen("libopenblas.so.0", RTLD_NOW | RTLD_LOCAL);
    if (!h) fail(Errc::io, "cannot load libopenblas.so.0");
    BlasApi a;
    a.sgemm = reinterpret_cast<decltype(a.sgemm)>(dlsym(h, "cblas_sgemm"));
    a.dgemm = reinterpret_cast<decltype(a.dgemm)>(dlsym(h, "cblas_dgemm"));
    auto set_threads = reinterpret_cast<void (*)(int)>(dlsym(h, "openblas_set_num_threads"));
    if (!a.sgemm || !a.dgemm || !set_threads)
      fail(Errc::io, "libopenblas.so.0 is missing cblas symbols");
    set_threads(1);
    return a;
  }();
  return api;
}

}  // namespace detail

// C[m x n] (+)= A[m x k] * B[k x n], row major. ta/tb transpose the operands.
inline void gemm(bool ta, bool tb, int m, int n, int k, float alpha, const float* a,
                 int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  detail::blas().sgemm(detail::kRowMajor, ta ? detail::kTrans : detail::kNoTrans,
                       tb ? detail::kTrans : detail::kNoTrans, m, n, k, alpha, a, lda, b, ldb,
                       beta, c, ldc);
}
inline void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a,
                 int lda, const double* b, int ldb, double beta, double* c, int ldc) {
  detail::blas().dgemm(detail::kRowMajor, ta ? detail::kTrans : detail::kNoTrans,
                       tb ? detail::kTrans : detail::kNoTrans, m, n, k, alpha, a, lda, b, ldb,
                       beta, c, ldc);
}

}  // namespace hdrtv::nn
