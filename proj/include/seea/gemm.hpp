#pragma once

#include <cstddef>

namespace seea {

// Row-major matrix products used by the im2col convolution path. All three
// accumulate over k in strictly ascending order for every output element, so
// results are bitwise deterministic and independent of blocking and thread
// count.

/// C[M,N] = (accumulate ? C : 0) + A[M,K] * B[K,N]
template <typename T>
void gemm_nn(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate);

/// C[M,N] = (accumulate ? C : 0) + A[M,K] * Bt[N,K]^T   (dot-product form)
template <typename T>
void gemm_nt(int M, int N, int K, const T* A, const T* Bt, T* C, bool accumulate);

/// C[M,N] = (accumulate ? C : 0) + At[K,M]^T * B[K,N]
template <typename T>
void gemm_tn(int M, int N, int K, const T* At, const T* B, T* C, bool accumulate);

/// Number of worker threads the compute kernels may use. Reads SEEA_THREADS
/// once; defaults to the hardware concurrency.
int compute_threads();
void set_compute_threads(int n);

}  // namespace seea
