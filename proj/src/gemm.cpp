#include "seea/gemm.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <cstring>
#include <thread>

namespace seea {

namespace {
std::atomic<int> g_threads{0};

int detect_threads() {
  if (const char* env = std::getenv("SEEA_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}
}  // namespace

int compute_threads() {
  int n = g_threads.load(std::memory_order_relaxed);
  if (n == 0) {
    n = detect_threads();
    g_threads.store(n, std::memory_order_relaxed);
  }
  return n;
}

void set_compute_threads(int n) { g_threads.store(n > 0 ? n : 1, std::memory_order_relaxed); }

namespace {
constexpr int kColBlock = 512;  // N-tile, elements
constexpr int kKBlock = 256;    // K-tile
}  // namespace

template <typename T>
void gemm_nn(int M, int N, int K, const T* A, const T* B, T* C, bool accumulate) {
  if (!accumulate) {
    std::memset(C, 0, static_cast<size_t>(M) * N * sizeof(T));
  }
  const int nthreads = std::min(compute_threads(), std::max(1, N / kColBlock + 1));
#pragma omp parallel for schedule(static) num_threads(nthreads)
  for (int j0 = 0; j0 < N; j0 += kColBlock) {
    const int j1 = std::min(j0 + kColBlock, N);
    for (int k0 = 0; k0 < K; k0 += kKBlock) {
      const int k1 = std::min(k0 + kKBlock, K);
      for (int i = 0; i < M; ++i) {
        T* __restrict c = C + static_cast<size_t>(i) * N;
        const T* __restrict a = A + static_cast<size_t>(i) * K;
        for (int k = k0; k < k1; ++k) {
          const T av = a[k];
          const T* __restrict b = B + static_cast<size_t>(k) * N;
          for (int j = j0; j < j1; ++j) {
            c[j] += av * b[j];
          }
        }
      }
    }
  }
}

template <typename T>
void gemm_nt(int M, int N, int K, const T* A, const T* Bt, T* C, bool accumulate) {
  const int nthreads = std::min(compute_threads(), std::max(1, M));
#pragma omp parallel for schedule(static) num_threads(nthreads)
  for (int i = 0; i < M; ++i) {
    const T* __restrict a = A + static_cast<size_t>(i) * K;
    T* __restrict c = C + static_cast<size_t>(i) * N;
    for (int j = 0; j < N; ++j) {
      const T* __restrict b = Bt + static_cast<size_t>(j) * K;
      // Eight independent accumulator lanes keep the reduction vectorizable
      // while the combination order stays fixed.
      T lane[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
      int k = 0;
      for (; k + 8 <= K; k += 8) {
        for (int l = 0; l < 8; ++l) lane[l] += a[k + l] * b[k + l];
      }
      T acc = ((lane[0] + lane[1]) + (lane[2] + lane[3])) +
              ((lane[4] + lane[5]) + (lane[6] + lane[7]));
      for (; k < K; ++k) acc += a[k] * b[k];
      c[j] = accumulate ? c[j] + acc : acc;
    }
  }
}

template <typename T>
void gemm_tn(int M, int N, int K, const T* At, const T* B, T* C, bool accumulate) {
  if (!accumulate) {
    std::memset(C, 0, static_cast<size_t>(M) * N * sizeof(T));
  }
  const int nthreads = std::min(compute_threads(), std::max(1, M / 8 + 1));
#pragma omp parallel for schedule(static) num_threads(nthreads)
  for (int i = 0; i < M; ++i) {
    T* __restrict c = C + static_cast<size_t>(i) * N;
    for (int k = 0; k < K; ++k) {
      const T av = At[static_cast<size_t>(k) * M + i];
      const T* __restrict b = B + static_cast<size_t>(k) * N;
      for (int j = 0; j < N; ++j) {
        c[j] += av * b[j];
      }
    }
  }
}

template void gemm_nn<float>(int, int, int, const float*, const float*, float*, bool);
template void gemm_nn<double>(int, int, int, const double*, const double*, double*, bool);
template void gemm_nt<float>(int, int, int, const float*, const float*, float*, bool);
template void gemm_nt<double>(int, int, int, const double*, const double*, double*, bool);
template void gemm_tn<float>(int, int, int, const float*, const float*, float*, bool);
template void gemm_tn<double>(int, int, int, const double*, const double*, double*, bool);

}  // namespace seea
