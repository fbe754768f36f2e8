// Copyright 2026 The LightDense Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#if defined(__SSE2__)
#include <emmintrin.h>
#endif

namespace lightdense::detail {

// C[M x N] = A[M x K] * B[K x N], all row-major with tight strides.
//
// Every output element is accumulated from zero in ascending k order, so the
// result is independent of the blocking below. Callers rely on this to get
// bitwise-equal results from differently organized convolution paths.
template <typename Acc, typename TA, typename TB>
void gemm(int M, int N, int K, const TA* A, const TB* B, Acc* C) {
  constexpr int MR = 4;
  constexpr int NR = 8;
  if (M <= 0 || N <= 0) return;
  if (K <= 0) {
    std::fill(C, C + static_cast<std::size_t>(M) * N, Acc{0});
    return;
  }
  const int m_blocks = (M + MR - 1) / MR;
  std::vector<Acc> a_pack(static_cast<std::size_t>(m_blocks) * K * MR);
  for (int mb = 0; mb < m_blocks; ++mb) {
    Acc* dst = a_pack.data() + static_cast<std::size_t>(mb) * K * MR;
    for (int k = 0; k < K; ++k) {
      for (int i = 0; i < MR; ++i) {
        const int m = mb * MR + i;
        dst[k * MR + i] = m < M ? static_cast<Acc>(A[static_cast<std::size_t>(m) * K + k]) : Acc{0};
      }
    }
  }
  std::vector<Acc> b_pack(static_cast<std::size_t>(K) * NR);
  for (int p0 = 0; p0 < N; p0 += NR) {
    const int pn = std::min(NR, N - p0);
    for (int k = 0; k < K; ++k) {
      const TB* src = B + static_cast<std::size_t>(k) * N + p0;
      Acc* dst = b_pack.data() + static_cast<std::size_t>(k) * NR;
      for (int j = 0; j < NR; ++j) dst[j] = j < pn ? static_cast<Acc>(src[j]) : Acc{0};
    }
    for (int mb = 0; mb < m_blocks; ++mb) {
      Acc acc[MR][NR] = {};
      const Acc* a = a_pack.data() + static_cast<std::size_t>(mb) * K * MR;
      const Acc* b = b_pack.data();
      for (int k = 0; k < K; ++k) {
        for (int i = 0; i < MR; ++i) {
          const Acc av = a[k * MR + i];
          for (int j = 0; j < NR; ++j) acc[i][j] += av * b[k * NR + j];
        }
      }
      for (int i = 0; i < MR; ++i) {
        const int m = mb * MR + i;
        if (m >= M) break;
        Acc* out = C + static_cast<std::size_t>(m) * N + p0;
        for (int j = 0; j < pn; ++j) out[j] = acc[i][j];
      }
    }
  }
}

// Integer C[M x N] = A[M x K] * B[K x N] with int16 operands and int32
// accumulation. Exact, so the summation order is free; k is consumed in pairs
// (pmaddwd). Products must fit the int32 range after pairing, which holds for
// int8 weights times 9-bit activations.
inline void gemm_s16(int M, int N, int K, const std::int16_t* A, const std::int16_t* B, std::int32_t* C) {
  constexpr int MR = 4;
  constexpr int NR = 8;
  if (M <= 0 || N <= 0) return;
  const int KP = (K + 1) / 2;
  // A packed per row as int32 words holding (a[k], a[k+1]); rows padded to MR.
  const int MP = (M + MR - 1) / MR * MR;
  std::vector<std::int32_t> a_pack(static_cast<std::size_t>(MP) * KP, 0);
  for (int m = 0; m < M; ++m) {
    const std::int16_t* src = A + static_cast<std::size_t>(m) * K;
    for (int kp = 0; kp < KP; ++kp) {
      const std::int16_t lo = src[2 * kp];
      const std::int16_t hi = 2 * kp + 1 < K ? src[2 * kp + 1] : std::int16_t{0};
      a_pack[static_cast<std::size_t>(m) * KP + kp] =
          static_cast<std::int32_t>(static_cast<std::uint32_t>(static_cast<std::uint16_t>(lo)) |
                                    (static_cast<std::uint32_t>(static_cast<std::uint16_t>(hi)) << 16));
    }
  }
  // B packed per column block as [kp][j][2].
  std::vector<std::int16_t> b_pack(static_cast<std::size_t>(KP) * NR * 2);
  for (int p0 = 0; p0 < N; p0 += NR) {
    const int pn = std::min(NR, N - p0);
    for (int kp = 0; kp < KP; ++kp) {
      std::int16_t* dst = b_pack.data() + static_cast<std::size_t>(kp) * NR * 2;
      for (int j = 0; j < NR; ++j) {
        for (int t = 0; t < 2; ++t) {
          const int k = 2 * kp + t;
          dst[2 * j + t] = (j < pn && k < K) ? B[static_cast<std::size_t>(k) * N + p0 + j] : std::int16_t{0};
        }
      }
    }
    for (int m0 = 0; m0 < M; m0 += MR) {
      const int mn = std::min(MR, M - m0);
      alignas(16) std::int32_t acc[MR][NR] = {};
#if defined(__SSE2__)
      __m128i v[MR][2];
      for (int i = 0; i < MR; ++i) v[i][0] = v[i][1] = _mm_setzero_si128();
      for (int kp = 0; kp < KP; ++kp) {
        const auto* bp = reinterpret_cast<const __m128i*>(b_pack.data() + static_cast<std::size_t>(kp) * NR * 2);
        const __m128i b0 = _mm_loadu_si128(bp);
        const __m128i b1 = _mm_loadu_si128(bp + 1);
        for (int i = 0; i < MR; ++i) {
          const __m128i a = _mm_set1_epi32(a_pack[static_cast<std::size_t>(m0 + i) * KP + kp]);
          v[i][0] = _mm_add_epi32(v[i][0], _mm_madd_epi16(a, b0));
          v[i][1] = _mm_add_epi32(v[i][1], _mm_madd_epi16(a, b1));
        }
      }
      for (int i = 0; i < MR; ++i) {
        _mm_store_si128(reinterpret_cast<__m128i*>(acc[i]), v[i][0]);
        _mm_store_si128(reinterpret_cast<__m128i*>(acc[i] + 4), v[i][1]);
      }
#else
      for (int kp = 0; kp < KP; ++kp) {
        const std::int16_t* bp = b_pack.data() + static_cast<std::size_t>(kp) * NR * 2;
        for (int i = 0; i < mn; ++i) {
          const std::int32_t w = a_pack[static_cast<std::size_t>(m0 + i) * KP + kp];
          const auto a0 = static_cast<std::int16_t>(w & 0xffff);
          const auto a1 = static_cast<std::int16_t>((w >> 16) & 0xffff);
          for (int j = 0; j < NR; ++j) acc[i][j] += a0 * bp[2 * j] + a1 * bp[2 * j + 1];
        }
      }
#endif
      for (int i = 0; i < mn; ++i) {
        std::int32_t* out = C + static_cast<std::size_t>(m0 + i) * N + p0;
        for (int j = 0; j < pn; ++j) out[j] = acc[i][j];
      }
    }
  }
}

}  // namespace lightdense::detail
