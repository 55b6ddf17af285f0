#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace plume::kernels {

// Dense 2-D cross-correlation with zero same-padding on NCHW buffers.
// Kernel layout is [cout, cin, kh, kw] with kh, kw odd.
//
// The production kernels copy the source into a zero-rimmed scratch buffer so
// every inner loop runs full-width (out-of-range taps add an exact 0.0, which
// leaves values unchanged), and they split work over slices each written by a
// single thread. Per output element the taps accumulate in the same fixed
// (cin, ky, kx) order as the bounds-checked serial reference, so results are
// bit-identical to it for any thread count. Small problems skip the fork: on
// a busy machine the fork/join cost dwarfs sub-millisecond loops.

namespace detail {

constexpr std::size_t kConvParallelMacs = 2u * 1000 * 1000;

// [c, h, w] -> [c, h+2ph, w+2pw] with a zero rim.
template <typename T>
void pad_planes(const T* src, T* dst, int count, int h, int w, int ph, int pw) {
  const int hp = h + 2 * ph, wp = w + 2 * pw;
  std::fill(dst, dst + static_cast<std::ptrdiff_t>(count) * hp * wp, T(0));
  for (int c = 0; c < count; ++c)
    for (int y = 0; y < h; ++y)
      std::copy(src + (static_cast<std::ptrdiff_t>(c) * h + y) * w,
                src + (static_cast<std::ptrdiff_t>(c) * h + y) * w + w,
                dst + (static_cast<std::ptrdiff_t>(c) * hp + y + ph) * wp + pw);
}

// One input plane accumulated into one output plane, taps applied in
// ascending (ky, kx) order. Flip mirrors the read offsets (correlation with
// the spatially flipped kernel) while keeping the same tap order, so the
// per-element accumulation sequence always matches the reference kernels.
template <bool Flip, typename T>
void accumulate_plane(const T* padded, T* dst, const T* taps, int h, int w, int kh,
                      int kw) {
  const int wp = w + kw - 1;
  if (kh == 3 && kw == 3) {
    for (int y = 0; y < h; ++y) {
      const T* r0 = padded + static_cast<std::ptrdiff_t>(y) * wp;
      const T* r1 = r0 + wp;
      const T* r2 = r1 + wp;
      T* out = dst + static_cast<std::ptrdiff_t>(y) * w;
      if constexpr (!Flip) {
        for (int x = 0; x < w; ++x) {
          T acc = out[x];
          acc += taps[0] * r0[x];
          acc += taps[1] * r0[x + 1];
          acc += taps[2] * r0[x + 2];
          acc += taps[3] * r1[x];
          acc += taps[4] * r1[x + 1];
          acc += taps[5] * r1[x + 2];
          acc += taps[6] * r2[x];
          acc += taps[7] * r2[x + 1];
          acc += taps[8] * r2[x + 2];
          out[x] = acc;
        }
      } else {
        for (int x = 0; x < w; ++x) {
          T acc = out[x];
          acc += taps[0] * r2[x + 2];
          acc += taps[1] * r2[x + 1];
          acc += taps[2] * r2[x];
          acc += taps[3] * r1[x + 2];
          acc += taps[4] * r1[x + 1];
          acc += taps[5] * r1[x];
          acc += taps[6] * r0[x + 2];
          acc += taps[7] * r0[x + 1];
          acc += taps[8] * r0[x];
          out[x] = acc;
        }
      }
    }
    return;
  }
  for (int ky = 0; ky < kh; ++ky)
    for (int kx = 0; kx < kw; ++kx) {
      const T wgt = taps[ky * kw + kx];
      const int oy = Flip ? kh - 1 - ky : ky;
      const int ox = Flip ? kw - 1 - kx : kx;
      for (int y = 0; y < h; ++y) {
        const T* src = padded + (static_cast<std::ptrdiff_t>(y) + oy) * wp + ox;
        T* out = dst + static_cast<std::ptrdiff_t>(y) * w;
        for (int x = 0; x < w; ++x) out[x] += wgt * src[x];
      }
    }
}

inline bool parallel_worth_it(std::size_t macs, int slices) {
#ifdef _OPENMP
  return slices > 1 && macs >= kConvParallelMacs;
#else
  (void)macs;
  (void)slices;
  return false;
#endif
}

}  // namespace detail

template <typename T>
void conv2d_forward(const T* in, const T* ker, T* out, int b, int cin, int h,
                    int w, int cout, int kh, int kw) {
  const int ph = kh / 2, pw = kw / 2;
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
  const std::ptrdiff_t padded_plane = static_cast<std::ptrdiff_t>(h + 2 * ph) * (w + 2 * pw);
  std::fill(out, out + static_cast<std::ptrdiff_t>(b) * cout * plane, T(0));

  std::vector<T> padded(static_cast<std::size_t>(b) * cin * padded_plane);
  detail::pad_planes(in, padded.data(), b * cin, h, w, ph, pw);

  const std::size_t macs = static_cast<std::size_t>(b) * cout * cin * kh * kw * plane;
  const bool parallel = detail::parallel_worth_it(macs, b * cout);
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static) if (parallel)
#endif
  for (int bi = 0; bi < b; ++bi) {
    for (int co = 0; co < cout; ++co) {
      T* dst = out + (static_cast<std::ptrdiff_t>(bi) * cout + co) * plane;
      for (int ci = 0; ci < cin; ++ci)
        detail::accumulate_plane<false>(
            padded.data() + (static_cast<std::ptrdiff_t>(bi) * cin + ci) * padded_plane,
            dst, ker + (static_cast<std::ptrdiff_t>(co) * cin + ci) * kh * kw, h, w, kh, kw);
    }
  }
}

// Accumulates d(loss)/d(input) into gin (+=): a correlation of the padded
// upstream gradient with the spatially flipped kernel.
template <typename T>
void conv2d_grad_input(const T* gout, const T* ker, T* gin, int b, int cin,
                       int h, int w, int cout, int kh, int kw) {
  const int ph = kh / 2, pw = kw / 2;
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
  const std::ptrdiff_t padded_plane = static_cast<std::ptrdiff_t>(h + 2 * ph) * (w + 2 * pw);

  std::vector<T> padded(static_cast<std::size_t>(b) * cout * padded_plane);
  detail::pad_planes(gout, padded.data(), b * cout, h, w, ph, pw);

  const std::size_t macs = static_cast<std::size_t>(b) * cout * cin * kh * kw * plane;
  const bool parallel = detail::parallel_worth_it(macs, b * cin);
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static) if (parallel)
#endif
  for (int bi = 0; bi < b; ++bi) {
    for (int ci = 0; ci < cin; ++ci) {
      T* dst = gin + (static_cast<std::ptrdiff_t>(bi) * cin + ci) * plane;
      for (int co = 0; co < cout; ++co)
        detail::accumulate_plane<true>(
            padded.data() + (static_cast<std::ptrdiff_t>(bi) * cout + co) * padded_plane,
            dst, ker + (static_cast<std::ptrdiff_t>(co) * cin + ci) * kh * kw, h, w, kh, kw);
    }
  }
}

// Accumulates d(loss)/d(kernel) into gker (+=).
template <typename T>
void conv2d_grad_kernel(const T* gout, const T* in, T* gker, int b, int cin,
                        int h, int w, int cout, int kh, int kw) {
  const int ph = kh / 2, pw = kw / 2;
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
  const int wp = w + 2 * pw;
  const std::ptrdiff_t padded_plane = static_cast<std::ptrdiff_t>(h + 2 * ph) * wp;

  std::vector<T> padded(static_cast<std::size_t>(b) * cin * padded_plane);
  detail::pad_planes(in, padded.data(), b * cin, h, w, ph, pw);

  const std::size_t macs = static_cast<std::size_t>(b) * cout * cin * kh * kw * plane;
  const bool parallel = detail::parallel_worth_it(macs, cout * cin);
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static) if (parallel)
#endif
  for (int co = 0; co < cout; ++co) {
    for (int ci = 0; ci < cin; ++ci) {
      T* kslice = gker + (static_cast<std::ptrdiff_t>(co) * cin + ci) * kh * kw;
      if (kh == 3 && kw == 3) {
        // nine independent accumulator chains in one sweep
        T a0 = 0, a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0, a6 = 0, a7 = 0, a8 = 0;
        for (int bi = 0; bi < b; ++bi) {
          const T* grow0 = gout + (static_cast<std::ptrdiff_t>(bi) * cout + co) * plane;
          const T* prow0 = padded.data() +
                           (static_cast<std::ptrdiff_t>(bi) * cin + ci) * padded_plane;
          for (int y = 0; y < h; ++y) {
            const T* grow = grow0 + static_cast<std::ptrdiff_t>(y) * w;
            const T* r0 = prow0 + static_cast<std::ptrdiff_t>(y) * wp;
            const T* r1 = r0 + wp;
            const T* r2 = r1 + wp;
            for (int x = 0; x < w; ++x) {
              const T g = grow[x];
              a0 += g * r0[x];
              a1 += g * r0[x + 1];
              a2 += g * r0[x + 2];
              a3 += g * r1[x];
              a4 += g * r1[x + 1];
              a5 += g * r1[x + 2];
              a6 += g * r2[x];
              a7 += g * r2[x + 1];
              a8 += g * r2[x + 2];
            }
          }
        }
        kslice[0] += a0;
        kslice[1] += a1;
        kslice[2] += a2;
        kslice[3] += a3;
        kslice[4] += a4;
        kslice[5] += a5;
        kslice[6] += a6;
        kslice[7] += a7;
        kslice[8] += a8;
        continue;
      }
      for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx) {
          T acc = T(0);
          for (int bi = 0; bi < b; ++bi) {
            const T* grow0 = gout + (static_cast<std::ptrdiff_t>(bi) * cout + co) * plane;
            const T* prow0 = padded.data() +
                             (static_cast<std::ptrdiff_t>(bi) * cin + ci) * padded_plane;
            for (int y = 0; y < h; ++y) {
              const T* grow = grow0 + static_cast<std::ptrdiff_t>(y) * w;
              const T* srow = prow0 + (static_cast<std::ptrdiff_t>(y) + ky) * wp + kx;
              for (int x = 0; x < w; ++x) acc += grow[x] * srow[x];
            }
          }
          kslice[ky * kw + kx] += acc;
        }
    }
  }
}

// Serial reference kernels. Straightforward bounds-checked loops, kept as the
// comparison baseline for the production kernels and used directly by tests.
namespace reference {

template <typename T>
void conv2d_forward(const T* in, const T* ker, T* out, int b, int cin, int h,
                    int w, int cout, int kh, int kw) {
  const int ph = kh / 2, pw = kw / 2;
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
  std::fill(out, out + static_cast<std::ptrdiff_t>(b) * cout * plane, T(0));
  for (int bi = 0; bi < b; ++bi)
    for (int co = 0; co < cout; ++co)
      for (int ci = 0; ci < cin; ++ci)
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx) {
            const T wgt = ker[((static_cast<std::ptrdiff_t>(co) * cin + ci) * kh + ky) * kw + kx];
            for (int y = 0; y < h; ++y) {
              const int yy = y + ky - ph;
              if (yy < 0 || yy >= h) continue;
              for (int x = 0; x < w; ++x) {
                const int xx = x + kx - pw;
                if (xx < 0 || xx >= w) continue;
                out[(static_cast<std::ptrdiff_t>(bi) * cout + co) * plane + y * w + x] +=
                    wgt * in[(static_cast<std::ptrdiff_t>(bi) * cin + ci) * plane + yy * w + xx];
              }
            }
          }
}

template <typename T>
void conv2d_grad_input(const T* gout, const T* ker, T* gin, int b, int cin,
                       int h, int w, int cout, int kh, int kw) {
  const int ph = kh / 2, pw = kw / 2;
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
  for (int bi = 0; bi < b; ++bi)
    for (int ci = 0; ci < cin; ++ci)
      for (int co = 0; co < cout; ++co)
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx) {
            const T wgt = ker[((static_cast<std::ptrdiff_t>(co) * cin + ci) * kh + ky) * kw + kx];
            for (int y = 0; y < h; ++y) {
              const int yy = y - (ky - ph);
              if (yy < 0 || yy >= h) continue;
              for (int x = 0; x < w; ++x) {
                const int xx = x - (kx - pw);
                if (xx < 0 || xx >= w) continue;
                gin[(static_cast<std::ptrdiff_t>(bi) * cin + ci) * plane + y * w + x] +=
                    wgt * gout[(static_cast<std::ptrdiff_t>(bi) * cout + co) * plane + yy * w + xx];
              }
            }
          }
}

template <typename T>
void conv2d_grad_kernel(const T* gout, const T* in, T* gker, int b, int cin,
                        int h, int w, int cout, int kh, int kw) {
  const int ph = kh / 2, pw = kw / 2;
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(h) * w;
  for (int co = 0; co < cout; ++co)
    for (int ci = 0; ci < cin; ++ci)
      for (int ky = 0; ky < kh; ++ky)
        for (int kx = 0; kx < kw; ++kx) {
          T acc = T(0);
          for (int bi = 0; bi < b; ++bi)
            for (int y = 0; y < h; ++y) {
              const int yy = y + ky - ph;
              if (yy < 0 || yy >= h) continue;
              for (int x = 0; x < w; ++x) {
                const int xx = x + kx - pw;
                if (xx < 0 || xx >= w) continue;
                acc += gout[(static_cast<std::ptrdiff_t>(bi) * cout + co) * plane + y * w + x] *
                       in[(static_cast<std::ptrdiff_t>(bi) * cin + ci) * plane + yy * w + xx];
              }
            }
          gker[((static_cast<std::ptrdiff_t>(co) * cin + ci) * kh + ky) * kw + kx] += acc;
        }
}

}  // namespace reference

}  // namespace plume::kernels
