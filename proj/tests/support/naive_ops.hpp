#pragma once

// Test-only scalar-loop implementations, independent of the library's kernel
// and graph code. These are the oracles the production paths are checked
// against; keep them dumb.

#include <cmath>
#include <vector>

namespace oracle {

// Same-padded cross-correlation, one element at a time.
template <typename T>
std::vector<T> conv2d(const std::vector<T>& in, const std::vector<T>& ker, int b,
                      int cin, int h, int w, int cout, int kh, int kw) {
  std::vector<T> out(static_cast<std::size_t>(b) * cout * h * w, T(0));
  const int ph = kh / 2, pw = kw / 2;
  for (int bi = 0; bi < b; ++bi)
    for (int co = 0; co < cout; ++co)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          T acc = T(0);
          for (int ci = 0; ci < cin; ++ci)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int yy = y + ky - ph;
                const int xx = x + kx - pw;
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                acc += in[((static_cast<std::size_t>(bi) * cin + ci) * h + yy) * w + xx] *
                       ker[((static_cast<std::size_t>(co) * cin + ci) * kh + ky) * kw + kx];
              }
          out[((static_cast<std::size_t>(bi) * cout + co) * h + y) * w + x] = acc;
        }
  return out;
}

template <typename T>
std::vector<T> sigmoid(std::vector<T> v) {
  for (T& x : v) x = T(1) / (T(1) + std::exp(-x));
  return v;
}

template <typename T>
std::vector<T> tanh(std::vector<T> v) {
  for (T& x : v) x = std::tanh(x);
  return v;
}

template <typename T>
std::vector<T> add(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
std::vector<T> hadamard(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

template <typename T>
std::vector<T> concat_channels(const std::vector<std::vector<T>>& parts,
                               const std::vector<int>& channels, int b, int h, int w) {
  int total = 0;
  for (int c : channels) total += c;
  std::vector<T> out(static_cast<std::size_t>(b) * total * h * w);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  int off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (int bi = 0; bi < b; ++bi)
      for (int ci = 0; ci < channels[p]; ++ci)
        for (std::size_t i = 0; i < plane; ++i)
          out[((static_cast<std::size_t>(bi) * total + off + ci) * plane) + i] =
              parts[p][((static_cast<std::size_t>(bi) * channels[p] + ci) * plane) + i];
    off += channels[p];
  }
  return out;
}

}  // namespace oracle
