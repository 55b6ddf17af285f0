#pragma once

// Independent equation-by-equation transcriptions of the two recurrent units,
// written directly over raw arrays with the naive ops. Deliberately separate
// from the library's tensor/graph machinery so the cells have a second,
// unrelated implementation to agree with.

#include <string>
#include <vector>

#include "plume/params.hpp"

#include "naive_ops.hpp"

namespace oracle {

template <typename T>
struct CellResult {
  std::vector<T> h, c, m, m2, delta_c, delta_m, delta_m2;
};

template <typename T>
struct CellProblem {
  int b = 1, cx = 1, ch = 1, rows = 1, cols = 1, k = 3;
  std::vector<T> x, h1, h2, c_prev, m_in, m2_in;
};

namespace detail {

template <typename T>
std::vector<T> conv_by_name(const CellProblem<T>& pr, const std::vector<T>& input,
                            int cin, const plume::ParameterSet<T>& params,
                            const std::string& name) {
  return conv2d(input, params.at(name).values(), pr.b, cin, pr.rows, pr.cols, pr.ch,
                pr.k, pr.k);
}

}  // namespace detail

template <typename T>
CellResult<T> st_lstm(const CellProblem<T>& pr, const plume::ParameterSet<T>& params,
                      const std::string& prefix) {
  auto cx = [&](const std::string& n) {
    return detail::conv_by_name(pr, pr.x, pr.cx, params, prefix + n);
  };
  auto ch_conv = [&](const std::vector<T>& input, const std::string& n) {
    return detail::conv_by_name(pr, input, pr.ch, params, prefix + n);
  };

  CellResult<T> r;
  const auto g = tanh(add(cx("w_xg"), ch_conv(pr.h1, "w_hg")));
  const auto i = sigmoid(add(cx("w_xi"), ch_conv(pr.h1, "w_hi")));
  const auto f = sigmoid(add(cx("w_xf"), ch_conv(pr.h1, "w_hf")));
  const auto gp = tanh(add(cx("w_xg_m"), ch_conv(pr.m_in, "w_mg")));
  const auto ip = sigmoid(add(cx("w_xi_m"), ch_conv(pr.m_in, "w_mi")));
  const auto fp = sigmoid(add(cx("w_xf_m"), ch_conv(pr.m_in, "w_mf")));

  r.delta_c = hadamard(i, g);
  r.c = add(hadamard(f, pr.c_prev), r.delta_c);
  r.delta_m = hadamard(ip, gp);
  r.m = add(hadamard(fp, pr.m_in), r.delta_m);

  const auto o = sigmoid(add(add(cx("w_xo"), ch_conv(pr.h1, "w_ho")),
                             add(ch_conv(r.c, "w_co"), ch_conv(r.m, "w_mo"))));
  const auto fused = concat_channels<T>({r.c, r.m}, {pr.ch, pr.ch}, pr.b, pr.rows, pr.cols);
  const auto mixed = conv2d(fused, params.at(prefix + "w_fuse").values(), pr.b, 2 * pr.ch,
                            pr.rows, pr.cols, pr.ch, 1, 1);
  r.h = hadamard(o, tanh(mixed));
  return r;
}

template <typename T>
CellResult<T> st_lstm_pp(const CellProblem<T>& pr, const plume::ParameterSet<T>& params,
                         const std::string& prefix) {
  auto cx = [&](const std::string& n) {
    return detail::conv_by_name(pr, pr.x, pr.cx, params, prefix + n);
  };
  auto ch_conv = [&](const std::vector<T>& input, const std::string& n) {
    return detail::conv_by_name(pr, input, pr.ch, params, prefix + n);
  };

  CellResult<T> r;
  const auto g = tanh(add(add(cx("w_xg"), ch_conv(pr.h1, "w_hg")),
                          ch_conv(pr.h2, "w_hg_lag")));
  const auto i = sigmoid(add(add(cx("w_xi"), ch_conv(pr.h1, "w_hi")),
                             ch_conv(pr.h2, "w_hi_lag")));
  const auto f = sigmoid(add(add(cx("w_xf"), ch_conv(pr.h1, "w_hf")),
                             ch_conv(pr.h2, "w_hf_lag")));
  r.delta_c = hadamard(i, g);
  r.c = add(hadamard(f, pr.c_prev), r.delta_c);

  const auto gp = tanh(add(cx("w_xg_m"), ch_conv(pr.m_in, "w_mg")));
  const auto ip = sigmoid(add(cx("w_xi_m"), ch_conv(pr.m_in, "w_mi")));
  const auto fp = sigmoid(add(cx("w_xf_m"), ch_conv(pr.m_in, "w_mf")));
  r.delta_m = hadamard(ip, gp);
  r.m = add(hadamard(fp, pr.m_in), r.delta_m);

  // the double-primed gates reuse the w_x*_m input kernels
  const auto gpp = tanh(add(cx("w_xg_m"), ch_conv(pr.m2_in, "w_m2g")));
  const auto ipp = sigmoid(add(cx("w_xi_m"), ch_conv(pr.m2_in, "w_m2i")));
  const auto fpp = sigmoid(add(cx("w_xf_m"), ch_conv(pr.m2_in, "w_m2f")));
  r.delta_m2 = hadamard(ipp, gpp);
  r.m2 = add(hadamard(fpp, pr.m2_in), r.delta_m2);

  const auto o = sigmoid(add(
      add(add(cx("w_xo"), ch_conv(pr.h1, "w_ho")), ch_conv(pr.h2, "w_ho_lag")),
      add(add(ch_conv(r.c, "w_co"), ch_conv(r.m, "w_mo")), ch_conv(r.m2, "w_m2o"))));
  const auto fused = concat_channels<T>({r.c, r.m, r.m2}, {pr.ch, pr.ch, pr.ch}, pr.b,
                                        pr.rows, pr.cols);
  const auto mixed = conv2d(fused, params.at(prefix + "w_fuse").values(), pr.b,
                            3 * pr.ch, pr.rows, pr.cols, pr.ch, 1, 1);
  r.h = hadamard(o, tanh(mixed));
  return r;
}

}  // namespace oracle
