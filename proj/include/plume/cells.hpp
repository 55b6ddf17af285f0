#pragma once

#include <string>

#include "plume/params.hpp"
#include "plume/tensor.hpp"

namespace plume::cells {

struct CellOptions {
  bool use_bias = false;
  // The first-order (primed) and second-order (double-primed) spatiotemporal
  // gate sets reuse the same input-convolution kernels by default; set false
  // to give the second-order set its own w_x*_m2 kernels.
  bool share_m_input_kernels = true;
};

// States feeding one cell invocation. h2 and m2_in are only consulted by the
// second-order cell; the baseline cell ignores them.
template <typename T>
struct CellInputs {
  Tensor<T> x;       // current observation or lower-layer hidden state
  Tensor<T> h1;      // hidden state from the previous step
  Tensor<T> h2;      // hidden state from two steps back
  Tensor<T> c_prev;  // temporal memory from the previous step
  Tensor<T> m_in;    // first-order spatiotemporal memory (zigzag)
  Tensor<T> m2_in;   // second-order spatiotemporal memory (zigzag)
};

template <typename T>
struct CellOutputs {
  Tensor<T> h, c, m, m2;
  // Memory-update increments, retained for the decoupling loss. Each is the
  // exact i*g product used to build the corresponding memory above.
  Tensor<T> delta_c, delta_m, delta_m2;
};

namespace detail {

template <typename T>
void check_state_shapes(const CellInputs<T>& in, bool second_order) {
  plume::detail::check_rank4(in.x, "cell x");
  plume::detail::check_rank4(in.h1, "cell h1");
  plume::detail::check_rank4(in.c_prev, "cell c_prev");
  plume::detail::check_rank4(in.m_in, "cell m_in");
  const auto& hs = in.h1.shape();
  auto same = [&](const Tensor<T>& t, const char* what) {
    if (t.shape() != hs)
      throw ShapeError(std::string("cell ") + what + " shape " + shape_str(t.shape()) +
                       " does not match h1 " + shape_str(hs));
  };
  same(in.c_prev, "c_prev");
  same(in.m_in, "m_in");
  if (in.x.dim(0) != hs[0] || in.x.dim(2) != hs[2] || in.x.dim(3) != hs[3])
    throw ShapeError("cell x " + shape_str(in.x.shape()) +
                     " does not share batch/extent with states " + shape_str(hs));
  if (second_order) {
    if (!in.h2.defined() || !in.m2_in.defined())
      throw ContractError("second-order cell requires h2 and m2_in");
    same(in.h2, "h2");
    same(in.m2_in, "m2_in");
  }
}

template <typename T>
Tensor<T> gate_pre(const ParameterSet<T>& p, const std::string& prefix,
                   const CellOptions& opt, const std::string& bias_name,
                   Tensor<T> pre) {
  if (opt.use_bias) return add_bias(pre, p.at(prefix + bias_name));
  return pre;
}

}  // namespace detail

// Baseline spatiotemporal recurrent unit. Gate group (g,i,f) over the input
// and previous hidden state updates the temporal memory; the primed group
// (g',i',f') over the input and incoming zigzag memory updates the
// spatiotemporal memory; the output gate fuses everything and the hidden
// state reads both memories through a 1x1 fusion convolution.
template <typename T>
CellOutputs<T> st_lstm_forward(const CellInputs<T>& in, const ParameterSet<T>& p,
                               const std::string& prefix, const CellOptions& opt = {}) {
  detail::check_state_shapes(in, false);

  auto g = tanh(detail::gate_pre(p, prefix, opt, "b_g",
      add(conv2d(in.x, p.at(prefix + "w_xg")), conv2d(in.h1, p.at(prefix + "w_hg")))));
  auto i = sigmoid(detail::gate_pre(p, prefix, opt, "b_i",
      add(conv2d(in.x, p.at(prefix + "w_xi")), conv2d(in.h1, p.at(prefix + "w_hi")))));
  auto f = sigmoid(detail::gate_pre(p, prefix, opt, "b_f",
      add(conv2d(in.x, p.at(prefix + "w_xf")), conv2d(in.h1, p.at(prefix + "w_hf")))));

  auto delta_c = hadamard(i, g);
  auto c = add(hadamard(f, in.c_prev), delta_c);

  auto gm = tanh(detail::gate_pre(p, prefix, opt, "b_gm",
      add(conv2d(in.x, p.at(prefix + "w_xg_m")), conv2d(in.m_in, p.at(prefix + "w_mg")))));
  auto im = sigmoid(detail::gate_pre(p, prefix, opt, "b_im",
      add(conv2d(in.x, p.at(prefix + "w_xi_m")), conv2d(in.m_in, p.at(prefix + "w_mi")))));
  auto fm = sigmoid(detail::gate_pre(p, prefix, opt, "b_fm",
      add(conv2d(in.x, p.at(prefix + "w_xf_m")), conv2d(in.m_in, p.at(prefix + "w_mf")))));

  auto delta_m = hadamard(im, gm);
  auto m = add(hadamard(fm, in.m_in), delta_m);

  // Left-fold so the sum associates the same way in both cell variants.
  auto o_pre = add(add(add(conv2d(in.x, p.at(prefix + "w_xo")),
                           conv2d(in.h1, p.at(prefix + "w_ho"))),
                       conv2d(c, p.at(prefix + "w_co"))),
                   conv2d(m, p.at(prefix + "w_mo")));
  auto o = sigmoid(detail::gate_pre(p, prefix, opt, "b_o", o_pre));

  auto fused = conv2d(concat_channels<T>({c, m}), p.at(prefix + "w_fuse"));
  auto h = hadamard(o, tanh(fused));

  CellOutputs<T> out;
  out.h = h;
  out.c = c;
  out.m = m;
  out.delta_c = delta_c;
  out.delta_m = delta_m;
  return out;
}

// Second-order unit. The temporal gate group additionally convolves the
// twice-lagged hidden state; a separate double-primed gate group maintains a
// second spatiotemporal memory fed by the twice-lagged zigzag input; the
// output gate and the 1x1 fusion read all three memories.
template <typename T>
CellOutputs<T> st_lstm_pp_forward(const CellInputs<T>& in, const ParameterSet<T>& p,
                                  const std::string& prefix, const CellOptions& opt = {}) {
  detail::check_state_shapes(in, true);

  auto g = tanh(detail::gate_pre(p, prefix, opt, "b_g",
      add(add(conv2d(in.x, p.at(prefix + "w_xg")), conv2d(in.h1, p.at(prefix + "w_hg"))),
          conv2d(in.h2, p.at(prefix + "w_hg_lag")))));
  auto i = sigmoid(detail::gate_pre(p, prefix, opt, "b_i",
      add(add(conv2d(in.x, p.at(prefix + "w_xi")), conv2d(in.h1, p.at(prefix + "w_hi"))),
          conv2d(in.h2, p.at(prefix + "w_hi_lag")))));
  auto f = sigmoid(detail::gate_pre(p, prefix, opt, "b_f",
      add(add(conv2d(in.x, p.at(prefix + "w_xf")), conv2d(in.h1, p.at(prefix + "w_hf"))),
          conv2d(in.h2, p.at(prefix + "w_hf_lag")))));

  auto delta_c = hadamard(i, g);
  auto c = add(hadamard(f, in.c_prev), delta_c);

  auto xg_m = conv2d(in.x, p.at(prefix + "w_xg_m"));
  auto xi_m = conv2d(in.x, p.at(prefix + "w_xi_m"));
  auto xf_m = conv2d(in.x, p.at(prefix + "w_xf_m"));

  auto gm = tanh(detail::gate_pre(p, prefix, opt, "b_gm",
      add(xg_m, conv2d(in.m_in, p.at(prefix + "w_mg")))));
  auto im = sigmoid(detail::gate_pre(p, prefix, opt, "b_im",
      add(xi_m, conv2d(in.m_in, p.at(prefix + "w_mi")))));
  auto fm = sigmoid(detail::gate_pre(p, prefix, opt, "b_fm",
      add(xf_m, conv2d(in.m_in, p.at(prefix + "w_mf")))));

  auto delta_m = hadamard(im, gm);
  auto m = add(hadamard(fm, in.m_in), delta_m);

  auto xg_m2 = opt.share_m_input_kernels ? xg_m : conv2d(in.x, p.at(prefix + "w_xg_m2"));
  auto xi_m2 = opt.share_m_input_kernels ? xi_m : conv2d(in.x, p.at(prefix + "w_xi_m2"));
  auto xf_m2 = opt.share_m_input_kernels ? xf_m : conv2d(in.x, p.at(prefix + "w_xf_m2"));

  auto gm2 = tanh(detail::gate_pre(p, prefix, opt, "b_gm2",
      add(xg_m2, conv2d(in.m2_in, p.at(prefix + "w_m2g")))));
  auto im2 = sigmoid(detail::gate_pre(p, prefix, opt, "b_im2",
      add(xi_m2, conv2d(in.m2_in, p.at(prefix + "w_m2i")))));
  auto fm2 = sigmoid(detail::gate_pre(p, prefix, opt, "b_fm2",
      add(xf_m2, conv2d(in.m2_in, p.at(prefix + "w_m2f")))));

  auto delta_m2 = hadamard(im2, gm2);
  auto m2 = add(hadamard(fm2, in.m2_in), delta_m2);

  // Left-fold with the second-order terms appended after their first-order
  // counterparts: zeroed lag/m2 kernels then add exact zeros, so the result
  // coincides with the baseline cell term for term.
  auto o_pre = add(add(add(add(add(conv2d(in.x, p.at(prefix + "w_xo")),
                                   conv2d(in.h1, p.at(prefix + "w_ho"))),
                               conv2d(in.h2, p.at(prefix + "w_ho_lag"))),
                           conv2d(c, p.at(prefix + "w_co"))),
                       conv2d(m, p.at(prefix + "w_mo"))),
                   conv2d(m2, p.at(prefix + "w_m2o")));
  auto o = sigmoid(detail::gate_pre(p, prefix, opt, "b_o", o_pre));

  auto fused = conv2d(concat_channels<T>({c, m, m2}), p.at(prefix + "w_fuse"));
  auto h = hadamard(o, tanh(fused));

  CellOutputs<T> out;
  out.h = h;
  out.c = c;
  out.m = m;
  out.m2 = m2;
  out.delta_c = delta_c;
  out.delta_m = delta_m;
  out.delta_m2 = delta_m2;
  return out;
}

}  // namespace plume::cells
