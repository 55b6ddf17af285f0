#pragma once

// Builds an st_gasnet parameter set whose second-order paths are dead: lag and
// m2 kernels zero, fusion columns reading m2 zero, and every first-order
// kernel copied from a pred_rnn set. Used by the reduction-equivalence checks.

#include <string>

#include "plume/network.hpp"
#include "plume/params.hpp"

namespace oracle {

template <typename T>
plume::ParameterSet<T> lift_baseline_params(const plume::ParameterSet<T>& base,
                                            const plume::net::ModelConfig& base_cfg,
                                            std::uint64_t seed = 0xdead) {
  plume::net::ModelConfig pp_cfg = base_cfg;
  pp_cfg.variant = plume::net::Variant::st_gasnet;
  auto pp = plume::net::init_parameters<T>(pp_cfg, seed);

  const int ch = base_cfg.hidden_channels;
  for (auto& [name, tensor] : pp) {
    const auto dot = name.find('.');
    const std::string leaf = name.substr(dot + 1);
    if (leaf == "w_hg_lag" || leaf == "w_hi_lag" || leaf == "w_hf_lag" ||
        leaf == "w_ho_lag" || leaf == "w_m2g" || leaf == "w_m2i" || leaf == "w_m2f" ||
        leaf == "w_m2o") {
      std::fill(tensor.mutable_values().begin(), tensor.mutable_values().end(), T(0));
    } else if (leaf == "w_fuse") {
      auto& dst = tensor.mutable_values();
      const auto& src = base.at(name).values();
      std::fill(dst.begin(), dst.end(), T(0));
      for (int co = 0; co < ch; ++co)
        for (int ci = 0; ci < 2 * ch; ++ci)
          dst[static_cast<std::size_t>(co) * 3 * ch + ci] =
              src[static_cast<std::size_t>(co) * 2 * ch + ci];
    } else {
      tensor.mutable_values() = base.at(name).values();
    }
  }
  return pp;
}

}  // namespace oracle
