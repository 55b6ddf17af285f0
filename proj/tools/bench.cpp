// Benchmark comparing the parallel kernels against their serial references:
// convolution forward/backward and the transport step at a few sizes.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "plume/kernels.hpp"
#include "plume/rng.hpp"
#include "plume/sim.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_per_run(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto start = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double>(Clock::now() - start).count() / reps;
}

void bench_conv(int b, int cin, int cout, int hw, int k, int reps) {
  plume::Rng rng(42);
  std::vector<float> in(static_cast<std::size_t>(b) * cin * hw * hw);
  std::vector<float> ker(static_cast<std::size_t>(cout) * cin * k * k);
  for (auto& v : in) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : ker) v = static_cast<float>(rng.uniform(-1, 1));
  std::vector<float> out(static_cast<std::size_t>(b) * cout * hw * hw);
  std::vector<float> gin(in.size(), 0.0f), gker(ker.size(), 0.0f);

  const double macs = 2.0 * b * cout * cin * hw * hw * k * k;

  const double fwd_par = seconds_per_run(
      [&] {
        plume::kernels::conv2d_forward(in.data(), ker.data(), out.data(), b, cin, hw,
                                       hw, cout, k, k);
      },
      reps);
  const double fwd_ser = seconds_per_run(
      [&] {
        plume::kernels::reference::conv2d_forward(in.data(), ker.data(), out.data(), b,
                                                  cin, hw, hw, cout, k, k);
      },
      reps);
  const double bwd_par = seconds_per_run(
      [&] {
        plume::kernels::conv2d_grad_input(out.data(), ker.data(), gin.data(), b, cin,
                                          hw, hw, cout, k, k);
        plume::kernels::conv2d_grad_kernel(out.data(), in.data(), gker.data(), b, cin,
                                           hw, hw, cout, k, k);
      },
      reps);

  std::printf("conv2d  B=%d Cin=%d Cout=%d %dx%d k=%d\n", b, cin, cout, hw, hw, k);
  std::printf("  forward  parallel %8.3f ms (%6.2f GFLOP/s)   serial %8.3f ms   speedup %.2fx\n",
              fwd_par * 1e3, macs / fwd_par * 1e-9, fwd_ser * 1e3, fwd_ser / fwd_par);
  std::printf("  backward parallel %8.3f ms\n", bwd_par * 1e3);
}

void bench_transport(int n, int reps) {
  plume::sim::SimConfig cfg;
  cfg.rows = n;
  cfg.cols = n;
  cfg.cell_size_m = 2000.0 / n;
  plume::sim::WindField wind;
  wind.phi_rad = 3.92699;  // 225 degrees
  wind.speed = 3.0;

  std::vector<double> field(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> next(field.size(), 0.0);
  field[field.size() / 2] = 100.0;
  std::vector<std::uint8_t> mask(field.size(), 0);

  const double dt = 1.0;
  const double par = seconds_per_run(
      [&] {
        plume::sim::detail::transport_step(field.data(), next.data(), mask.data(), n, n,
                                           wind.vel_row(), wind.vel_col(),
                                           cfg.diffusivity, cfg.cell_size_m, dt,
                                           plume::sim::BoundaryMode::outflow);
      },
      reps);
  const double ser = seconds_per_run(
      [&] {
        plume::sim::detail::transport_step_serial(field.data(), next.data(), mask.data(),
                                                  n, n, wind.vel_row(), wind.vel_col(),
                                                  cfg.diffusivity, cfg.cell_size_m, dt,
                                                  plume::sim::BoundaryMode::outflow);
      },
      reps);
  std::printf("transport %dx%d: parallel %8.3f us   serial %8.3f us   speedup %.2fx\n",
              n, n, par * 1e6, ser * 1e6, ser / par);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n\n", omp_get_max_threads());
#else
  std::printf("OpenMP not enabled; parallel kernels run serially\n\n");
#endif
  bench_conv(4, 8, 8, 24, 3, 50);
  bench_conv(4, 16, 16, 32, 3, 20);
  bench_conv(1, 16, 16, 100, 3, 10);
  std::printf("\n");
  bench_transport(32, 200);
  bench_transport(100, 100);
  bench_transport(400, 20);
  return 0;
}
