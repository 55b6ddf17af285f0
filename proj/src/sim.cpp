#include "plume/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "plume/rng.hpp"

namespace plume::sim {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kCflSafety = 0.9;

double cfl_limit(double dx, double speed, double kappa) {
  double limit = std::numeric_limits<double>::infinity();
  if (speed > 0) limit = std::min(limit, dx / speed);
  if (kappa > 0) limit = std::min(limit, dx * dx / (4.0 * kappa));
  return kCflSafety * limit;
}

// Positivity bound for the combined explicit update; tighter than the CFL
// limit when advection and diffusion are both near their individual limits.
double positivity_limit(double dx, double vel_row, double vel_col, double kappa) {
  const double rate = (std::abs(vel_row) + std::abs(vel_col)) / dx + 4.0 * kappa / (dx * dx);
  if (rate <= 0) return std::numeric_limits<double>::infinity();
  return kCflSafety / rate;
}

}  // namespace

void SimConfig::validate() const {
  if (rows < 3 || cols < 3) throw ConfigError("sim grid must be at least 3x3");
  if (cell_size_m <= 0) throw ConfigError("sim.cell_size_m must be positive");
  if (dt_s < 0) throw ConfigError("sim.dt_s must be non-negative");
  if (diffusivity < 0) throw ConfigError("sim.diffusivity must be non-negative");
  if (frame_interval_s <= 0) throw ConfigError("sim.frame_interval_s must be positive");
  if (frames < 2) throw ConfigError("sim.frames must be at least 2");
  if (binarize_threshold <= 0) throw ConfigError("sim.binarize_threshold must be positive");
}

double WindField::vel_row() const { return speed * std::cos(phi_rad); }
double WindField::vel_col() const { return -speed * std::sin(phi_rad); }

std::vector<std::pair<int, int>> SourceSpec::resolved_cells(int rows, int cols) const {
  if (!cells.empty()) {
    for (auto [r, c] : cells)
      if (r < 0 || r >= rows || c < 0 || c >= cols)
        throw ConfigError("source cell outside domain");
    return cells;
  }
  return {{rows / 2, cols / 2}};
}

int BuildingMask::building_cells() const {
  int n = 0;
  for (auto v : mask) n += v;
  return n;
}

BuildingMask build_city(std::uint64_t seed, const CityConfig& city,
                        const SimConfig& cfg, const WindField& wind,
                        const SourceSpec& source) {
  cfg.validate();
  if (city.count < 0) throw ConfigError("city.count must be non-negative");
  if (city.min_size < 1 || city.max_size < city.min_size)
    throw ConfigError("city size range invalid");
  if (city.max_size >= std::min(cfg.rows, cfg.cols))
    throw ConfigError("city buildings do not fit the domain");

  BuildingMask out;
  out.rows = cfg.rows;
  out.cols = cfg.cols;
  out.mask.assign(static_cast<std::size_t>(cfg.rows) * cfg.cols, 0);
  if (city.count == 0) return out;

  const auto sources = source.resolved_cells(cfg.rows, cfg.cols);
  Rng rng(seed);

  auto blocked = [&](int r0, int c0, int h, int w) {
    // keep a clearance ring free around other buildings and the source
    for (int r = r0 - city.clearance; r < r0 + h + city.clearance; ++r)
      for (int c = c0 - city.clearance; c < c0 + w + city.clearance; ++c) {
        if (r < 0 || r >= cfg.rows || c < 0 || c >= cfg.cols) continue;
        if (out.mask[static_cast<std::size_t>(r) * cfg.cols + c]) return true;
        for (auto [sr, sc] : sources)
          if (std::abs(r - sr) <= city.clearance && std::abs(c - sc) <= city.clearance)
            return true;
      }
    return false;
  };

  auto stamp = [&](int r0, int c0, int h, int w) {
    for (int r = r0; r < r0 + h; ++r)
      for (int c = c0; c < c0 + w; ++c)
        out.mask[static_cast<std::size_t>(r) * cfg.cols + c] = 1;
  };

  // Transport direction; the first building is forced onto it.
  const double vr = wind.vel_row(), vc = wind.vel_col();
  const double vnorm = std::hypot(vr, vc);

  for (int b = 0; b < city.count; ++b) {
    bool placed = false;
    for (int attempt = 0; attempt < city.max_retries && !placed; ++attempt) {
      const int h = city.min_size + rng.below_int(city.max_size - city.min_size + 1);
      const int w = city.min_size + rng.below_int(city.max_size - city.min_size + 1);
      int r0, c0;
      if (b == 0 && vnorm > 0) {
        // center a few cells downwind of the source
        const auto [sr, sc] = sources[0];
        const double dist = 2.0 + rng.uniform() * std::max(1, city.downstream_radius - 2);
        const double lateral = rng.uniform(-2.0, 2.0);
        const double ur = vr / vnorm, uc = vc / vnorm;
        const int cr = sr + static_cast<int>(std::lround(dist * ur - lateral * uc));
        const int cc = sc + static_cast<int>(std::lround(dist * uc + lateral * ur));
        r0 = cr - h / 2;
        c0 = cc - w / 2;
      } else {
        r0 = rng.below_int(cfg.rows - h + 1);
        c0 = rng.below_int(cfg.cols - w + 1);
      }
      if (r0 < 0 || c0 < 0 || r0 + h > cfg.rows || c0 + w > cfg.cols) continue;
      if (blocked(r0, c0, h, w)) continue;
      stamp(r0, c0, h, w);
      placed = true;
    }
    if (!placed)
      throw GenerationError("build_city: could not place building " +
                            std::to_string(b) + " after bounded retries");
  }
  return out;
}

namespace detail {

namespace {

// Signed flux through the face between `a` and its +axis neighbour `b`
// (advective upwind plus Fickian diffusion). Either side being a building
// seals the face. `vel` is the velocity component along the axis.
inline double face_flux(double ca, double cb, bool wall_a, bool wall_b,
                        double vel, double kappa, double dx) {
  if (wall_a || wall_b) return 0.0;
  const double adv = vel >= 0 ? vel * ca : vel * cb;
  const double dif = -kappa * (cb - ca) / dx;
  return adv + dif;
}

// Face on the domain edge of cell `a`; `outward` is +1 when the +axis
// direction points out of the domain, -1 otherwise.
inline double boundary_flux(double ca, bool wall_a, double vel, double kappa,
                            double dx, int outward, BoundaryMode boundary) {
  if (wall_a || boundary == BoundaryMode::no_flux) return 0.0;
  // absorbing ghost cell with zero concentration
  double adv;
  if (outward > 0)
    adv = vel >= 0 ? vel * ca : 0.0;
  else
    adv = vel <= 0 ? vel * ca : 0.0;
  const double dif = (outward > 0 ? 1.0 : -1.0) * kappa * ca / dx;
  return adv + dif;
}

inline void transport_row(const double* field, double* out, const std::uint8_t* mask,
                          int rows, int cols, double vel_row, double vel_col,
                          double kappa, double dx, double dt, BoundaryMode boundary,
                          int r) {
  const double scale = dt / dx;
  for (int c = 0; c < cols; ++c) {
    const std::size_t idx = static_cast<std::size_t>(r) * cols + c;
    if (mask[idx]) {
      out[idx] = 0.0;
      continue;
    }
    const double ca = field[idx];
    const bool wall_a = false;  // handled above

    // column axis (west/east faces)
    double f_east, f_west;
    if (c + 1 < cols)
      f_east = face_flux(ca, field[idx + 1], wall_a, mask[idx + 1] != 0, vel_col, kappa, dx);
    else
      f_east = boundary_flux(ca, wall_a, vel_col, kappa, dx, +1, boundary);
    if (c > 0)
      f_west = face_flux(field[idx - 1], ca, mask[idx - 1] != 0, wall_a, vel_col, kappa, dx);
    else
      f_west = boundary_flux(ca, wall_a, vel_col, kappa, dx, -1, boundary);

    // row axis (north/south faces)
    double f_south, f_north;
    if (r + 1 < rows)
      f_south = face_flux(ca, field[idx + cols], wall_a, mask[idx + cols] != 0,
                          vel_row, kappa, dx);
    else
      f_south = boundary_flux(ca, wall_a, vel_row, kappa, dx, +1, boundary);
    if (r > 0)
      f_north = face_flux(field[idx - cols], ca, mask[idx - cols] != 0, wall_a,
                          vel_row, kappa, dx);
    else
      f_north = boundary_flux(ca, wall_a, vel_row, kappa, dx, -1, boundary);

    out[idx] = ca - scale * (f_east - f_west) - scale * (f_south - f_north);
  }
}

}  // namespace

void transport_step(const double* field, double* out, const std::uint8_t* mask,
                    int rows, int cols, double vel_row, double vel_col,
                    double kappa, double dx, double dt, BoundaryMode boundary) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (rows * cols >= 4096)
#endif
  for (int r = 0; r < rows; ++r)
    transport_row(field, out, mask, rows, cols, vel_row, vel_col, kappa, dx, dt,
                  boundary, r);
}

void transport_step_serial(const double* field, double* out, const std::uint8_t* mask,
                           int rows, int cols, double vel_row, double vel_col,
                           double kappa, double dx, double dt, BoundaryMode boundary) {
  for (int r = 0; r < rows; ++r)
    transport_row(field, out, mask, rows, cols, vel_row, vel_col, kappa, dx, dt,
                  boundary, r);
}

}  // namespace detail

SimResult simulate(const SimConfig& cfg, const WindField& wind,
                   const BuildingMask& buildings, const SourceSpec& source) {
  cfg.validate();
  if (wind.speed < 0) throw ConfigError("wind speed must be non-negative");
  if (buildings.rows != cfg.rows || buildings.cols != cfg.cols)
    throw ConfigError("building mask extent does not match grid");

  const auto sources = source.resolved_cells(cfg.rows, cfg.cols);
  for (auto [r, c] : sources)
    if (buildings.at(r, c)) throw ConfigError("source cell is inside a building");

  const double dx = cfg.cell_size_m;
  const double limit = cfl_limit(dx, wind.speed, cfg.diffusivity);

  double dt = cfg.dt_s;
  if (dt == 0.0) {
    dt = std::min(limit, positivity_limit(dx, wind.vel_row(), wind.vel_col(),
                                          cfg.diffusivity));
    if (!std::isfinite(dt)) dt = cfg.frame_interval_s;
    dt = std::min(dt, cfg.frame_interval_s);
  }
  if (dt > limit)
    throw ConfigError("time step " + std::to_string(dt) +
                      " s violates the CFL bound " + std::to_string(limit) + " s");

  // sample frames on an integer number of solver steps, never stretching dt
  const int steps_per_frame = std::max(1, static_cast<int>(std::ceil(cfg.frame_interval_s / dt)));
  dt = cfg.frame_interval_s / steps_per_frame;

  const std::size_t cells = static_cast<std::size_t>(cfg.rows) * cfg.cols;
  std::vector<double> field(cells, 0.0), next(cells, 0.0);

  SimResult result;
  result.dt = dt;
  result.steps_per_frame = steps_per_frame;
  result.frames.reserve(cfg.frames);

  const double vr = wind.vel_row(), vc = wind.vel_col();
  double time = 0.0;
  for (int f = 0; f < cfg.frames; ++f) {
    for (int s = 0; s < steps_per_frame; ++s) {
      detail::transport_step(field.data(), next.data(), buildings.mask.data(),
                             cfg.rows, cfg.cols, vr, vc, cfg.diffusivity, dx, dt,
                             cfg.boundary);
      // source emits while the release lasts
      if (time < source.duration_s)
        for (auto [r, c] : sources)
          next[static_cast<std::size_t>(r) * cfg.cols + c] += source.rate * dt;
      // clamp rounding-level negatives; anything larger is a real defect
      for (double& v : next) {
        if (v < 0.0) {
          if (v < -1e-12)
            throw GenerationError("transport produced negative concentration " +
                                  std::to_string(v));
          v = 0.0;
        }
      }
      field.swap(next);
      time += dt;
    }
    result.frames.push_back(field);
  }
  return result;
}

std::vector<std::vector<std::uint8_t>> binarize(
    const std::vector<std::vector<double>>& frames, double tau) {
  if (tau <= 0) throw ContractError("binarize: tau must be positive");
  if (frames.empty()) throw ContractError("binarize: no frames");
  double peak = 0.0;
  for (double v : frames.front()) peak = std::max(peak, v);
  if (peak <= 0.0)
    throw GenerationError("binarize: first output frame holds no mass");
  const double threshold = tau * peak;
  std::vector<std::vector<std::uint8_t>> out;
  out.reserve(frames.size());
  for (const auto& frame : frames) {
    std::vector<std::uint8_t> bin(frame.size());
    for (std::size_t i = 0; i < frame.size(); ++i) bin[i] = frame[i] > threshold ? 1 : 0;
    out.push_back(std::move(bin));
  }
  return out;
}

WindChannels wind_channels(double phi_rad, double speed, int rows, int cols) {
  WindChannels out;
  out.rows = rows;
  out.cols = cols;
  out.d0 = std::cos(2.0 * kPi - phi_rad);
  out.d1 = std::sin(2.0 * kPi - phi_rad);
  const std::size_t plane = static_cast<std::size_t>(rows) * cols;
  out.direction.assign(2 * plane, 0.0);
  std::fill(out.direction.begin(), out.direction.begin() + plane, out.d0);
  std::fill(out.direction.begin() + plane, out.direction.end(), out.d1);
  out.speed.assign(plane, speed);
  return out;
}

std::string render_pgm(const std::vector<std::uint8_t>& binary_frame,
                       const BuildingMask& buildings) {
  const std::size_t cells = static_cast<std::size_t>(buildings.rows) * buildings.cols;
  if (binary_frame.size() != cells)
    throw ContractError("render_pgm: frame extent mismatch");
  std::string out = "P5\n" + std::to_string(buildings.cols) + " " +
                    std::to_string(buildings.rows) + "\n255\n";
  out.reserve(out.size() + cells);
  for (std::size_t i = 0; i < cells; ++i) {
    char px;
    if (buildings.mask[i])
      px = static_cast<char>(128);
    else
      px = binary_frame[i] ? static_cast<char>(255) : static_cast<char>(0);
    out.push_back(px);
  }
  return out;
}

}  // namespace plume::sim
