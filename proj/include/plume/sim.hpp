#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "plume/errors.hpp"

namespace plume::sim {

// Domain boundary handling. Outflow lets mass leave through the edges
// (absorbing ghost cells); no_flux seals the domain, which the conservation
// checks rely on.
enum class BoundaryMode { outflow, no_flux };

struct SimConfig {
  int rows = 32;
  int cols = 32;
  double cell_size_m = 62.5;       // dx; 2 km domain at the 32-cell default
  double dt_s = 0.0;               // 0 selects a stable step automatically
  double diffusivity = 15.0;       // isotropic eddy diffusivity, m^2/s
  double frame_interval_s = 36.0;  // output sampling interval
  int frames = 50;
  double binarize_threshold = 1e-3;  // tau, fraction of the first frame's peak
  BoundaryMode boundary = BoundaryMode::outflow;

  void validate() const;
};

// Large-scale inflow. phi is the direction the wind comes from, clockwise
// from north. Rows run north->south, columns west->east.
struct WindField {
  double phi_rad = 0.0;
  double speed = 0.0;  // m/s

  double vel_row() const;  // toward increasing row (southward)
  double vel_col() const;  // toward increasing column (eastward)
};

struct SourceSpec {
  std::vector<std::pair<int, int>> cells;  // (row, col); empty selects the grid center
  double rate = 1.0;                       // concentration units per second per cell
  double duration_s = 300.0;

  std::vector<std::pair<int, int>> resolved_cells(int rows, int cols) const;
};

struct BuildingMask {
  int rows = 0, cols = 0;
  std::vector<std::uint8_t> mask;  // 1 = building

  bool at(int r, int c) const { return mask[static_cast<std::size_t>(r) * cols + c] != 0; }
  int building_cells() const;
};

struct CityConfig {
  int count = 5;
  int min_size = 3;
  int max_size = 6;
  // Guarantee one building whose center lies within this many cells of the
  // source, measured along the transport direction, so plume-splitting
  // sequences occur in every corpus.
  int downstream_radius = 8;
  int clearance = 1;  // empty ring kept around the source and between buildings
  int max_retries = 2000;
};

// Deterministic-by-seed set of disjoint axis-aligned rectangles.
BuildingMask build_city(std::uint64_t seed, const CityConfig& city,
                        const SimConfig& cfg, const WindField& wind,
                        const SourceSpec& source);

struct SimResult {
  std::vector<std::vector<double>> frames;  // concentration, rows*cols each
  double dt = 0.0;                          // effective solver step
  int steps_per_frame = 0;
};

// Explicit finite-difference solve of the 2-D advection-diffusion equation:
// forward Euler, flux-form first-order upwind advection, second-order central
// diffusion, zero-penetration building faces, configurable domain boundary.
SimResult simulate(const SimConfig& cfg, const WindField& wind,
                   const BuildingMask& buildings, const SourceSpec& source);

// 1 where concentration exceeds tau times the first frame's peak.
std::vector<std::vector<std::uint8_t>> binarize(
    const std::vector<std::vector<double>>& frames, double tau);

// Constant wind-encoding fields: direction entries (cos(2pi-phi), sin(2pi-phi))
// stored as two planes, speed entries |v| as one plane.
struct WindChannels {
  int rows = 0, cols = 0;
  std::vector<double> direction;  // [2, rows, cols]
  std::vector<double> speed;      // [1, rows, cols]
  double d0 = 0.0, d1 = 0.0;      // the constant direction components
};

WindChannels wind_channels(double phi_rad, double speed, int rows, int cols);

// Uncompressed 8-bit grayscale raster (PGM P5): plume white, buildings
// mid-gray, background black.
std::string render_pgm(const std::vector<std::uint8_t>& binary_frame,
                       const BuildingMask& buildings);

namespace detail {

// One transport step; out must not alias field. Pure gather so rows can be
// processed in parallel; both kernels accumulate identically and produce
// bit-identical results.
void transport_step(const double* field, double* out, const std::uint8_t* mask,
                    int rows, int cols, double vel_row, double vel_col,
                    double kappa, double dx, double dt, BoundaryMode boundary);

void transport_step_serial(const double* field, double* out, const std::uint8_t* mask,
                           int rows, int cols, double vel_row, double vel_col,
                           double kappa, double dx, double dt, BoundaryMode boundary);

}  // namespace detail

}  // namespace plume::sim
