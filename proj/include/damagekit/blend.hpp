#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "damagekit/image.hpp"

namespace damagekit::blend {

// Maps destination coordinates into source coordinates: src = dst + offset.
struct Offset {
  int dx = 0;
  int dy = 0;
};

// Poisson seamless-cloning problem. `region` (the paste region) lives in
// destination coordinates and must not touch the destination border.
struct CloneTask {
  RasterImage source;
  RasterImage destination;
  BinaryMask region;
  Offset source_offset;
};

struct SolverSettings {
  double tolerance = 1e-4;  // relative L2 residual
  int max_iterations = 10'000;
  // Over-relaxation factor for the Gauss-Seidel sweep. Empty picks the
  // optimal SOR factor for the region's bounding box; 1.0 is plain Gauss-Seidel.
  std::optional<double> relaxation;
};

// Throws InvalidRegion / DimensionMismatch when the task invariants fail.
void validate(const CloneTask& task);

// The per-channel linear system
//   4 f_p - sum_{q in N_p, q in region} f_q
//       = sum_{q in N_p, q on boundary} dst_q + sum_{q in N_p} (g_p - g_q)
// over the region's pixels in row-major order.
class PoissonSystem {
 public:
  explicit PoissonSystem(const CloneTask& task);

  std::size_t unknowns() const { return pixels_.size(); }
  int channels() const { return channels_; }
  // Destination (x, y) of unknown k.
  std::pair<int, int> pixel(std::size_t k) const { return pixels_[k]; }

  std::span<const double> rhs(int channel) const { return rhs_[channel]; }
  // Unknown indices of the four neighbours, -1 where the neighbour is boundary.
  std::span<const int, 4> neighbours(std::size_t k) const { return std::span<const int, 4>(neighbours_[k]); }

  // ||b - A f|| / ||b||, with ||b|| replaced by 1 when b = 0.
  double relative_residual(int channel, std::span<const double> values) const;
  // One in-place Gauss-Seidel / SOR sweep in row-major order.
  void sweep(int channel, std::span<double> values, double relaxation) const;

 private:
  int channels_ = 0;
  std::vector<std::pair<int, int>> pixels_;
  std::vector<std::array<int, 4>> neighbours_;
  std::vector<std::vector<double>> rhs_;
};

struct CloneResult {
  RasterImage image;
  // Unquantized per-channel solution, indexed like PoissonSystem unknowns.
  std::vector<std::vector<double>> solution;
  int iterations = 0;
  double residual = 0.0;
  // Max-over-channels residual after each sweep, when requested.
  std::vector<double> residual_trace;
};

CloneResult solve(const CloneTask& task, const SolverSettings& settings = {}, bool record_trace = false);

// Pixels outside the region equal the destination bit for bit. Inside, the
// converged solution is rounded and clamped to [0, 255].
RasterImage seamless_clone(const CloneTask& task, const SolverSettings& settings = {});

// Max over channels of the relative residual at the candidate's region values.
double residual(const CloneTask& task, const RasterImage& candidate);
double residual(const CloneTask& task, const std::vector<std::vector<double>>& solution);

double optimal_relaxation(const BinaryMask& region);

}  // namespace damagekit::blend
