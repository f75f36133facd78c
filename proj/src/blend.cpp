#include "damagekit/blend.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "damagekit/error.hpp"

namespace damagekit::blend {

namespace {

constexpr int kDx[4] = {-1, 1, 0, 0};
constexpr int kDy[4] = {0, 0, -1, 1};

}  // namespace

void validate(const CloneTask& task) {
  const auto& dst = task.destination;
  const auto& src = task.source;
  if (task.region.size() != dst.size()) {
    throw Error(ErrorKind::DimensionMismatch, "clone region must match the destination size");
  }
  if (src.channels() < dst.channels()) {
    throw Error(ErrorKind::DimensionMismatch, "source has fewer channels than destination");
  }
  const Rect box = task.region.bounding_box();
  if (box.empty()) throw Error(ErrorKind::InvalidRegion, "clone region is empty");
  if (box.x == 0 || box.y == 0 || box.right() == dst.width() || box.bottom() == dst.height()) {
    throw Error(ErrorKind::InvalidRegion, "clone region touches the destination border; erode it first");
  }
  // Guidance reads the source at every region pixel and its four neighbours.
  const int sx0 = box.x + task.source_offset.dx - 1;
  const int sy0 = box.y + task.source_offset.dy - 1;
  const int sx1 = box.right() + task.source_offset.dx;
  const int sy1 = box.bottom() + task.source_offset.dy;
  if (sx0 < 0 || sy0 < 0 || sx1 >= src.width() || sy1 >= src.height()) {
    throw Error(ErrorKind::InvalidRegion, "shifted clone region (with its neighbours) falls outside the source");
  }
}

PoissonSystem::PoissonSystem(const CloneTask& task) {
  validate(task);
  const auto& region = task.region;
  const auto& dst = task.destination;
  const auto& src = task.source;
  channels_ = dst.channels();

  std::vector<int> index(static_cast<std::size_t>(region.width()) * region.height(), -1);
  for (int y = 0; y < region.height(); ++y) {
    for (int x = 0; x < region.width(); ++x) {
      if (region.get(x, y)) {
        index[static_cast<std::size_t>(y) * region.width() + x] = static_cast<int>(pixels_.size());
        pixels_.emplace_back(x, y);
      }
    }
  }

  neighbours_.resize(pixels_.size());
  rhs_.assign(channels_, std::vector<double>(pixels_.size(), 0.0));
  const int dx = task.source_offset.dx;
  const int dy = task.source_offset.dy;
  for (std::size_t k = 0; k < pixels_.size(); ++k) {
    const auto [x, y] = pixels_[k];
    for (int n = 0; n < 4; ++n) {
      const int qx = x + kDx[n];
      const int qy = y + kDy[n];
      const int q = index[static_cast<std::size_t>(qy) * region.width() + qx];
      neighbours_[k][n] = q;
      for (int c = 0; c < channels_; ++c) {
        double b = static_cast<double>(src.at(x + dx, y + dy, c)) - src.at(qx + dx, qy + dy, c);
        if (q < 0) b += dst.at(qx, qy, c);
        rhs_[c][k] += b;
      }
    }
  }
}

double PoissonSystem::relative_residual(int channel, std::span<const double> values) const {
  const auto& b = rhs_[channel];
  double r2 = 0.0;
  double b2 = 0.0;
  for (std::size_t k = 0; k < pixels_.size(); ++k) {
    double af = 4.0 * values[k];
    for (const int q : neighbours_[k]) {
      if (q >= 0) af -= values[q];
    }
    const double r = b[k] - af;
    r2 += r * r;
    b2 += b[k] * b[k];
  }
  return std::sqrt(r2) / (b2 > 0.0 ? std::sqrt(b2) : 1.0);
}

void PoissonSystem::sweep(int channel, std::span<double> values, double relaxation) const {
  const auto& b = rhs_[channel];
  for (std::size_t k = 0; k < pixels_.size(); ++k) {
    double sum = b[k];
    for (const int q : neighbours_[k]) {
      if (q >= 0) sum += values[q];
    }
    const double gs = sum / 4.0;
    values[k] += relaxation * (gs - values[k]);
  }
}

double optimal_relaxation(const BinaryMask& region) {
  const Rect box = region.bounding_box();
  const int n = std::max(box.width, box.height);
  if (n <= 1) return 1.0;
  return 2.0 / (1.0 + std::sin(std::numbers::pi / (n + 1)));
}

namespace {

RasterImage quantize(const CloneTask& task, const PoissonSystem& system,
                     const std::vector<std::vector<double>>& solution) {
  RasterImage out = task.destination;
  for (std::size_t k = 0; k < system.unknowns(); ++k) {
    const auto [x, y] = system.pixel(k);
    for (int c = 0; c < system.channels(); ++c) {
      const double v = std::clamp(solution[c][k], 0.0, 255.0);
      out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(v));
    }
  }
  return out;
}

}  // namespace

CloneResult solve(const CloneTask& task, const SolverSettings& settings, bool record_trace) {
  if (!(settings.tolerance > 0.0) || settings.max_iterations < 1) {
    throw Error(ErrorKind::OutOfRange, "solver tolerance must be positive and max iterations >= 1");
  }
  const PoissonSystem system(task);
  const double omega = settings.relaxation.value_or(optimal_relaxation(task.region));
  if (!(omega > 0.0 && omega < 2.0)) throw Error(ErrorKind::OutOfRange, "relaxation must lie in (0, 2)");

  CloneResult result;
  result.solution.assign(system.channels(), std::vector<double>(system.unknowns()));
  for (std::size_t k = 0; k < system.unknowns(); ++k) {
    const auto [x, y] = system.pixel(k);
    for (int c = 0; c < system.channels(); ++c) result.solution[c][k] = task.destination.at(x, y, c);
  }

  std::vector<bool> converged(system.channels(), false);
  std::vector<double> channel_residual(system.channels());
  for (int c = 0; c < system.channels(); ++c) {
    channel_residual[c] = system.relative_residual(c, result.solution[c]);
    converged[c] = channel_residual[c] <= settings.tolerance;
  }
  auto worst = [&] { return *std::max_element(channel_residual.begin(), channel_residual.end()); };

  int iteration = 0;
  while (worst() > settings.tolerance && iteration < settings.max_iterations) {
    ++iteration;
    for (int c = 0; c < system.channels(); ++c) {
      if (converged[c]) continue;
      system.sweep(c, result.solution[c], omega);
      channel_residual[c] = system.relative_residual(c, result.solution[c]);
      converged[c] = channel_residual[c] <= settings.tolerance;
    }
    if (record_trace) result.residual_trace.push_back(worst());
  }
  result.iterations = iteration;
  result.residual = worst();
  if (result.residual > settings.tolerance) {
    throw ConvergenceError("Poisson solve did not converge in " + std::to_string(iteration) +
                               " iterations (residual " + std::to_string(result.residual) + ")",
                           result.residual, iteration);
  }
  result.image = quantize(task, system, result.solution);
  return result;
}

RasterImage seamless_clone(const CloneTask& task, const SolverSettings& settings) {
  return solve(task, settings).image;
}

double residual(const CloneTask& task, const std::vector<std::vector<double>>& solution) {
  const PoissonSystem system(task);
  if (solution.size() != static_cast<std::size_t>(system.channels())) {
    throw Error(ErrorKind::DimensionMismatch, "solution channel count mismatch");
  }
  double worst = 0.0;
  for (int c = 0; c < system.channels(); ++c) {
    if (solution[c].size() != system.unknowns()) {
      throw Error(ErrorKind::DimensionMismatch, "solution length does not match region size");
    }
    worst = std::max(worst, system.relative_residual(c, solution[c]));
  }
  return worst;
}

double residual(const CloneTask& task, const RasterImage& candidate) {
  if (candidate.size() != task.destination.size() || candidate.channels() < task.destination.channels()) {
    throw Error(ErrorKind::DimensionMismatch, "candidate must match the destination dimensions");
  }
  const PoissonSystem system(task);
  std::vector<std::vector<double>> values(system.channels(), std::vector<double>(system.unknowns()));
  for (std::size_t k = 0; k < system.unknowns(); ++k) {
    const auto [x, y] = system.pixel(k);
    for (int c = 0; c < system.channels(); ++c) values[c][k] = candidate.at(x, y, c);
  }
  double worst = 0.0;
  for (int c = 0; c < system.channels(); ++c) {
    worst = std::max(worst, system.relative_residual(c, values[c]));
  }
  return worst;
}

}  // namespace damagekit::blend
