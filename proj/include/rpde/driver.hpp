#pragma once

// Rough drivers for the solver: lifted Volterra samples or a deterministic
// smooth path, built on a fine grid and lifted onto the solver grid.

#include <optional>

#include "rpde/rough_core.hpp"
#include "rpde/volterra.hpp"

namespace rpde {

enum class Lift { geometric, ito };

struct DriverSpec {
  std::optional<VolterraKernel> kernel = VolterraKernel::brownian();  // empty: smooth driver
  double sine_amplitude = 1.0;  // smooth driver X^j_t = amplitude sin(frequency t)
  double sine_frequency = 1.0;
  std::size_t coarsen = 16;     // fine samples per solver step
  Lift lift = Lift::geometric;
  double gamma = 0.4;

  bool smooth() const { return !kernel.has_value(); }
};

/// Fine path underlying a driver with `steps * coarsen` fine steps.
inline GridPath driver_fine_path(const DriverSpec& spec, double horizon, std::size_t steps, std::uint64_t seed,
                                 std::size_t d) {
  require(steps >= 1 && spec.coarsen >= 1, "driver: need positive step counts");
  const std::size_t n_fine = steps * spec.coarsen;
  if (spec.smooth()) {
    Matrix vals(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n_fine + 1));
    for (std::size_t i = 0; i <= n_fine; ++i) {
      const double t = horizon * static_cast<double>(i) / static_cast<double>(n_fine);
      vals.col(static_cast<Eigen::Index>(i)).setConstant(spec.sine_amplitude * std::sin(spec.sine_frequency * t));
    }
    return GridPath(horizon, std::move(vals));
  }
  return sample_volterra(*spec.kernel, std::max<std::size_t>(n_fine, 2), horizon, seed, d).path;
}

inline RoughPath lift_driver(const DriverSpec& spec, const GridPath& fine) {
  if (spec.lift == Lift::ito) {
    require(spec.kernel && spec.kernel->is_brownian(), "driver: the Ito lift is only defined for Brownian drivers");
    return lift_ito(fine, spec.coarsen, spec.gamma);
  }
  return lift_geometric(fine, spec.coarsen, spec.gamma);
}

/// Rough path on `steps` solver steps over [0, horizon].
inline RoughPath make_driver(const DriverSpec& spec, double horizon, std::size_t steps, std::uint64_t seed, std::size_t d) {
  return lift_driver(spec, driver_fine_path(spec, horizon, steps, seed, d));
}

}  // namespace rpde
