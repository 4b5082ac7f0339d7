#include "mfgp/core/time_grid.hpp"

#include <cmath>

#include "mfgp/errors.hpp"

namespace mfgp::core {

TimeGrid::TimeGrid(std::size_t n_steps, double T) : n_steps_(n_steps), T_(T) {
  if (n_steps == 0) throw InvalidArgument("TimeGrid: n_steps must be positive");
  if (!(T > 0.0) || !std::isfinite(T))
    throw InvalidArgument("TimeGrid: horizon must be positive and finite");
}

double TimeGrid::node(std::size_t k) const {
  if (k > n_steps_) throw InvalidArgument("TimeGrid: node index out of range");
  if (k == n_steps_) return T_;
  return T_ * static_cast<double>(k) / static_cast<double>(n_steps_);
}

}  // namespace mfgp::core
