#pragma once

#include <cstddef>

namespace mfgp::core {

// Uniform grid t_k = k T / n_steps, k = 0..n_steps.
class TimeGrid {
 public:
  TimeGrid(std::size_t n_steps, double T);

  std::size_t n_steps() const { return n_steps_; }
  std::size_t n_nodes() const { return n_steps_ + 1; }
  double horizon() const { return T_; }
  double dt() const { return T_ / static_cast<double>(n_steps_); }
  // Exact endpoints: node(0) == 0, node(n_steps) == T.
  double node(std::size_t k) const;

  bool operator==(const TimeGrid& o) const {
    return n_steps_ == o.n_steps_ && T_ == o.T_;
  }

 private:
  std::size_t n_steps_;
  double T_;
};

}  // namespace mfgp::core
