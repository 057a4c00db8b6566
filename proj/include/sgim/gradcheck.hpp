#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sgim {

struct GradCheckResult {
  std::string name;
  std::size_t points = 0;
  double worst = 0.0;  // largest relative error over all points
  bool pass = false;
};

/// Names of every registered differentiable op and composite loss.
std::vector<std::string> gradcheck_names();

/// Central-difference check of one registered case at `points` seeded inputs.
GradCheckResult run_gradcheck(const std::string& name, std::size_t points, std::uint64_t seed,
                              double tolerance = 1e-4);

std::vector<GradCheckResult> run_all_gradchecks(std::size_t points, std::uint64_t seed, double tolerance = 1e-4);

}  // namespace sgim
