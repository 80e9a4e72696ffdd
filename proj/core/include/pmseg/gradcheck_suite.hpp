#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pmseg/gradcheck.hpp"

namespace pmseg {

struct GradcheckCase {
  std::string name;
  GradcheckResult result;
  bool passed = false;
};

/// Relative-error bound used by the suite.
inline constexpr double kGradcheckTolerance = 1e-4;

/// Every recorded op, every loss (masked and unmasked, all mask modes) and a
/// small network, each on fixed random inputs chosen away from kinks and
/// argmax ties. `fault` corrupts one op's backward pass in every case.
std::vector<GradcheckCase> run_gradcheck_suite(std::optional<std::pair<OpKind, double>> fault = std::nullopt);

}  // namespace pmseg
