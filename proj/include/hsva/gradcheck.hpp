#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hsva {

/// Names of the checked terms, in report order.
const std::vector<std::string>& gradcheck_terms();

struct GradcheckConfig {
  std::uint64_t seed = 1;
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Test hook: scales the analytic gradient of this term by 1.01 before comparison.
  std::string corrupt_term;
};

struct GradcheckResult {
  std::string term;
  double value = 0.0;
  double rel_error = 0.0;  // |g_analytic - g_numeric| / max(|g_analytic|, |g_numeric|), norms over all parameters
  std::size_t parameters = 0;
  bool passed = false;
};

/// Central finite differences against the reverse pass for every loss term,
/// on a small randomly initialized 64-bit model (a few hundred parameters).
std::vector<GradcheckResult> run_gradcheck(const GradcheckConfig& cfg);

/// Fixed-width table, one line per term.
std::string format_gradcheck(const std::vector<GradcheckResult>& results);

}  // namespace hsva
