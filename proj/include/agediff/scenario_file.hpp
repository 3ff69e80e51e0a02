#pragma once

#include "agediff/expr.hpp"
#include "agediff/model.hpp"

#include <cstdint>
#include <string>

namespace agediff {

/// [run] section: simulation horizon and snapshot stride.
struct RunParams {
  double T = 1.0;
  int stride = 1;
};

/// Parsed scenario file: configuration ready for build_scenario, run
/// parameters, the raw text with its hash (embedded in every report for
/// reproducibility), and the canonical forms of the coefficient expressions.
struct ParsedScenario {
  ScenarioConfig config;
  RunParams run;
  std::string source_text;
  std::uint64_t source_hash = 0;
  std::string d_src, m_src, b_src;
};

/// Parse scenario text in the sectioned key = value format:
///   [grid]         backend (matrix | diffusion1d), a_max, n_age,
///                  x_min, x_max, n_cells (alias n), infinite_age
///   [coefficients] d, m, b as expressions in a and x; holder_rho
///   [run]          T, stride
/// '#' starts a comment. Unknown sections or keys, duplicate keys, malformed
/// values, and missing required keys produce Error with origin:line.
ParsedScenario parse_scenario_text(const std::string& text,
                                   const std::string& origin = "<memory>");

/// Read and parse a scenario file.
ParsedScenario load_scenario(const std::string& path);

/// FNV-1a 64-bit hash of a byte string.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace agediff
