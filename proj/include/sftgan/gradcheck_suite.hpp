#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sftgan/gradcheck.hpp"

namespace sftgan {

enum class GradcheckScope { ops, layers, end2end };

std::string to_string(GradcheckScope scope);
GradcheckScope parse_gradcheck_scope(const std::string& name);

struct GradcheckRow {
  std::string scope;
  std::string name;
  double max_rel_error = 0.0;
  std::size_t coords = 0;
  bool pass = false;
};

/// Finite-difference checks of every differentiable op, of the layers, or of
/// the generator + losses graph. One row per check.
std::vector<GradcheckRow> run_gradcheck_suite(GradcheckScope scope, std::uint64_t seed = 0,
                                              double tol = 1e-3);

}  // namespace sftgan
