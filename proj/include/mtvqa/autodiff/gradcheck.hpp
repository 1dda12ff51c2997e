#pragma once

#include <functional>
#include <span>
#include <string>

#include "mtvqa/autodiff/graph.hpp"

namespace mtvqa::ad {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

struct GradCheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  /// Gradients smaller than this are compared in absolute terms; central
  /// differences carry ~1e-11 rounding noise that would otherwise dominate
  /// relative error near zero.
  double magnitude_floor = 1e-6;
};

/// Builds the scalar graph with `build`, backpropagates, then compares every
/// entry of every parameter against central finite differences.
/// rel = |analytic - numeric| / max(|analytic|, |numeric|, floor).
GradCheckReport check_gradients(std::span<Parameter* const> params,
                                const std::function<Var(Graph&)>& build,
                                const GradCheckOptions& options = {});

}  // namespace mtvqa::ad
