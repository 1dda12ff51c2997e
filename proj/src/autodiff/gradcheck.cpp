#include "mtvqa/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mtvqa/error.hpp"

namespace mtvqa::ad {

namespace {

double evaluate(const std::function<Var(Graph&)>& build) {
  Graph g;
  Var out = build(g);
  return g.value(out)[0];
}

}  // namespace

GradCheckReport check_gradients(std::span<Parameter* const> params, const std::function<Var(Graph&)>& build,
                                const GradCheckOptions& options) {
  for (auto* p : params) p->zero_grad();
  {
    Graph g;
    Var out = build(g);
    if (g.value(out).size() != 1) {
      throw ShapeError("check_gradients: output must be scalar, got " + shape_string(g.value(out).shape()));
    }
    g.backward(out);
  }

  GradCheckReport report;
  for (auto* p : params) {
    const Tensor analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + options.step;
      const double plus = evaluate(build);
      p->value[i] = saved - options.step;
      const double minus = evaluate(build);
      p->value[i] = saved;

      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.magnitude_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error || !std::isfinite(rel)) {
        report.max_rel_error = std::isfinite(rel) ? rel : HUGE_VAL;
        report.worst_parameter = p->name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace mtvqa::ad
