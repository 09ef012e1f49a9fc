#include "css/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace css {

bool GradCheckReport::ok() const {
  return std::all_of(params.begin(), params.end(), [](const ParamCheck& p) { return p.passed; });
}

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& p : params) worst = std::max(worst, p.max_rel_error);
  return worst;
}

void GradCheckReport::print(std::ostream& os) const {
  for (const auto& p : params) {
    os << (p.passed ? "ok   " : "FAIL ") << p.name << " entries=" << p.entries_checked
       << " max_rel_err=" << p.max_rel_error;
    if (!p.passed) {
      os << " at[" << p.worst_index << "] analytic=" << p.analytic_at_worst << " numeric=" << p.numeric_at_worst;
    }
    os << '\n';
  }
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double evaluate(const LossBuilder& build) {
  Graph<double> g(GradMode::disabled);
  return build(g).value()[0];
}

}  // namespace

GradCheckReport gradient_check(const LossBuilder& build, ParameterSet<double>& params,
                               const GradCheckOptions& options) {
  params.zero_grad();
  {
    Graph<double> g;
    auto loss = build(g);
    g.backward(loss);
  }

  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    ParamCheck check;
    check.name = p.name;
    const std::size_t n = p.value.size();
    const std::size_t count =
        options.max_entries_per_param == 0 ? n : std::min(n, options.max_entries_per_param);
    for (std::size_t j = 0; j < count; ++j) {
      const std::size_t k = count == n ? j : (j * n) / count;
      const double saved = p.value[k];
      p.value[k] = saved + options.step;
      const double plus = evaluate(build);
      p.value[k] = saved - options.step;
      const double minus = evaluate(build);
      p.value[k] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double analytic = p.grad[k];
      const double err = relative_error(analytic, numeric);
      if (err > check.max_rel_error || check.entries_checked == 0) {
        check.max_rel_error = std::max(check.max_rel_error, err);
        check.worst_index = k;
        check.analytic_at_worst = analytic;
        check.numeric_at_worst = numeric;
      }
      ++check.entries_checked;
    }
    check.passed = check.max_rel_error < options.tolerance;
    report.params.push_back(check);
  }
  return report;
}

}  // namespace css
