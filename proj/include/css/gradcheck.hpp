#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "css/graph.hpp"

namespace css {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Entries checked per parameter; 0 checks every entry. When limited, the
  // entries are spread evenly across the tensor.
  std::size_t max_entries_per_param = 0;
};

struct ParamCheck {
  std::string name;
  std::size_t entries_checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double tolerance = 0.0;

  bool ok() const;
  double max_rel_error() const;
  void print(std::ostream& os) const;
};

/// |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

/// Builds the loss; must be deterministic and differentiable at the current
/// parameter values.
using LossBuilder = std::function<Var<double>(Graph<double>&)>;

/// Compares reverse-mode gradients of `build` against central differences
/// for every parameter in `params`.
GradCheckReport gradient_check(const LossBuilder& build, ParameterSet<double>& params,
                               const GradCheckOptions& options = {});

}  // namespace css
