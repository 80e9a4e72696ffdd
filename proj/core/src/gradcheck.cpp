#include "pmseg/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace pmseg {
namespace {

double evaluate(const RecordedFn& fn, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<NodeId> ids;
  ids.reserve(params.size());
  for (const Tensor& p : params) ids.push_back(tape.variable(p));
  return tape.value(fn(tape, ids)).item();
}

}  // namespace

GradcheckResult finite_difference_check(const RecordedFn& fn, std::vector<Tensor> params,
                                        const GradcheckOptions& options) {
  if (!(options.step > 0.0)) throw std::invalid_argument("finite_difference_check: step must be > 0");

  Tape tape;
  if (options.fault) tape.inject_backward_fault(options.fault->first, options.fault->second);
  std::vector<NodeId> ids;
  for (const Tensor& p : params) ids.push_back(tape.variable(p));
  const NodeId root = fn(tape, ids);
  tape.backward(root);

  GradcheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Tensor analytic = tape.grad(ids[p]);
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double orig = params[p][i];
      params[p][i] = orig + options.step;
      const double up = evaluate(fn, params);
      params[p][i] = orig - options.step;
      const double down = evaluate(fn, params);
      params[p][i] = orig;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[i];
      const double err = std::abs(a - numeric) / std::max(1e-12, std::abs(a) + std::abs(numeric));
      if (err > result.max_rel_error || (p == 0 && i == 0)) result = {err, p, i, a, numeric};
    }
  }
  return result;
}

}  // namespace pmseg
