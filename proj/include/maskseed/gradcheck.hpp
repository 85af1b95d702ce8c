#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "maskseed/rng.hpp"
#include "maskseed/tensor.hpp"

namespace maskseed::nn {

// A parameter tensor paired with the analytic gradient to verify.
struct GradCheckTarget {
  Tensor<double>* value;
  const Tensor<double>* grad;
};

// Central finite differences in f64 over sampled coordinates. The function
// must be deterministic (dropout off, fixed rng). Returns
// max |analytic − numeric| / max(|analytic|, |numeric|, 1e-8).
//
// Coordinates that land within epsilon of a ReLU zero or pooling tie see a
// spurious one-sided difference; those artifacts vanish once epsilon drops
// below the distance to the kink, while a genuine gradient bug stays put. So
// when a coordinate looks bad, the step is shrunk a few times and the error
// kept only if it refuses to converge.
inline double grad_check(const std::function<double()>& f,
                         const std::vector<GradCheckTarget>& targets, double epsilon, Rng& rng,
                         int samples_per_tensor = 12) {
  double worst = 0.0;
  for (const auto& t : targets) {
    const std::size_t n = t.value->numel();
    const int samples = std::min<std::size_t>(n, static_cast<std::size_t>(samples_per_tensor));
    for (int s = 0; s < samples; ++s) {
      const std::size_t i =
          samples == static_cast<int>(n) ? static_cast<std::size_t>(s) : rng.uniform_below(n);
      const double saved = t.value->data[i];
      const double analytic = t.grad->data[i];
      auto rel_error_at = [&](double eps) {
        t.value->data[i] = saved + eps;
        const double f_plus = f();
        t.value->data[i] = saved - eps;
        const double f_minus = f();
        t.value->data[i] = saved;
        const double numeric = (f_plus - f_minus) / (2.0 * eps);
        const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
        return std::fabs(analytic - numeric) / denom;
      };
      double eps = epsilon;
      double err = rel_error_at(eps);
      for (int refine = 0; refine < 3 && err >= 1e-5; ++refine) {
        eps /= 8;
        err = std::min(err, rel_error_at(eps));  // a real mismatch stays put
      }
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace maskseed::nn
