#ifndef SUBSPEC_GRADCHECK_HPP_
#define SUBSPEC_GRADCHECK_HPP_

#include "subspec/model.hpp"
#include "subspec/norm.hpp"

namespace subspec {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t trials = 0;
  bool pass = false;
};

// Central-difference check of the analytic backward of one normalization
// layer: scalar loss sum(grad_y * forward(x).y), perturbations of x, gamma
// and beta with step h, relative error max|analytic - fd| / max(1, max|fd|).
GradCheckResult gradcheck_norm(NormKind kind, std::size_t s, AffineType affine,
                               std::size_t trials, std::uint64_t seed, double h = 1e-5,
                               double tol = 1e-6);

}  // namespace subspec

#endif  // SUBSPEC_GRADCHECK_HPP_
