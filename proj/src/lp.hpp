#pragma once

#include <vector>

namespace ilab::detail {

// minimize c'x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.
struct LinearProgram {
  int num_vars = 0;
  std::vector<double> c;
  std::vector<std::vector<double>> a_ub;
  std::vector<double> b_ub;
  std::vector<std::vector<double>> a_eq;
  std::vector<double> b_eq;
};

struct LpSolution {
  bool optimal = false;
  std::vector<double> x;
  double objective = 0.0;
};

// Dense two-phase tableau simplex with Bland's rule.
LpSolution solve_lp(const LinearProgram& lp);

}  // namespace ilab::detail
