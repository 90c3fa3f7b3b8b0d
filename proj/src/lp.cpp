#include "lp.hpp"

#include <cmath>
#include <limits>

namespace ilab::detail {

namespace {

constexpr double kEps = 1e-12;

struct Tableau {
  int m = 0;     // constraint rows
  int cols = 0;  // variables (without rhs)
  std::vector<double> t;  // (m + 1) x (cols + 1); last row is the objective
  std::vector<int> basis;

  double& at(int r, int c) { return t[static_cast<std::size_t>(r) * (cols + 1) + c]; }
  double& rhs(int r) { return at(r, cols); }

  void pivot(int pr, int pc) {
    const double inv = 1.0 / at(pr, pc);
    for (int c = 0; c <= cols; ++c) at(pr, c) *= inv;
    at(pr, pc) = 1.0;
    for (int r = 0; r <= m; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (int c = 0; c <= cols; ++c) at(r, c) -= f * at(pr, c);
      at(r, pc) = 0.0;
    }
    basis[pr] = pc;
  }

  // Minimizes the objective row (stored as reduced costs). `allowed` masks
  // entering columns. Dantzig pricing, falling back to Bland's rule after a
  // run of degenerate pivots. Returns false if unbounded or out of budget.
  bool run(const std::vector<char>& allowed) {
    const long budget = 50L * (m + cols) + 1000;
    int degenerate = 0;
    for (long iter = 0; iter < budget; ++iter) {
      const bool bland = degenerate > 50;
      int pc = -1;
      double most = -kEps;
      for (int c = 0; c < cols; ++c) {
        if (!allowed[c] || at(m, c) >= most) continue;
        pc = c;
        if (bland) break;
        most = at(m, c);
      }
      if (pc < 0) return true;
      int pr = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < m; ++r) {
        const double a = at(r, pc);
        if (a <= 1e-11) continue;
        const double ratio = std::max(0.0, rhs(r)) / a;
        if (ratio < best - kEps || (std::abs(ratio - best) <= kEps && pr >= 0 && basis[r] < basis[pr])) {
          best = ratio;
          pr = r;
        }
      }
      if (pr < 0) return false;
      degenerate = best <= kEps ? degenerate + 1 : 0;
      pivot(pr, pc);
    }
    return false;
  }
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp) {
  const int n = lp.num_vars;
  const int mu = static_cast<int>(lp.a_ub.size());
  const int me = static_cast<int>(lp.a_eq.size());
  const int m = mu + me;
  // Columns: x (n), slacks (mu), artificials (m).
  Tableau tab;
  tab.m = m;
  tab.cols = n + mu + m;
  tab.t.assign(static_cast<std::size_t>(m + 1) * (tab.cols + 1), 0.0);
  tab.basis.assign(m, -1);
  for (int r = 0; r < m; ++r) {
    const bool ub = r < mu;
    const std::vector<double>& row = ub ? lp.a_ub[r] : lp.a_eq[r - mu];
    double b = ub ? lp.b_ub[r] : lp.b_eq[r - mu];
    const double sign = b < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) tab.at(r, j) = sign * row[j];
    if (ub) tab.at(r, n + r) = sign;
    tab.at(r, n + mu + r) = 1.0;
    tab.rhs(r) = sign * b;
    tab.basis[r] = n + mu + r;
  }
  // Phase 1: minimize the sum of artificials.
  for (int r = 0; r < m; ++r)
    for (int c = 0; c <= tab.cols; ++c)
      if (c < n + mu || c == tab.cols) tab.at(m, c) -= tab.at(r, c);
  std::vector<char> allowed(tab.cols, 1);
  LpSolution out;
  if (!tab.run(allowed)) return out;
  if (-tab.rhs(m) > 1e-9) return out;  // infeasible
  // Drive remaining artificials out of the basis.
  for (int r = 0; r < m; ++r) {
    if (tab.basis[r] < n + mu) continue;
    for (int c = 0; c < n + mu; ++c)
      if (std::abs(tab.at(r, c)) > 1e-9) {
        tab.pivot(r, c);
        break;
      }
  }
  for (int c = n + mu; c < tab.cols; ++c) allowed[c] = 0;
  // Phase 2 objective in reduced form.
  for (int c = 0; c <= tab.cols; ++c) tab.at(m, c) = 0.0;
  for (int j = 0; j < n; ++j) tab.at(m, j) = lp.c[j];
  for (int r = 0; r < m; ++r) {
    const int b = tab.basis[r];
    if (b >= n) continue;
    const double f = tab.at(m, b);
    if (f == 0.0) continue;
    for (int c = 0; c <= tab.cols; ++c) tab.at(m, c) -= f * tab.at(r, c);
  }
  if (!tab.run(allowed)) return out;
  out.optimal = true;
  out.x.assign(n, 0.0);
  for (int r = 0; r < m; ++r)
    if (tab.basis[r] < n) out.x[tab.basis[r]] = tab.rhs(r);
  out.objective = 0.0;
  for (int j = 0; j < n; ++j) out.objective += lp.c[j] * out.x[j];
  return out;
}

}  // namespace ilab::detail
