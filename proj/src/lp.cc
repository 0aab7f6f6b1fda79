#include "hercules/lp.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "hercules/error.h"

namespace hercules {

void LinearProgram::add_row(std::vector<double> coeffs, RowSense s, double rhs, std::string name) {
  a.push_back(std::move(coeffs));
  sense.push_back(s);
  b.push_back(rhs);
  row_names.push_back(std::move(name));
}

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
  }
  return "?";
}

namespace {

constexpr double kPivotEps = 1e-11;

class Tableau {
 public:
  // Rows 0..m-1 are constraints, row m is the objective (reduced costs, and
  // -z in the last column).
  Tableau(int m, int cols) : m_(m), cols_(cols), t_((m + 1) * (cols + 1), 0.0), basis_(m, -1) {}

  double& at(int r, int c) { return t_[static_cast<std::size_t>(r) * (cols_ + 1) + c]; }
  double& rhs(int r) { return at(r, cols_); }
  int& basis(int r) { return basis_[r]; }
  int rows() const { return m_; }
  int cols() const { return cols_; }

  void pivot(int pr, int pc) {
    const double p = at(pr, pc);
    for (int c = 0; c <= cols_; ++c) at(pr, c) /= p;
    at(pr, pc) = 1.0;
    for (int r = 0; r <= m_; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (int c = 0; c <= cols_; ++c) at(r, c) -= f * at(pr, c);
      at(r, pc) = 0.0;
    }
    basis_[pr] = pc;
  }

  // Bland's rule over columns with allowed[c]. Returns false when unbounded.
  bool optimize(const std::vector<bool>& allowed, double tol, int& iterations) {
    for (;;) {
      int enter = -1;
      for (int c = 0; c < cols_; ++c) {
        if (allowed[c] && at(m_, c) < -tol) {
          enter = c;
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < m_; ++r) {
        const double v = at(r, enter);
        if (v <= kPivotEps) continue;
        const double ratio = rhs(r) / v;
        const double slack = 1e-12 * std::max(1.0, std::abs(ratio));
        if (leave < 0 || ratio < best - slack) {
          best = ratio;
          leave = r;
        } else if (ratio <= best + slack && basis_[r] < basis_[leave]) {
          leave = r;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
      ++iterations;
    }
  }

 private:
  int m_, cols_;
  std::vector<double> t_;
  std::vector<int> basis_;
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp) {
  const int n = lp.cols(), m = lp.rows();
  if (static_cast<int>(lp.a.size()) != m || static_cast<int>(lp.sense.size()) != m) {
    throw PreconditionError("linear program: row arrays disagree in length");
  }
  for (int i = 0; i < m; ++i) {
    if (static_cast<int>(lp.a[i].size()) != n) {
      throw PreconditionError(fmt::format("linear program: row {} has {} coefficients, expected {}", i,
                                          lp.a[i].size(), n));
    }
    if (!std::isfinite(lp.b[i])) throw PreconditionError(fmt::format("linear program: rhs {} not finite", i));
    for (double v : lp.a[i]) {
      if (!std::isfinite(v)) throw PreconditionError(fmt::format("linear program: row {} not finite", i));
    }
  }
  for (double v : lp.c) {
    if (!std::isfinite(v)) throw PreconditionError("linear program: objective not finite");
  }

  // Normalize to b >= 0.
  std::vector<int> flip(m, 1);
  std::vector<RowSense> sense = lp.sense;
  for (int i = 0; i < m; ++i) {
    if (lp.b[i] < 0.0) {
      flip[i] = -1;
      if (sense[i] == RowSense::kLe) sense[i] = RowSense::kGe;
      else if (sense[i] == RowSense::kGe) sense[i] = RowSense::kLe;
    }
  }
  // Column layout: structural, one slack or surplus per inequality row, one
  // artificial per row (slack rows keep theirs at zero and never use it).
  std::vector<int> slack_col(m, -1), art_col(m, -1);
  int cols = n;
  for (int i = 0; i < m; ++i) {
    if (sense[i] != RowSense::kEq) slack_col[i] = cols++;
  }
  for (int i = 0; i < m; ++i) art_col[i] = cols++;

  Tableau t(m, cols);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) t.at(i, j) = flip[i] * lp.a[i][j];
    if (slack_col[i] >= 0) t.at(i, slack_col[i]) = sense[i] == RowSense::kLe ? 1.0 : -1.0;
    t.at(i, art_col[i]) = 1.0;
    t.rhs(i) = flip[i] * lp.b[i];
    t.basis(i) = sense[i] == RowSense::kLe ? slack_col[i] : art_col[i];
  }

  double scale = 1.0;
  for (double v : lp.b) scale = std::max(scale, std::abs(v));
  double cscale = 1.0;
  for (double v : lp.c) cscale = std::max(cscale, std::abs(v));
  const double feas_tol = 1e-9 * scale;

  LpSolution sol;
  std::vector<bool> allowed(cols, true);
  for (int i = 0; i < m; ++i) {
    if (sense[i] == RowSense::kLe) allowed[art_col[i]] = false;
  }

  // Phase one: minimize the sum of artificials in the basis.
  for (int c = 0; c <= cols; ++c) t.at(m, c) = 0.0;
  for (int i = 0; i < m; ++i) {
    if (t.basis(i) != art_col[i]) continue;
    for (int c = 0; c <= cols; ++c) {
      if (c < cols && c >= art_col[0]) continue;
      t.at(m, c) -= t.at(i, c);
    }
  }
  if (!t.optimize(allowed, 1e-12, sol.iterations)) {
    throw InternalError("linear program: phase one unbounded");
  }
  if (-t.rhs(m) > feas_tol) {
    sol.status = LpStatus::kInfeasible;
    for (int i = 0; i < m; ++i) {
      const int bv = t.basis(i);
      if (bv >= art_col[0] && t.rhs(i) > feas_tol) sol.infeasible_rows.push_back(bv - art_col[0]);
    }
    std::sort(sol.infeasible_rows.begin(), sol.infeasible_rows.end());
    return sol;
  }
  // Drive zero artificials out; rows that cannot pivot are redundant.
  for (int i = 0; i < m; ++i) {
    if (t.basis(i) < art_col[0]) continue;
    for (int c = 0; c < art_col[0]; ++c) {
      if (std::abs(t.at(i, c)) > 1e-9) {
        t.pivot(i, c);
        break;
      }
    }
  }
  for (int i = 0; i < m; ++i) allowed[art_col[i]] = false;

  // Phase two: reduced costs of the real objective.
  for (int c = 0; c <= cols; ++c) t.at(m, c) = c < n ? lp.c[c] : 0.0;
  for (int i = 0; i < m; ++i) {
    const int bv = t.basis(i);
    const double cb = bv < n ? lp.c[bv] : 0.0;
    if (cb == 0.0) continue;
    for (int c = 0; c <= cols; ++c) t.at(m, c) -= cb * t.at(i, c);
  }
  if (!t.optimize(allowed, 1e-12 * cscale, sol.iterations)) {
    sol.status = LpStatus::kUnbounded;
    return sol;
  }

  sol.status = LpStatus::kOptimal;
  sol.x.assign(n, 0.0);
  for (int i = 0; i < m; ++i) {
    if (t.basis(i) < n) sol.x[t.basis(i)] = std::max(0.0, t.rhs(i));
  }
  sol.objective = 0.0;
  for (int j = 0; j < n; ++j) sol.objective += lp.c[j] * sol.x[j];
  // Each row's artificial column is a unit column with zero cost, so its
  // reduced cost is -y_i for the normalized row.
  sol.duals.assign(m, 0.0);
  for (int i = 0; i < m; ++i) sol.duals[i] = -t.at(m, art_col[i]) * flip[i];
  return sol;
}

std::vector<std::string> verify_optimality(const LinearProgram& lp, const LpSolution& sol, double tol) {
  std::vector<std::string> out;
  if (sol.status != LpStatus::kOptimal) {
    out.push_back(fmt::format("status is {}", to_string(sol.status)));
    return out;
  }
  const int n = lp.cols(), m = lp.rows();
  double scale = 1.0;
  for (double v : lp.b) scale = std::max(scale, std::abs(v));
  for (double v : lp.c) scale = std::max(scale, std::abs(v));
  scale = std::max(scale, std::abs(sol.objective));
  const double t = tol * scale;
  for (int j = 0; j < n; ++j) {
    if (sol.x[j] < -t) out.push_back(fmt::format("x[{}] = {} < 0", j, sol.x[j]));
  }
  for (int i = 0; i < m; ++i) {
    double lhs = 0.0;
    for (int j = 0; j < n; ++j) lhs += lp.a[i][j] * sol.x[j];
    const double r = lhs - lp.b[i];
    const double y = sol.duals[i];
    switch (lp.sense[i]) {
      case RowSense::kLe:
        if (r > t) out.push_back(fmt::format("row {} exceeds its bound by {}", i, r));
        if (y > t) out.push_back(fmt::format("dual {} = {} has the wrong sign", i, y));
        break;
      case RowSense::kGe:
        if (r < -t) out.push_back(fmt::format("row {} short of its bound by {}", i, -r));
        if (y < -t) out.push_back(fmt::format("dual {} = {} has the wrong sign", i, y));
        break;
      case RowSense::kEq:
        if (std::abs(r) > t) out.push_back(fmt::format("row {} off its target by {}", i, r));
        break;
    }
    if (std::abs(y * r) > t) out.push_back(fmt::format("row {} slack {} with price {}", i, r, y));
  }
  for (int j = 0; j < n; ++j) {
    double red = lp.c[j];
    for (int i = 0; i < m; ++i) red -= lp.a[i][j] * sol.duals[i];
    if (red < -t) out.push_back(fmt::format("column {} reduced cost {} < 0", j, red));
    if (std::abs(red * sol.x[j]) > t) out.push_back(fmt::format("column {} slack {} at x = {}", j, red, sol.x[j]));
  }
  return out;
}

}  // namespace hercules
