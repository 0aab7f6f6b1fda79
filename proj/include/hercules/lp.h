#pragma once

// Dense two-phase primal simplex with Bland's rule:
//   minimize c'x  subject to  A_i x (<=|>=|=) b_i,  x >= 0.

#include <string>
#include <vector>

namespace hercules {

enum class RowSense { kLe, kGe, kEq };

struct LinearProgram {
  std::vector<double> c;
  std::vector<std::vector<double>> a;  // rows x c.size()
  std::vector<double> b;
  std::vector<RowSense> sense;
  std::vector<std::string> row_names;  // optional; used in reports

  int rows() const { return static_cast<int>(b.size()); }
  int cols() const { return static_cast<int>(c.size()); }
  void add_row(std::vector<double> coeffs, RowSense s, double rhs, std::string name = "");
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

const char* to_string(LpStatus s);

struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  std::vector<double> x;
  double objective = 0.0;
  // Row prices: y_i >= 0 on >= rows, <= 0 on <= rows, free on = rows, with
  // c - A'y >= 0.
  std::vector<double> duals;
  // Rows whose phase-one artificial stayed positive: the ones that could not
  // be met together.
  std::vector<int> infeasible_rows;
  int iterations = 0;
};

// Throws PreconditionError on malformed dimensions or non-finite data.
LpSolution solve_lp(const LinearProgram& lp);

// Primal feasibility, dual feasibility and complementary slackness within
// `tol` (scaled by the data magnitude). Empty when the solution checks out.
std::vector<std::string> verify_optimality(const LinearProgram& lp, const LpSolution& sol,
                                           double tol = 1e-7);

}  // namespace hercules
