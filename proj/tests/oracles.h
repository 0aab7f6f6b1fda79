#pragma once

// Independent oracles shared by the unit tests and the acceptance run. None
// of these call into the code they check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hercules/lp.h"
#include "hercules/provisioner.h"

namespace oracle {

struct VertexResult {
  bool feasible = false;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<double> x;
  std::int64_t bases = 0;
};

// Minimum of c'x over the vertices of {A x (sense) b, x >= 0}, by solving
// every choice of n tight constraints. Valid for bounded feasible regions.
inline VertexResult vertex_enumeration(const hercules::LinearProgram& lp, double tol = 1e-9) {
  const int n = lp.cols();
  const int r = lp.rows();
  // Constraint k < r is row k; k >= r is x_{k - r} >= 0.
  std::vector<int> eq_rows;
  std::vector<int> free_rows;
  for (int i = 0; i < r; ++i) {
    (lp.sense[i] == hercules::RowSense::kEq ? eq_rows : free_rows).push_back(i);
  }
  for (int j = 0; j < n; ++j) free_rows.push_back(r + j);
  VertexResult out;
  if (n == 0) {
    out.feasible = true;
    out.objective = 0.0;
    for (int i = 0; i < r; ++i) {
      const double b = lp.b[i];
      const bool ok = lp.sense[i] == hercules::RowSense::kLe ? 0.0 <= b + tol
                      : lp.sense[i] == hercules::RowSense::kGe ? 0.0 >= b - tol
                                                               : std::fabs(b) <= tol;
      out.feasible = out.feasible && ok;
    }
    if (!out.feasible) out.objective = std::numeric_limits<double>::infinity();
    return out;
  }
  const int need = n - static_cast<int>(eq_rows.size());
  if (need < 0 || need > static_cast<int>(free_rows.size())) return out;

  auto coeff = [&](int k, int j) { return k < r ? lp.a[k][j] : (k - r == j ? 1.0 : 0.0); };
  auto rhs = [&](int k) { return k < r ? lp.b[k] : 0.0; };

  std::vector<int> pick(eq_rows);
  pick.resize(n);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == need) {
      ++out.bases;
      Eigen::MatrixXd m(n, n);
      Eigen::VectorXd b(n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) m(i, j) = coeff(pick[i], j);
        b(i) = rhs(pick[i]);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
      if (lu.rank() < n) return;
      const Eigen::VectorXd x = lu.solve(b);
      const double xmax = std::max(1.0, x.cwiseAbs().maxCoeff());
      for (int j = 0; j < n; ++j) {
        if (x(j) < -tol * xmax) return;
      }
      // Slack relative to the magnitude of the terms in each row.
      for (int i = 0; i < r; ++i) {
        double lhs = 0.0, mag = 1.0;
        for (int j = 0; j < n; ++j) {
          lhs += lp.a[i][j] * x(j);
          mag += std::fabs(lp.a[i][j] * x(j));
        }
        const double bi = lp.b[i];
        const double slack = tol * (mag + std::fabs(bi));
        if (lp.sense[i] == hercules::RowSense::kLe && lhs > bi + slack) return;
        if (lp.sense[i] == hercules::RowSense::kGe && lhs < bi - slack) return;
        if (lp.sense[i] == hercules::RowSense::kEq && std::fabs(lhs - bi) > slack) return;
      }
      double obj = 0.0;
      for (int j = 0; j < n; ++j) obj += lp.c[j] * x(j);
      if (!out.feasible || obj < out.objective) {
        out.feasible = true;
        out.objective = obj;
        out.x.assign(x.data(), x.data() + n);
      }
      return;
    }
    const int remain = need - depth;
    for (int k = start; k + remain <= static_cast<int>(free_rows.size()); ++k) {
      pick[eq_rows.size() + depth] = free_rows[k];
      rec(k + 1, depth + 1);
    }
  };
  rec(0, 0);
  return out;
}

// Demand rows (capacity covers load * (1 + R)) and availability rows, with
// `rel_tol` slack on demand only.
inline std::vector<std::string> check_feasible(const hercules::ProvisionProblem& p,
                                               const hercules::AllocationMatrix& a, double rel_tol = 1e-9) {
  std::vector<std::string> bad;
  const int H = static_cast<int>(p.types.size());
  const int M = static_cast<int>(p.workloads.size());
  if (static_cast<int>(a.n.size()) != H) return {"shape"};
  for (int h = 0; h < H; ++h) {
    if (static_cast<int>(a.n[h].size()) != M) return {"shape"};
    long used = 0;
    for (int m = 0; m < M; ++m) {
      if (a.n[h][m] < 0) bad.push_back("negative " + p.types[h]);
      if (a.n[h][m] > 0 && !(p.qps[h][m] > 0)) bad.push_back("useless " + p.types[h]);
      used += a.n[h][m];
    }
    if (used > p.availability[h]) bad.push_back("availability " + p.types[h]);
  }
  for (int m = 0; m < M; ++m) {
    double cap = 0.0;
    for (int h = 0; h < H; ++h) cap += p.qps[h][m] * a.n[h][m];
    const double r = p.r_by_workload.empty() ? p.r_percent : p.r_by_workload[m];
    const double need = p.load[m] * (1.0 + r / 100.0);
    if (cap < need - rel_tol * std::max(1.0, need)) bad.push_back("demand " + p.workloads[m]);
  }
  return bad;
}

// Random provisioning instance with up to `max_types` x `max_workloads`.
inline hercules::ProvisionProblem random_problem(std::mt19937_64& rng, int max_types = 4, int max_workloads = 3) {
  std::uniform_int_distribution<int> nh(1, max_types), nm(1, max_workloads), avail(0, 20);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  hercules::ProvisionProblem p;
  const int H = nh(rng), M = nm(rng);
  for (int h = 0; h < H; ++h) p.types.push_back("H" + std::to_string(h));
  for (int m = 0; m < M; ++m) p.workloads.push_back("W" + std::to_string(m));
  p.qps.assign(H, std::vector<double>(M, 0.0));
  p.power.assign(H, std::vector<double>(M, 0.0));
  for (int h = 0; h < H; ++h) {
    p.availability.push_back(avail(rng));
    for (int m = 0; m < M; ++m) {
      if (u(rng) < 0.2) continue;
      p.qps[h][m] = 100.0 + 4900.0 * u(rng);
      p.power[h][m] = 100.0 + 500.0 * u(rng);
    }
  }
  for (int m = 0; m < M; ++m) {
    double cap = 0.0;
    for (int h = 0; h < H; ++h) cap += p.qps[h][m] * p.availability[h];
    p.load.push_back(cap / M * 1.1 * u(rng));
  }
  p.r_percent = 20.0 * u(rng);
  return p;
}

}  // namespace oracle
