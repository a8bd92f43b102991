#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "wcn/model.hpp"

namespace wcn {

enum class LpStatus { optimal, infeasible, unbounded };

enum class RowSense { le, eq, ge };

// Minimize c.x subject to A x {<=,=,>=} b, x >= 0.
struct LpProblem {
  int n = 0;
  std::vector<double> c;
  // Rows are kept sparse so variables may still be added after a row that
  // does not mention them.
  std::vector<std::vector<std::pair<int, double>>> rows;
  std::vector<double> b;
  std::vector<RowSense> sense;

  int add_variable(double cost = 0.0) {
    c.push_back(cost);
    return n++;
  }

  void add_row(const std::vector<std::pair<int, double>>& terms, RowSense s,
               double rhs) {
    rows.push_back(terms);
    sense.push_back(s);
    b.push_back(rhs);
  }
};

struct LpSolution {
  LpStatus status = LpStatus::optimal;
  double objective = 0.0;
  std::vector<double> x;
  std::vector<double> reduced_costs;  // structural columns, at termination
  int iterations = 0;
};

namespace detail {

// Dense tableau with an explicit objective row.  Dantzig pricing, falling
// back to Bland's rule when the objective stalls, which guarantees
// termination on degenerate problems.
class Tableau {
 public:
  Tableau(std::size_t m, std::size_t total_cols)
      : m_(m), cols_(total_cols), a_((m + 1) * (total_cols + 1), 0.0) {}

  double& at(std::size_t r, std::size_t c) { return a_[r * (cols_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const {
    return a_[r * (cols_ + 1) + c];
  }
  double& rhs(std::size_t r) { return a_[r * (cols_ + 1) + cols_]; }
  double rhs(std::size_t r) const { return a_[r * (cols_ + 1) + cols_]; }
  std::size_t obj_row() const { return m_; }

  void pivot(std::size_t pr, std::size_t pc) {
    const double piv = at(pr, pc);
    const double inv = 1.0 / piv;
    double* prow = &a_[pr * (cols_ + 1)];
    for (std::size_t c = 0; c <= cols_; ++c) prow[c] *= inv;
    prow[pc] = 1.0;
    for (std::size_t r = 0; r <= m_; ++r) {
      if (r == pr) continue;
      double* row = &a_[r * (cols_ + 1)];
      const double f = row[pc];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c <= cols_; ++c) row[c] -= f * prow[c];
      row[pc] = 0.0;
    }
  }

 private:
  std::size_t m_, cols_;
  std::vector<double> a_;
};

}  // namespace detail

inline LpSolution solve_lp(const LpProblem& p, double eps = 1e-9) {
  const std::size_t m = p.rows.size();
  const std::size_t n = static_cast<std::size_t>(p.n);

  std::size_t n_slack = 0;
  for (RowSense s : p.sense)
    if (s != RowSense::eq) ++n_slack;

  // Column layout: [structural | slack/surplus | artificial].
  std::vector<double> b(p.b);
  std::vector<int> row_sign(m, 1);
  for (std::size_t r = 0; r < m; ++r)
    if (b[r] < 0.0) {
      b[r] = -b[r];
      row_sign[r] = -1;
    }

  std::size_t n_art = 0;
  std::vector<std::size_t> art_col(m, SIZE_MAX);
  std::vector<std::size_t> slack_col(m, SIZE_MAX);
  {
    std::size_t next = n;
    for (std::size_t r = 0; r < m; ++r) {
      RowSense s = p.sense[r];
      if (row_sign[r] < 0) {
        if (s == RowSense::le)
          s = RowSense::ge;
        else if (s == RowSense::ge)
          s = RowSense::le;
      }
      if (s != RowSense::eq) slack_col[r] = next++;
      const bool needs_art = !(s == RowSense::le);
      if (needs_art) art_col[r] = 0;  // placeholder, assigned below
    }
    for (std::size_t r = 0; r < m; ++r)
      if (art_col[r] != SIZE_MAX) {
        art_col[r] = next++;
        ++n_art;
      }
  }
  const std::size_t total = n + n_slack + n_art;
  detail::Tableau tab(m, total);
  std::vector<std::size_t> basis(m);

  for (std::size_t r = 0; r < m; ++r) {
    const double sgn = static_cast<double>(row_sign[r]);
    for (const auto& [var, coef] : p.rows[r])
      tab.at(r, static_cast<std::size_t>(var)) += sgn * coef;
    tab.rhs(r) = b[r];
    RowSense s = p.sense[r];
    if (row_sign[r] < 0) {
      if (s == RowSense::le)
        s = RowSense::ge;
      else if (s == RowSense::ge)
        s = RowSense::le;
    }
    if (slack_col[r] != SIZE_MAX)
      tab.at(r, slack_col[r]) = (s == RowSense::le) ? 1.0 : -1.0;
    if (art_col[r] != SIZE_MAX) {
      tab.at(r, art_col[r]) = 1.0;
      basis[r] = art_col[r];
    } else {
      basis[r] = slack_col[r];
    }
  }

  std::vector<char> blocked(total, 0);

  auto run_phase = [&](int max_iters, int* iters_out) -> LpStatus {
    const std::size_t orow = tab.obj_row();
    int stall = 0;
    double last_obj = tab.rhs(orow);
    bool bland = false;
    for (int it = 0; it < max_iters; ++it) {
      // entering column
      std::size_t pc = SIZE_MAX;
      if (!bland) {
        double best = -eps;
        for (std::size_t c = 0; c < total; ++c) {
          if (blocked[c]) continue;
          const double rc = tab.at(orow, c);
          if (rc < best) {
            best = rc;
            pc = c;
          }
        }
      } else {
        for (std::size_t c = 0; c < total; ++c) {
          if (blocked[c]) continue;
          if (tab.at(orow, c) < -eps) {
            pc = c;
            break;
          }
        }
      }
      if (pc == SIZE_MAX) {
        *iters_out += it;
        return LpStatus::optimal;
      }
      // leaving row: min ratio, ties by smallest basis index
      std::size_t pr = SIZE_MAX;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < m; ++r) {
        const double a = tab.at(r, pc);
        if (a <= eps) continue;
        const double ratio = tab.rhs(r) / a;
        if (ratio < best_ratio - eps ||
            (ratio < best_ratio + eps &&
             (pr == SIZE_MAX || basis[r] < basis[pr]))) {
          best_ratio = ratio;
          pr = r;
        }
      }
      if (pr == SIZE_MAX) {
        *iters_out += it;
        return LpStatus::unbounded;
      }
      tab.pivot(pr, pc);
      basis[pr] = pc;
      const double obj = tab.rhs(orow);
      if (obj > last_obj - 1e-12) {
        if (++stall > static_cast<int>(2 * (m + total))) bland = true;
      } else {
        stall = 0;
        bland = false;
      }
      last_obj = obj;
    }
    throw EngineError("simplex iteration limit reached");
  };

  LpSolution sol;
  const int cap = 2000 + 200 * static_cast<int>(m + total);

  // Phase 1: minimize the sum of artificials.
  if (n_art > 0) {
    const std::size_t orow = tab.obj_row();
    for (std::size_t r = 0; r < m; ++r) {
      if (art_col[r] == SIZE_MAX) continue;
      // c <= total covers the rhs column as well
      for (std::size_t c = 0; c <= total; ++c)
        tab.at(orow, c) -= tab.at(r, c);
    }
    for (std::size_t r = 0; r < m; ++r)
      if (art_col[r] != SIZE_MAX) tab.at(orow, art_col[r]) = 0.0;
    const LpStatus st = run_phase(cap, &sol.iterations);
    if (st == LpStatus::unbounded)
      throw EngineError("phase-1 subproblem unbounded");
    if (-tab.rhs(orow) > 1e-7) {
      sol.status = LpStatus::infeasible;
      return sol;
    }
    // Drive remaining artificials out of the basis where possible.
    for (std::size_t r = 0; r < m; ++r) {
      if (basis[r] < n + n_slack) continue;
      std::size_t pc = SIZE_MAX;
      for (std::size_t c = 0; c < n + n_slack; ++c)
        if (std::abs(tab.at(r, c)) > eps) {
          pc = c;
          break;
        }
      if (pc != SIZE_MAX) {
        tab.pivot(r, pc);
        basis[r] = pc;
      }
    }
    for (std::size_t c = n + n_slack; c < total; ++c) blocked[c] = 1;
  }

  // Phase 2: real objective, priced out against the current basis.
  {
    const std::size_t orow = tab.obj_row();
    for (std::size_t c = 0; c <= total; ++c) tab.at(orow, c) = 0.0;
    for (std::size_t c = 0; c < n; ++c) tab.at(orow, c) = p.c[c];
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t bcol = basis[r];
      const double cb = bcol < n ? p.c[bcol] : 0.0;
      if (cb == 0.0) continue;
      for (std::size_t c = 0; c <= total; ++c)
        tab.at(orow, c) -= cb * tab.at(r, c);
      tab.at(orow, bcol) = 0.0;
    }
    const LpStatus st = run_phase(cap, &sol.iterations);
    if (st == LpStatus::unbounded) {
      sol.status = LpStatus::unbounded;
      return sol;
    }
  }

  sol.status = LpStatus::optimal;
  sol.x.assign(n, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    if (basis[r] < n) sol.x[basis[r]] = tab.rhs(r);
  sol.objective = 0.0;
  for (std::size_t c = 0; c < n; ++c) sol.objective += p.c[c] * sol.x[c];
  sol.reduced_costs.assign(n, 0.0);
  for (std::size_t c = 0; c < n; ++c)
    sol.reduced_costs[c] = tab.at(tab.obj_row(), c);
  return sol;
}

}  // namespace wcn
