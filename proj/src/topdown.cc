// Copyright 2026 The dasim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dasim/topdown.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "dasim/error.h"

namespace dasim {

namespace internal {

namespace {

constexpr double kSnap = 1e-7;

// Spine depth: nation 0 ... block 5.
int SpineRank(GeoLevel level) {
  const auto& levels = Spine::SpineLevels();
  auto it = std::find(levels.begin(), levels.end(), level);
  if (it == levels.end()) return -1;
  return static_cast<int>(it - levels.begin());
}

double Snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < kSnap ? r : v;
}

// Fractional parts compared on a coarse grid so that solver noise does not
// break index-order ties.
int64_t FracKey(double frac) { return std::llround(frac * 1e6); }

// Weighted least-squares data for one group, flattened.
struct LeastSquares {
  int k = 0;
  int cells = 0;
  const std::vector<Query>* queries = nullptr;
  std::vector<double> weights;  // k x J
  std::vector<double> targets;  // k x J
  double lipschitz = 1.0;
};

LeastSquares MakeLeastSquares(const GroupProblem& p) {
  LeastSquares ls;
  ls.k = static_cast<int>(p.children.size());
  ls.cells = p.queries->schema().size();
  ls.queries = &p.queries->queries();
  const int nq = p.queries->num_queries();
  double max_weight = 0.0;
  for (const NoisyMeasurementSet* m : p.children) {
    for (double v : m->variances) {
      if (v > 0.0) max_weight = std::max(max_weight, 1.0 / v);
    }
  }
  const double exact_weight = max_weight > 0.0 ? 1e4 * max_weight : 1.0;
  ls.weights.resize(static_cast<size_t>(ls.k) * nq);
  ls.targets.resize(ls.weights.size());
  std::vector<double> row_bound(ls.cells);
  ls.lipschitz = 0.0;
  for (int c = 0; c < ls.k; ++c) {
    const NoisyMeasurementSet& m = *p.children[c];
    std::fill(row_bound.begin(), row_bound.end(), 0.0);
    for (int j = 0; j < nq; ++j) {
      const double w = m.variances[j] > 0.0 ? 1.0 / m.variances[j]
                                            : exact_weight;
      ls.weights[c * nq + j] = w;
      ls.targets[c * nq + j] = static_cast<double>(m.values[j]);
      const auto& cells = (*ls.queries)[j].cells;
      for (int32_t i : cells) row_bound[i] += w * cells.size();
    }
    // Gershgorin bound on the largest Hessian eigenvalue.
    for (double b : row_bound) ls.lipschitz = std::max(ls.lipschitz, b);
  }
  if (ls.lipschitz <= 0.0) ls.lipschitz = 1.0;
  return ls;
}

// Returns the objective; writes the gradient when grad is non-null.
double Evaluate(const LeastSquares& ls, std::span<const double> x,
                std::vector<double>* grad) {
  const int nq = static_cast<int>(ls.queries->size());
  double objective = 0.0;
  if (grad) std::fill(grad->begin(), grad->end(), 0.0);
  for (int c = 0; c < ls.k; ++c) {
    const double* xc = x.data() + static_cast<size_t>(c) * ls.cells;
    for (int j = 0; j < nq; ++j) {
      const auto& cells = (*ls.queries)[j].cells;
      double s = 0.0;
      for (int32_t i : cells) s += xc[i];
      const double r = s - ls.targets[c * nq + j];
      const double w = ls.weights[c * nq + j];
      objective += 0.5 * w * r * r;
      if (grad) {
        double* gc = grad->data() + static_cast<size_t>(c) * ls.cells;
        const double wr = w * r;
        for (int32_t i : cells) gc[i] += wr;
      }
    }
  }
  return objective;
}

// Projection onto the feasible set of a group.
class Projector {
 public:
  explicit Projector(const GroupProblem& p)
      : p_(p),
        k_(static_cast<int>(p.children.size())),
        cells_(p.queries->schema().size()) {
    std::vector<char> in_atom(cells_, 0);
    for (const auto& atom : p.atoms) {
      for (int32_t i : atom) in_atom[i] = 1;
    }
    for (int i = 0; i < cells_; ++i) {
      if (!in_atom[i]) free_cells_.push_back(i);
    }
  }

  void operator()(std::vector<double>& x) const {
    const bool root = p_.parent.empty();
    std::vector<double> column(k_);
    for (int i : free_cells_) {
      if (root) {
        if (p_.nonneg) {
          for (int c = 0; c < k_; ++c) {
            x[c * cells_ + i] = std::max(0.0, x[c * cells_ + i]);
          }
        }
        continue;
      }
      for (int c = 0; c < k_; ++c) column[c] = x[c * cells_ + i];
      ProjectSimplex(column, p_.parent[i], p_.nonneg);
      for (int c = 0; c < k_; ++c) x[c * cells_ + i] = column[c];
    }
    for (size_t a = 0; a < p_.atoms.size(); ++a) ProjectAtom(a, x);
  }

 private:
  // Rows fixed by the invariant totals, columns by the parent: Dykstra's
  // alternating projections onto the two families of simplices.
  void ProjectAtom(size_t a, std::vector<double>& x) const {
    const auto& atom = p_.atoms[a];
    const int m = static_cast<int>(atom.size());
    std::vector<double> block(static_cast<size_t>(k_) * m);
    for (int c = 0; c < k_; ++c) {
      for (int j = 0; j < m; ++j) block[c * m + j] = x[c * cells_ + atom[j]];
    }
    auto project_rows = [&](std::vector<double>& b) {
      std::vector<double> row(m);
      for (int c = 0; c < k_; ++c) {
        std::copy_n(b.begin() + c * m, m, row.begin());
        ProjectSimplex(row, p_.atom_totals[c][a], p_.nonneg);
        std::copy_n(row.begin(), m, b.begin() + c * m);
      }
    };
    auto project_cols = [&](std::vector<double>& b) {
      std::vector<double> col(k_);
      for (int j = 0; j < m; ++j) {
        for (int c = 0; c < k_; ++c) col[c] = b[c * m + j];
        ProjectSimplex(col, p_.parent[atom[j]], p_.nonneg);
        for (int c = 0; c < k_; ++c) b[c * m + j] = col[c];
      }
    };
    if (p_.parent.empty()) {
      project_rows(block);
    } else {
      std::vector<double> p(block.size(), 0.0), q(block.size(), 0.0);
      std::vector<double> y(block.size());
      for (int iter = 0; iter < 5000; ++iter) {
        for (size_t t = 0; t < block.size(); ++t) y[t] = block[t] + p[t];
        project_cols(y);
        for (size_t t = 0; t < block.size(); ++t) p[t] = block[t] + p[t] - y[t];
        std::vector<double> next(block.size());
        for (size_t t = 0; t < block.size(); ++t) next[t] = y[t] + q[t];
        project_rows(next);
        double change = 0.0;
        for (size_t t = 0; t < block.size(); ++t) {
          q[t] = y[t] + q[t] - next[t];
          change = std::max(change, std::abs(next[t] - block[t]));
        }
        block.swap(next);
        if (change < 1e-11) break;
      }
    }
    for (int c = 0; c < k_; ++c) {
      for (int j = 0; j < m; ++j) x[c * cells_ + atom[j]] = block[c * m + j];
    }
  }

  const GroupProblem& p_;
  int k_;
  int cells_;
  std::vector<int> free_cells_;
};

}  // namespace

void ProjectSimplex(std::span<double> v, double total, bool nonneg) {
  const size_t n = v.size();
  if (n == 0) return;
  if (!nonneg) {
    const double shift =
        (std::accumulate(v.begin(), v.end(), 0.0) - total) / n;
    for (double& x : v) x -= shift;
    return;
  }
  if (total <= 0.0) {
    std::fill(v.begin(), v.end(), 0.0);
    return;
  }
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (size_t j = 0; j < n; ++j) {
    cumulative += u[j];
    const double candidate = (cumulative - total) / (j + 1);
    if (u[j] - candidate > 0.0) theta = candidate;
  }
  for (double& x : v) x = std::max(x - theta, 0.0);
}

std::vector<int64_t> LargestRemainder(std::span<const double> v,
                                      int64_t total) {
  const size_t n = v.size();
  std::vector<int64_t> out(n);
  std::vector<double> frac(n);
  int64_t floor_sum = 0;
  for (size_t i = 0; i < n; ++i) {
    const double s = Snap(v[i]);
    out[i] = static_cast<int64_t>(std::floor(s));
    frac[i] = s - std::floor(s);
    floor_sum += out[i];
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  int64_t residual = total - floor_sum;
  if (residual >= 0) {
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return FracKey(frac[a]) > FracKey(frac[b]);
    });
    for (size_t t = 0; residual > 0 && n > 0; t = (t + 1) % n, --residual) {
      ++out[order[t]];
    }
  } else {
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return FracKey(frac[a]) < FracKey(frac[b]);
    });
    for (size_t t = 0; residual < 0 && n > 0; t = (t + 1) % n) {
      if (out[order[t]] > 0) {
        --out[order[t]];
        ++residual;
      }
    }
  }
  return out;
}

std::vector<int64_t> ControlledRound(std::span<const double> x, int rows,
                                     int cols,
                                     std::span<const int64_t> row_sums,
                                     std::span<const int64_t> col_sums) {
  std::vector<int64_t> out(static_cast<size_t>(rows) * cols);
  std::vector<double> frac(out.size());
  std::vector<int64_t> row_need(row_sums.begin(), row_sums.end());
  std::vector<int64_t> col_need(col_sums.begin(), col_sums.end());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const size_t t = static_cast<size_t>(r) * cols + c;
      const double s = Snap(x[t]);
      out[t] = static_cast<int64_t>(std::floor(s));
      frac[t] = s - std::floor(s);
      row_need[r] -= out[t];
      col_need[c] -= out[t];
    }
  }
  for (int64_t v : row_need) {
    if (v < 0) throw Error(ErrorCode::kInfeasibleConstraints, "row overfull");
  }
  for (int64_t v : col_need) {
    if (v < 0) throw Error(ErrorCode::kInfeasibleConstraints, "column overfull");
  }

  // Greedy pass over fractional entries, largest first.
  std::vector<size_t> order(out.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return FracKey(frac[a]) > FracKey(frac[b]);
  });
  std::vector<int64_t> flow(out.size(), 0);
  for (size_t t : order) {
    if (frac[t] <= 0.0) break;
    const int r = static_cast<int>(t / cols), c = static_cast<int>(t % cols);
    if (row_need[r] > 0 && col_need[c] > 0) {
      flow[t] = 1;
      --row_need[r];
      --col_need[c];
    }
  }

  // Augmenting paths. Stage 0 only raises fractional entries by one; stage 1
  // may raise any entry.
  for (int stage = 0; stage < 2; ++stage) {
    auto capacity = [&](size_t t) -> int64_t {
      if (stage == 0) return frac[t] > 0.0 ? 1 - flow[t] : 0;
      return std::numeric_limits<int64_t>::max() / 4;
    };
    while (true) {
      int start = -1;
      for (int r = 0; r < rows; ++r) {
        if (row_need[r] > 0) {
          start = r;
          break;
        }
      }
      if (start < 0) break;
      // BFS over rows; forward edges r->c with capacity, backward c->r where
      // flow > 0.
      std::vector<int> col_parent(cols, -1), row_parent(rows, -2);
      row_parent[start] = -1;
      std::deque<int> queue{start};
      int found = -1;
      while (!queue.empty() && found < 0) {
        const int r = queue.front();
        queue.pop_front();
        for (int c = 0; c < cols; ++c) {
          const size_t t = static_cast<size_t>(r) * cols + c;
          if (col_parent[c] >= 0 || capacity(t) <= 0) continue;
          col_parent[c] = r;
          if (col_need[c] > 0) {
            found = c;
            break;
          }
          for (int r2 = 0; r2 < rows; ++r2) {
            if (row_parent[r2] != -2) continue;
            if (flow[static_cast<size_t>(r2) * cols + c] > 0) {
              row_parent[r2] = c;
              queue.push_back(r2);
            }
          }
        }
      }
      if (found < 0) break;
      --row_need[start];
      --col_need[found];
      for (int c = found; c >= 0;) {
        const int r = col_parent[c];
        ++flow[static_cast<size_t>(r) * cols + c];
        const int prev_c = row_parent[r];
        if (prev_c < 0) break;
        --flow[static_cast<size_t>(r) * cols + prev_c];
        c = prev_c;
      }
    }
  }
  for (int64_t v : row_need) {
    if (v != 0) {
      throw Error(ErrorCode::kInfeasibleConstraints,
                  "controlled rounding could not meet row sums");
    }
  }
  for (size_t t = 0; t < out.size(); ++t) out[t] += flow[t];
  return out;
}

double GroupObjective(const GroupProblem& problem, std::span<const double> x) {
  return Evaluate(MakeLeastSquares(problem), x, nullptr);
}

std::vector<double> FitGroup(const GroupProblem& problem) {
  const LeastSquares ls = MakeLeastSquares(problem);
  const Projector project(problem);
  const size_t n = static_cast<size_t>(ls.k) * ls.cells;

  // Start from the detail measurements where present.
  std::vector<double> x(n, 0.0);
  for (int j = 0; j < problem.queries->num_queries(); ++j) {
    const Query& q = problem.queries->queries()[j];
    if (q.group != QueryGroup::kDetail) continue;
    for (int c = 0; c < ls.k; ++c) {
      x[static_cast<size_t>(c) * ls.cells + q.cells.front()] =
          static_cast<double>(problem.children[c]->values[j]);
    }
  }
  project(x);

  std::vector<double> y = x, next(n), grad(n);
  double t = 1.0;
  const double step = 1.0 / ls.lipschitz;
  for (int iter = 0; iter < 20000; ++iter) {
    Evaluate(ls, y, &grad);
    for (size_t i = 0; i < n; ++i) next[i] = y[i] - step * grad[i];
    project(next);
    double change = 0.0, restart = 0.0;
    for (size_t i = 0; i < n; ++i) {
      change = std::max(change, std::abs(next[i] - x[i]));
      restart += (y[i] - next[i]) * (next[i] - x[i]);
    }
    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (restart > 0.0) {
      t_next = 1.0;
      y = next;
    } else {
      const double momentum = (t - 1.0) / t_next;
      for (size_t i = 0; i < n; ++i) y[i] = next[i] + momentum * (next[i] - x[i]);
    }
    x.swap(next);
    t = t_next;
    if (change < 1e-9) break;
  }
  return x;
}


void PolishGroup(const GroupProblem& problem, std::vector<double>& x) {
  const LeastSquares ls = MakeLeastSquares(problem);
  const int k = ls.k, n = ls.cells;
  const int nq = static_cast<int>(ls.queries->size());
  const bool root = problem.parent.empty();
  const bool nonneg = problem.nonneg;

  std::vector<int> atom_of(n, -1);
  for (size_t a = 0; a < problem.atoms.size(); ++a) {
    for (int32_t i : problem.atoms[a]) atom_of[i] = static_cast<int>(a);
  }
  std::vector<std::vector<int>> cell_queries(n);
  for (int j = 0; j < nq; ++j) {
    for (int32_t i : (*ls.queries)[j].cells) cell_queries[i].push_back(j);
  }
  auto w = [&](int c, int j) { return ls.weights[c * nq + j]; };

  std::vector<double> r(static_cast<size_t>(k) * nq);
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < nq; ++j) {
      double s = 0.0;
      for (int32_t i : (*ls.queries)[j].cells) s += x[c * n + i];
      r[c * nq + j] = s - ls.targets[c * nq + j];
    }
  }
  // Objective change for one unit off (down) or onto (up) a cell.
  std::vector<double> down(static_cast<size_t>(k) * n), up(down.size());
  auto refresh = [&](int c) {
    for (int i = 0; i < n; ++i) {
      double d = 0.0, u = 0.0;
      for (int j : cell_queries[i]) {
        d += w(c, j) * (1.0 - 2.0 * r[c * nq + j]);
        u += w(c, j) * (1.0 + 2.0 * r[c * nq + j]);
      }
      down[c * n + i] = d;
      up[c * n + i] = u;
    }
  };
  // Largest weight two distinct cells of child c can share.
  std::vector<double> share_bound(k, 0.0);
  double mean_weight = 0.0;
  for (int c = 0; c < k; ++c) {
    refresh(c);
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j : cell_queries[i]) {
        if ((*ls.queries)[j].cells.size() > 1) s += w(c, j);
      }
      share_bound[c] = std::max(share_bound[c], s);
    }
    for (int j = 0; j < nq; ++j) mean_weight += w(c, j);
  }
  mean_weight /= std::max(1, k * nq);
  const double eps = 1e-9 * mean_weight;

  std::vector<char> mark(nq, 0);
  auto shared = [&](int c, int i, int j) {
    for (int q : cell_queries[i]) mark[q] = 1;
    double s = 0.0;
    for (int q : cell_queries[j]) {
      if (mark[q]) s += w(c, q);
    }
    for (int q : cell_queries[i]) mark[q] = 0;
    return s;
  };
  auto apply = [&](int c, int i, int delta) {
    x[c * n + i] += delta;
    for (int j : cell_queries[i]) r[c * nq + j] += delta;
  };
  auto can_take = [&](int c, int i) { return !nonneg || x[c * n + i] >= 1.0; };

  struct Move {
    double delta = 0.0;
    int c_from = -1, c_to = -1, cell_out = -1, cell_in = -1;
  };
  std::vector<double> b(n);
  for (int pass = 0; pass < 10000; ++pass) {
    Move best;
    best.delta = -eps;
    if (root) {
      for (int i = 0; i < n; ++i) {
        if (atom_of[i] >= 0) continue;
        if (up[i] < best.delta) best = {up[i], -1, 0, -1, i};
        if (can_take(0, i) && down[i] < best.delta) {
          best = {down[i], 0, -1, i, -1};
        }
      }
    } else {
      for (int i = 0; i < n; ++i) {
        if (atom_of[i] >= 0) continue;
        for (int c = 0; c < k; ++c) {
          if (!can_take(c, i)) continue;
          for (int c2 = 0; c2 < k; ++c2) {
            if (c2 == c) continue;
            const double d = down[c * n + i] + up[c2 * n + i];
            if (d < best.delta) best = {d, c, c2, i, i};
          }
        }
      }
    }
    // Exchanges: child c gives cell i and takes cell j; child c2 (c itself at
    // the root) does the reverse. Column and atom sums are unchanged.
    for (int c = 0; c < k; ++c) {
      for (int c2 = root ? c : 0; c2 < (root ? c + 1 : k); ++c2) {
        if (!root && c2 == c) continue;
        const double bound = 2.0 * (share_bound[c] + share_bound[c2]);
        for (int j = 0; j < n; ++j) {
          b[j] = can_take(c2, j) ? down[c2 * n + j] + up[c * n + j]
                                 : std::numeric_limits<double>::infinity();
          if (root) b[j] = up[c * n + j];
        }
        const double b_min = *std::min_element(b.begin(), b.end());
        for (int i = 0; i < n; ++i) {
          if (!can_take(c, i)) continue;
          const double a =
              root ? down[c * n + i] : down[c * n + i] + up[c2 * n + i];
          if (a + b_min - bound >= best.delta) continue;
          for (int j = 0; j < n; ++j) {
            if (a + b[j] - bound >= best.delta) continue;
            if (j == i || atom_of[i] != atom_of[j]) continue;
            if (root && atom_of[i] < 0) continue;
            if (root && !can_take(c, i)) continue;
            double d = a + b[j] - 2.0 * shared(c, i, j);
            if (!root) d -= 2.0 * shared(c2, i, j);
            if (d < best.delta) best = {d, c, c2, i, j};
          }
        }
      }
    }
    if (best.cell_out < 0 && best.cell_in < 0) break;
    if (root && best.c_from < 0) {
      apply(0, best.cell_in, +1);
    } else if (root && best.c_to < 0) {
      apply(0, best.cell_out, -1);
    } else if (root) {
      apply(0, best.cell_out, -1);
      apply(0, best.cell_in, +1);
    } else if (best.cell_out == best.cell_in) {
      apply(best.c_from, best.cell_out, -1);
      apply(best.c_to, best.cell_out, +1);
    } else {
      apply(best.c_from, best.cell_out, -1);
      apply(best.c_from, best.cell_in, +1);
      apply(best.c_to, best.cell_out, +1);
      apply(best.c_to, best.cell_in, -1);
    }
    refresh(std::max(best.c_from, 0));
    if (best.c_to >= 0 && best.c_to != best.c_from) refresh(best.c_to);
  }
}

}  // namespace internal

namespace {

using internal::GroupProblem;

struct InvariantPlan {
  // active[rank]: statistic indices held at that spine depth.
  std::vector<std::vector<int>> active;
};

InvariantPlan PlanInvariants(const PostProcessConfig& config,
                             const AggregationMatrix& stats) {
  InvariantPlan plan;
  const auto& levels = Spine::SpineLevels();
  plan.active.resize(levels.size());
  for (const Invariant& inv : config.invariants) {
    auto it = std::find(levels.begin(), levels.end(), inv.level);
    if (it == levels.end()) {
      throw Error(ErrorCode::kSchemaError,
                  "invariant level " + std::string(LevelName(inv.level)) +
                      " is not on the spine");
    }
    const int stat = stats.IndexOf(inv.statistic);
    for (auto l = levels.begin(); l <= it; ++l) {
      auto& v = plan.active[l - levels.begin()];
      if (std::find(v.begin(), v.end(), stat) == v.end()) v.push_back(stat);
    }
  }
  return plan;
}

// Splits the invariant supports into atoms: each support minus the supports
// nested inside it.
std::vector<std::vector<int32_t>> Atoms(const std::vector<int>& active,
                                        const AggregationMatrix& stats) {
  std::vector<std::vector<char>> supports;
  for (int s : active) {
    std::vector<char> mask(stats.num_cells());
    for (int c = 0; c < stats.num_cells(); ++c) {
      if (stats.row(s).weights[c] != 0 && stats.row(s).weights[c] != 1) {
        throw Error(ErrorCode::kSchemaError,
                    "invariant '" + stats.row(s).label + "' is not 0/1");
      }
      mask[c] = stats.row(s).weights[c] != 0;
    }
    supports.push_back(std::move(mask));
  }
  auto contains = [&](const std::vector<char>& a, const std::vector<char>& b) {
    for (size_t c = 0; c < a.size(); ++c) {
      if (b[c] && !a[c]) return false;
    }
    return true;
  };
  for (size_t a = 0; a < supports.size(); ++a) {
    for (size_t b = a + 1; b < supports.size(); ++b) {
      bool overlap = false;
      for (size_t c = 0; c < supports[a].size(); ++c) {
        overlap |= supports[a][c] && supports[b][c];
      }
      if (overlap && !contains(supports[a], supports[b]) &&
          !contains(supports[b], supports[a])) {
        throw Error(ErrorCode::kSchemaError,
                    "invariant supports must be nested or disjoint");
      }
    }
  }
  std::vector<std::vector<int32_t>> atoms;
  for (size_t a = 0; a < supports.size(); ++a) {
    std::vector<char> own = supports[a];
    for (size_t b = 0; b < supports.size(); ++b) {
      if (a == b || supports[a] == supports[b]) continue;
      if (contains(supports[a], supports[b])) {
        for (size_t c = 0; c < own.size(); ++c) own[c] &= !supports[b][c];
      }
    }
    std::vector<int32_t> cells;
    for (size_t c = 0; c < own.size(); ++c) {
      if (own[c]) cells.push_back(static_cast<int32_t>(c));
    }
    if (!cells.empty() &&
        std::find(atoms.begin(), atoms.end(), cells) == atoms.end()) {
      atoms.push_back(std::move(cells));
    }
  }
  return atoms;
}

std::vector<std::vector<double>> AtomTotals(
    const std::vector<std::vector<int32_t>>& atoms,
    const std::vector<NodeIndex>& nodes, const CefDataset& cef) {
  std::vector<std::vector<double>> totals(nodes.size());
  for (size_t c = 0; c < nodes.size(); ++c) {
    const Histogram& h = cef.at(nodes[c]);
    for (const auto& atom : atoms) {
      int64_t sum = 0;
      for (int32_t i : atom) sum += h[i];
      totals[c].push_back(static_cast<double>(sum));
    }
  }
  return totals;
}

}  // namespace

PostProcessedDataset TopDownPostprocess(const NoisyMeasurements& nms,
                                        const CefDataset& cef,
                                        const QueryMatrix& queries,
                                        const AggregationMatrix& stats,
                                        const PostProcessConfig& config) {
  const Spine& spine = *cef.spine;
  if (nms.by_node.size() != spine.nodes().size()) {
    throw Error(ErrorCode::kCoverageError,
                "noisy measurements do not cover every spine unit");
  }
  if (!(cef.schema == queries.schema()) ||
      stats.num_cells() != cef.schema.size()) {
    throw Error(ErrorCode::kSchemaError, "schema mismatch");
  }
  for (const NoisyMeasurementSet& m : nms.by_node) {
    if (static_cast<int>(m.values.size()) != queries.num_queries() ||
        m.variances.size() != m.values.size()) {
      throw Error(ErrorCode::kCoverageError,
                  "a spine unit is missing query answers");
    }
  }
  const InvariantPlan plan = PlanInvariants(config, stats);
  const int cells = cef.schema.size();
  const auto& levels = Spine::SpineLevels();

  PostProcessedDataset out;
  out.run = nms.run;
  out.node_counts.assign(spine.nodes().size(), {});

  // Root.
  {
    GroupProblem p;
    p.queries = &queries;
    p.children = {&nms.by_node[spine.root()]};
    p.atoms = Atoms(plan.active[0], stats);
    p.atom_totals = AtomTotals(p.atoms, {spine.root()}, cef);
    p.nonneg = config.nonneg;
    std::vector<double> x = internal::FitGroup(p);
    if (config.integerize) {
      std::vector<char> in_atom(cells, 0);
      for (size_t a = 0; a < p.atoms.size(); ++a) {
        const auto& atom = p.atoms[a];
        std::vector<double> v;
        for (int32_t i : atom) {
          v.push_back(x[i]);
          in_atom[i] = 1;
        }
        const auto rounded = internal::LargestRemainder(
            v, static_cast<int64_t>(p.atom_totals[0][a]));
        for (size_t j = 0; j < atom.size(); ++j) {
          x[atom[j]] = static_cast<double>(rounded[j]);
        }
      }
      for (int i = 0; i < cells; ++i) {
        if (in_atom[i]) continue;
        x[i] = std::round(x[i]);
        if (config.nonneg) x[i] = std::max(0.0, x[i]);
      }
      internal::PolishGroup(p, x);
    }
    out.node_counts[spine.root()] = std::move(x);
  }

  for (size_t rank = 1; rank < levels.size(); ++rank) {
    const auto atoms = Atoms(plan.active[rank], stats);
    for (NodeIndex parent : spine.NodesAtLevel(levels[rank - 1])) {
      const std::vector<NodeIndex>& kids = spine.node(parent).children;
      const std::vector<double>& px = out.node_counts[parent];
      if (kids.empty()) continue;
      auto totals = AtomTotals(atoms, kids, cef);

      // The parent's atom sums were fixed one level up; the children's
      // invariant totals must add up to them.
      for (size_t a = 0; a < atoms.size(); ++a) {
        double need = 0.0, have = 0.0;
        for (int32_t i : atoms[a]) need += px[i];
        for (size_t c = 0; c < kids.size(); ++c) {
          have += totals[c][a];
          if (config.nonneg && totals[c][a] < 0) {
            throw Error(ErrorCode::kInfeasibleConstraints,
                        "negative invariant total under " +
                            spine.node(parent).key);
          }
        }
        if (std::abs(need - have) > 1e-6 * std::max(1.0, std::abs(need))) {
          throw Error(ErrorCode::kInfeasibleConstraints,
                      "invariant totals of the children of '" +
                          spine.node(parent).key + "' sum to " +
                          std::to_string(have) + " but the parent holds " +
                          std::to_string(need));
        }
      }
      if (kids.size() == 1) {
        out.node_counts[kids.front()] = px;
        continue;
      }

      GroupProblem p;
      p.queries = &queries;
      for (NodeIndex k : kids) p.children.push_back(&nms.by_node[k]);
      p.parent = px;
      p.atoms = atoms;
      p.atom_totals = totals;
      p.nonneg = config.nonneg;
      std::vector<double> x = internal::FitGroup(p);
      const int k = static_cast<int>(kids.size());

      if (config.integerize) {
        std::vector<char> in_atom(cells, 0);
        for (size_t a = 0; a < atoms.size(); ++a) {
          const auto& atom = atoms[a];
          const int m = static_cast<int>(atom.size());
          std::vector<double> block(static_cast<size_t>(k) * m);
          std::vector<int64_t> row_sums(k), col_sums(m);
          for (int c = 0; c < k; ++c) {
            row_sums[c] = std::llround(totals[c][a]);
            for (int j = 0; j < m; ++j) {
              block[c * m + j] = x[static_cast<size_t>(c) * cells + atom[j]];
            }
          }
          for (int j = 0; j < m; ++j) {
            col_sums[j] = std::llround(px[atom[j]]);
            in_atom[atom[j]] = 1;
          }
          const auto rounded =
              internal::ControlledRound(block, k, m, row_sums, col_sums);
          for (int c = 0; c < k; ++c) {
            for (int j = 0; j < m; ++j) {
              x[static_cast<size_t>(c) * cells + atom[j]] =
                  static_cast<double>(rounded[c * m + j]);
            }
          }
        }
        std::vector<double> column(k);
        for (int i = 0; i < cells; ++i) {
          if (in_atom[i]) continue;
          for (int c = 0; c < k; ++c) {
            column[c] = x[static_cast<size_t>(c) * cells + i];
          }
          const auto rounded =
              internal::LargestRemainder(column, std::llround(px[i]));
          for (int c = 0; c < k; ++c) {
            x[static_cast<size_t>(c) * cells + i] =
                static_cast<double>(rounded[c]);
          }
        }
        internal::PolishGroup(p, x);
      }
      for (int c = 0; c < k; ++c) {
        out.node_counts[kids[c]].assign(
            x.begin() + static_cast<ptrdiff_t>(c) * cells,
            x.begin() + static_cast<ptrdiff_t>(c + 1) * cells);
      }
    }
  }
  return out;
}

std::pair<TopDownRun, TopDownRun> RunTwice(const CefDataset& cef,
                                           const QueryMatrix& queries,
                                           const AggregationMatrix& stats,
                                           const PostProcessConfig& config,
                                           uint64_t seed1, uint64_t seed2) {
  if (seed1 == seed2) {
    throw Error(ErrorCode::kSeedError,
                "independent TopDown runs need distinct seeds");
  }
  TopDownRun first{MakeNoisyMeasurements(cef, queries, seed1), {}};
  first.td = TopDownPostprocess(first.nms, cef, queries, stats, config);
  TopDownRun second{MakeNoisyMeasurements(cef, queries, seed2), {}};
  second.td = TopDownPostprocess(second.nms, cef, queries, stats, config);
  return {std::move(first), std::move(second)};
}

}  // namespace dasim
