#include "erot/exact_ot.hpp"

#include "erot/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace erot {

namespace {

struct Cell {
  int i, j;
  double flow;
};

// Transportation simplex on a dense n x m problem with a spanning-tree basis of
// n + m - 1 cells. Tree nodes: rows 0..n-1, columns n..n+m-1.
class TransportSimplex {
 public:
  TransportSimplex(const Matrix& c, const Vector& a, const Vector& b) : c_(c), n_(c.rows()), m_(c.cols()) {
    northwest_corner(a, b);
    scale_ = 1.0 + c_.cwiseAbs().maxCoeff();
  }

  int run() {
    int pivots = 0, degenerate_run = 0;
    const long long cap = 50LL * (n_ + m_) * (n_ + m_) + 1000;
    for (;;) {
      compute_potentials();
      const bool bland = degenerate_run > 50;
      int ei = -1, ej = -1;
      double best = -1e-12 * scale_;
      for (int i = 0; i < n_ && !(bland && ei >= 0); ++i) {
        for (int j = 0; j < m_; ++j) {
          const double d = c_(i, j) - u_[i] - v_[j];
          if (d < best) {
            ei = i;
            ej = j;
            if (bland) break;
            best = d;
          }
        }
      }
      if (ei < 0) return pivots;
      const bool moved = pivot(ei, ej);
      degenerate_run = moved ? 0 : degenerate_run + 1;
      if (++pivots > cap) throw Error(ErrorCode::NonConvergence, "transportation simplex exceeded its pivot budget");
    }
  }

  const std::vector<Cell>& basis() const { return basis_; }
  const Vector& u() const { return u_; }
  const Vector& v() const { return v_; }

 private:
  void northwest_corner(Vector a, Vector b) {
    int i = 0, j = 0;
    while (true) {
      const double x = std::min(a[i], b[j]);
      basis_.push_back({i, j, x});
      a[i] -= x;
      b[j] -= x;
      if (i == n_ - 1 && j == m_ - 1) break;
      if (j == m_ - 1 || (i < n_ - 1 && a[i] <= b[j])) {
        ++i;
      } else {
        ++j;
      }
    }
    // The last cell absorbs the rounding drift between total supply and demand.
  }

  std::vector<std::vector<int>> adjacency() const {
    std::vector<std::vector<int>> adj(n_ + m_);
    for (int k = 0; k < static_cast<int>(basis_.size()); ++k) {
      adj[basis_[k].i].push_back(k);
      adj[n_ + basis_[k].j].push_back(k);
    }
    return adj;
  }

  void compute_potentials() {
    const auto adj = adjacency();
    u_ = Vector::Zero(n_);
    v_ = Vector::Zero(m_);
    std::vector<char> seen(n_ + m_, 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    while (!q.empty()) {
      const int node = q.front();
      q.pop();
      for (int k : adj[node]) {
        const Cell& cell = basis_[k];
        const int other = node < n_ ? n_ + cell.j : cell.i;
        if (seen[other]) continue;
        seen[other] = 1;
        if (node < n_) {
          v_[cell.j] = c_(cell.i, cell.j) - u_[cell.i];
        } else {
          u_[cell.i] = c_(cell.i, cell.j) - v_[cell.j];
        }
        q.push(other);
      }
    }
  }

  // Returns true when the pivot moved a positive amount of mass.
  bool pivot(int ei, int ej) {
    const auto adj = adjacency();
    const int start = ei, goal = n_ + ej;
    std::vector<int> parent_edge(n_ + m_, -1), parent(n_ + m_, -1);
    std::vector<char> seen(n_ + m_, 0);
    std::queue<int> q;
    q.push(start);
    seen[start] = 1;
    while (!q.empty() && !seen[goal]) {
      const int node = q.front();
      q.pop();
      for (int k : adj[node]) {
        const Cell& cell = basis_[k];
        const int other = node < n_ ? n_ + cell.j : cell.i;
        if (seen[other]) continue;
        seen[other] = 1;
        parent[other] = node;
        parent_edge[other] = k;
        q.push(other);
      }
    }
    // Edges from the entering row to the entering column; the first is a
    // donor (-), then signs alternate.
    std::vector<int> path;
    for (int node = goal; node != start; node = parent[node]) path.push_back(parent_edge[node]);
    std::reverse(path.begin(), path.end());
    int leave = -1;
    double theta = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const Cell& cell = basis_[path[k]];
      const bool better =
          leave < 0 || cell.flow < theta ||
          (cell.flow == theta && (cell.i * m_ + cell.j) < (basis_[leave].i * m_ + basis_[leave].j));
      if (better) {
        theta = cell.flow;
        leave = path[k];
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      Cell& cell = basis_[path[k]];
      cell.flow += (k % 2 == 0) ? -theta : theta;
    }
    basis_[leave] = {ei, ej, theta};
    return theta > 0.0;
  }

  const Matrix& c_;
  int n_, m_;
  double scale_ = 1.0;
  std::vector<Cell> basis_;
  Vector u_, v_;
};

bool connected(int n, int m, const std::vector<Cell>& cells) {
  std::vector<int> parent(n + m);
  for (int k = 0; k < n + m; ++k) parent[k] = k;
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int components = n + m;
  for (const auto& cell : cells) {
    const int a = find(cell.i), b = find(n + cell.j);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

}  // namespace

OTSolution exact_ot_small(const DiscreteMeasure& r, const DiscreteMeasure& s, const Matrix& cost) {
  if (cost.rows() != r.size() || cost.cols() != s.size())
    throw Error(ErrorCode::SpaceMismatch, "cost shape differs from the measures");
  if (r.size() > kExactOtMaxSize || s.size() > kExactOtMaxSize)
    throw Error(ErrorCode::TooLarge, "exact OT oracle is limited to " + std::to_string(kExactOtMaxSize) +
                                         " atoms per side");
  const std::vector<int> I = r.support();
  const std::vector<int> J = s.support();
  const int n = static_cast<int>(I.size()), m = static_cast<int>(J.size());
  Matrix c(n, m);
  Vector a(n), b(m);
  for (int p = 0; p < n; ++p) a[p] = r[I[p]];
  for (int q = 0; q < m; ++q) b[q] = s[J[q]];
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < m; ++q) c(p, q) = cost(I[p], J[q]);

  TransportSimplex simplex(c, a, b);
  OTSolution out;
  out.pivots = simplex.run();

  out.plan = Matrix::Zero(r.size(), s.size());
  std::vector<Cell> positive;
  for (const auto& cell : simplex.basis()) {
    out.plan(I[cell.i], J[cell.j]) += cell.flow;
    if (cell.flow > 1e-14) positive.push_back(cell);
  }
  out.value = (out.plan.array() * cost.array()).sum();
  out.unique_potentials = connected(n, m, positive);

  out.alpha0 = Vector::Zero(r.size());
  out.beta0 = Vector::Zero(s.size());
  for (int p = 0; p < n; ++p) out.alpha0[I[p]] = simplex.u()[p];
  for (int q = 0; q < m; ++q) out.beta0[J[q]] = simplex.v()[q];
  // Zero-mass atoms: largest values keeping alpha0 + beta0 <= c.
  for (int y = 0; y < s.size(); ++y) {
    if (s[y] > 0.0) continue;
    double best = std::numeric_limits<double>::infinity();
    for (int x : I) best = std::min(best, cost(x, y) - out.alpha0[x]);
    out.beta0[y] = best;
  }
  for (int x = 0; x < r.size(); ++x) {
    if (r[x] > 0.0) continue;
    double best = std::numeric_limits<double>::infinity();
    for (int y = 0; y < s.size(); ++y) best = std::min(best, cost(x, y) - out.beta0[y]);
    out.alpha0[x] = best;
  }
  return out;
}

OTSolution exact_ot_small(const DiscreteMeasure& r, const DiscreteMeasure& s, const CostModel& model) {
  return exact_ot_small(r, s, model.cost);
}

GapReport vanishing_reg_gap(const DiscreteMeasure& r, const DiscreteMeasure& s, const CostModel& model,
                            const std::vector<double>& lambdas, const SolverConfig& cfg) {
  GapReport rep;
  rep.ot = exact_ot_small(r, s, model).value;
  rep.entropy = entropy_pair(r, s);
  rep.all_hold = true;
  const double tol = 1e-9 * (1.0 + std::abs(rep.ot));
  for (double lambda : lambdas) {
    const SinkhornSolution sol = solve(r, s, model, lambda, cfg);
    GapEntry e;
    e.lambda = lambda;
    e.ot = rep.ot;
    e.erot = sol.value;
    e.sinkhorn_cost = sol.cost_part;
    e.cost_gap = sol.cost_part - rep.ot;
    e.value_gap = sol.value - rep.ot;
    e.bound = lambda * rep.entropy;
    e.holds = e.cost_gap >= -tol && e.cost_gap <= e.value_gap + tol && e.value_gap <= e.bound + tol;
    rep.all_hold = rep.all_hold && e.holds;
    rep.entries.push_back(e);
  }
  return rep;
}

}  // namespace erot
