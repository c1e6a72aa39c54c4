#include "planemerge/solver.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "planemerge/error.h"

namespace planemerge {
namespace {

using Vec = Eigen::VectorXd;

struct Incidence {
  int edge;
  int other;
};

// Edges at each node split into those to lower and to higher ids, each in
// increasing edge order.
struct Topology {
  std::vector<std::vector<Incidence>> lower, higher;
  std::vector<double> gamma;
  std::vector<std::vector<int>> chains;  // node ids along each chain
  std::vector<std::vector<int>> chain_edges;
};

Topology BuildTopology(const MrfProblem& p) {
  const size_t n = p.nodes.size();
  Topology t;
  t.lower.resize(n);
  t.higher.resize(n);
  for (size_t e = 0; e < p.edges.size(); ++e) {
    const auto [a, b] = p.edges[e];
    t.higher[static_cast<size_t>(a)].push_back({static_cast<int>(e), b});
    t.lower[static_cast<size_t>(b)].push_back({static_cast<int>(e), a});
  }
  t.gamma.resize(n);
  for (size_t s = 0; s < n; ++s) {
    t.gamma[s] = 1.0 / static_cast<double>(std::max<size_t>(
                           1, std::max(t.lower[s].size(), t.higher[s].size())));
  }

  // Chains: at every node the k-th incoming edge continues into the k-th
  // outgoing one, so node s lies on max(in, out) chains.
  std::vector<int> slot_in(p.edges.size());
  for (size_t s = 0; s < n; ++s) {
    for (size_t k = 0; k < t.lower[s].size(); ++k) slot_in[static_cast<size_t>(t.lower[s][k].edge)] = static_cast<int>(k);
  }
  for (size_t s = 0; s < n; ++s) {
    if (t.lower[s].empty() && t.higher[s].empty()) {
      t.chains.push_back({static_cast<int>(s)});
      t.chain_edges.emplace_back();
      continue;
    }
    // Chains start at s through outgoing slots with no incoming partner,
    // or end at s through incoming slots with no outgoing partner and no
    // predecessor chain (handled by walking from the start).
    for (size_t k = t.lower[s].size(); k < t.higher[s].size(); ++k) {
      std::vector<int> nodes{static_cast<int>(s)};
      std::vector<int> edges;
      int e = t.higher[s][k].edge;
      while (true) {
        edges.push_back(e);
        const int next = p.edges[static_cast<size_t>(e)].second;
        nodes.push_back(next);
        const size_t slot = static_cast<size_t>(slot_in[static_cast<size_t>(e)]);
        const auto& out = t.higher[static_cast<size_t>(next)];
        if (slot >= out.size()) break;
        e = out[slot].edge;
      }
      t.chains.push_back(std::move(nodes));
      t.chain_edges.push_back(std::move(edges));
    }
  }
  return t;
}

// out(y) = min_x [node(x) + table(x, y)] when forward, else min_x [node(x) + table(y, x)].
void MinConvolve(const Vec& node, const Eigen::MatrixXd& table, bool forward, Vec& out) {
  const Eigen::Index L = node.size();
  out.resize(L);
  for (Eigen::Index y = 0; y < L; ++y) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index x = 0; x < L; ++x) {
      const double v = node(x) + (forward ? table(x, y) : table(y, x));
      best = std::min(best, v);
    }
    out(y) = best;
  }
}

class Trws {
 public:
  explicit Trws(const MrfProblem& p) : p_(p), t_(BuildTopology(p)) {
    const Eigen::Index L = p.label_count;
    up_.assign(p.edges.size(), Vec::Zero(L));    // a -> b, function of x_b
    down_.assign(p.edges.size(), Vec::Zero(L));  // b -> a, function of x_a
  }

  Vec Belief(size_t s) const {
    Vec b = p_.unary.row(static_cast<Eigen::Index>(s)).transpose();
    for (const auto& in : t_.lower[s]) b += up_[static_cast<size_t>(in.edge)];
    for (const auto& out : t_.higher[s]) b += down_[static_cast<size_t>(out.edge)];
    return b;
  }

  void ForwardPass() {
    Vec tmp;
    for (size_t s = 0; s < p_.nodes.size(); ++s) {
      if (t_.higher[s].empty()) continue;
      const Vec b = Belief(s) * t_.gamma[s];
      for (const auto& out : t_.higher[s]) {
        const size_t e = static_cast<size_t>(out.edge);
        MinConvolve(b - down_[e], p_.pairwise[e], true, tmp);
        up_[e] = tmp.array() - tmp.minCoeff();
      }
    }
  }

  void BackwardPass() {
    Vec tmp;
    for (size_t s = p_.nodes.size(); s-- > 0;) {
      if (t_.lower[s].empty()) continue;
      const Vec b = Belief(s) * t_.gamma[s];
      for (const auto& in : t_.lower[s]) {
        const size_t e = static_cast<size_t>(in.edge);
        MinConvolve(b - up_[e], p_.pairwise[e], false, tmp);
        down_[e] = tmp.array() - tmp.minCoeff();
      }
    }
  }

  double Bound() const {
    std::vector<Vec> node(p_.nodes.size());
    for (size_t s = 0; s < node.size(); ++s) node[s] = Belief(s) * t_.gamma[s];
    double total = 0.0;
    Vec acc, tmp;
    for (size_t c = 0; c < t_.chains.size(); ++c) {
      const auto& nodes = t_.chains[c];
      acc = node[static_cast<size_t>(nodes[0])];
      for (size_t k = 0; k < t_.chain_edges[c].size(); ++k) {
        const size_t e = static_cast<size_t>(t_.chain_edges[c][k]);
        MinConvolve(acc - down_[e], p_.pairwise[e], true, tmp);
        acc = tmp - up_[e] + node[static_cast<size_t>(nodes[k + 1])];
      }
      total += acc.minCoeff();
    }
    return total;
  }

  // Labels nodes in order, conditioning on already decoded lower neighbours.
  std::vector<int> Decode() const {
    std::vector<int> x(p_.nodes.size(), 0);
    for (size_t s = 0; s < x.size(); ++s) {
      Vec b = p_.unary.row(static_cast<Eigen::Index>(s)).transpose();
      for (const auto& in : t_.lower[s]) {
        b += p_.pairwise[static_cast<size_t>(in.edge)].row(x[static_cast<size_t>(in.other)]).transpose();
      }
      for (const auto& out : t_.higher[s]) b += down_[static_cast<size_t>(out.edge)];
      Eigen::Index best = 0;
      b.minCoeff(&best);
      x[s] = static_cast<int>(best);
    }
    return x;
  }

  // Same, but visiting nodes breadth first over the graph and conditioning on
  // every decoded neighbour. Index order can start many disconnected fronts
  // that settle exactly tied labels differently.
  std::vector<int> DecodeBreadthFirst() const {
    const size_t n = p_.nodes.size();
    std::vector<int> x(n, -1);
    std::vector<bool> queued(n, false);
    std::queue<size_t> q;
    for (size_t root = 0; root < n; ++root) {
      if (queued[root]) continue;
      queued[root] = true;
      q.push(root);
      while (!q.empty()) {
        const size_t s = q.front();
        q.pop();
        Vec b = p_.unary.row(static_cast<Eigen::Index>(s)).transpose();
        for (const auto& in : t_.lower[s]) {
          const size_t e = static_cast<size_t>(in.edge);
          const int xo = x[static_cast<size_t>(in.other)];
          if (xo >= 0) {
            b += p_.pairwise[e].row(xo).transpose();
          } else {
            b += up_[e];
          }
        }
        for (const auto& out : t_.higher[s]) {
          const size_t e = static_cast<size_t>(out.edge);
          const int xo = x[static_cast<size_t>(out.other)];
          if (xo >= 0) {
            b += p_.pairwise[e].col(xo);
          } else {
            b += down_[e];
          }
        }
        // Near-ties go to the lowest label so duplicate labels settle alike.
        const double tie = b.minCoeff() + 1e-6 * std::max(1.0, std::abs(b.minCoeff()));
        Eigen::Index best = 0;
        while (!(b(best) <= tie)) ++best;
        x[s] = static_cast<int>(best);
        for (const auto* side : {&t_.lower[s], &t_.higher[s]}) {
          for (const auto& inc : *side) {
            const size_t o = static_cast<size_t>(inc.other);
            if (!queued[o]) {
              queued[o] = true;
              q.push(o);
            }
          }
        }
      }
    }
    return x;
  }

 private:
  const MrfProblem& p_;
  Topology t_;
  std::vector<Vec> up_, down_;
};

}  // namespace

SolveReport TrwsSolve(const MrfProblem& problem, const SolverConfig& cfg) {
  ValidateProblem(problem);
  if (cfg.max_iters < 1 || !(cfg.tol >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "solver needs max_iters >= 1 and tol >= 0");
  }
  SolveReport report;
  if (problem.nodes.empty()) {
    report.converged = true;
    return report;
  }
  Trws trws(problem);
  report.energy = std::numeric_limits<double>::infinity();
  auto consider = [&](std::vector<int> x) {
    const double e = TotalEnergy(problem, x);
    if (e < report.energy) {
      report.energy = e;
      report.labeling = std::move(x);
    }
  };
  if (!problem.initial.empty()) consider(problem.initial);

  for (int it = 0; it < cfg.max_iters; ++it) {
    trws.ForwardPass();
    trws.BackwardPass();
    const double bound = trws.Bound();
    consider(trws.Decode());
    consider(trws.DecodeBreadthFirst());
    report.iterations = it + 1;
    const bool flat = !report.lower_bounds.empty() &&
                      bound - report.lower_bounds.back() <=
                          cfg.tol * std::max(1.0, std::abs(bound));
    report.lower_bounds.push_back(bound);
    if (flat || report.energy - bound <= cfg.tol * std::max(1.0, std::abs(bound))) {
      report.converged = true;
      break;
    }
  }
  return report;
}

std::vector<int> BruteForceMap(const MrfProblem& problem) {
  ValidateProblem(problem);
  const size_t n = problem.nodes.size();
  const double count = std::pow(static_cast<double>(problem.label_count), static_cast<double>(n));
  if (count > 1e7) throw Error(ErrorCode::kTooLarge, "too many labelings to enumerate");
  std::vector<int> x(n, 0), best = x;
  double best_e = std::numeric_limits<double>::infinity();
  while (true) {
    const double e = TotalEnergy(problem, x);
    if (e < best_e) {
      best_e = e;
      best = x;
    }
    // Lexicographic successor: last node varies fastest.
    size_t k = n;
    while (k > 0 && x[k - 1] == problem.label_count - 1) x[--k] = 0;
    if (k == 0) break;
    ++x[k - 1];
  }
  return best;
}

}  // namespace planemerge
