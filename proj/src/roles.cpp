#include "netlat/roles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "netlat/errors.hpp"
#include "netlat/rng.hpp"

namespace netlat::roles {

namespace {

std::vector<std::vector<int>> undirected_neighbors(const linegraph::LineGraph& lg) {
  const std::size_t count = lg.lnodes.size();
  std::vector<std::set<int>> nbr(count);
  for (const auto& e : lg.ledges) {
    nbr[static_cast<std::size_t>(e.src)].insert(e.dst);
    nbr[static_cast<std::size_t>(e.dst)].insert(e.src);
  }
  std::vector<std::vector<int>> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i].assign(nbr[i].begin(), nbr[i].end());
  return out;
}

Eigen::MatrixXd prune_correlated(const Eigen::MatrixXd& f) {
  const int rows = static_cast<int>(f.rows());
  const int cols = static_cast<int>(f.cols());
  if (rows < 2) return f;

  Eigen::VectorXd mean = f.colwise().mean();
  Eigen::MatrixXd centered = f.rowwise() - mean.transpose();
  Eigen::VectorXd norm = centered.colwise().norm();

  std::vector<int> kept;
  for (int j = 0; j < cols; ++j) {
    bool duplicate = false;
    for (int i : kept) {
      double corr;
      if (norm(i) < 1e-12 || norm(j) < 1e-12) {
        // constant columns correlate perfectly with each other, not with varying ones
        corr = (norm(i) < 1e-12 && norm(j) < 1e-12) ? 1.0 : 0.0;
      } else {
        corr = centered.col(i).dot(centered.col(j)) / (norm(i) * norm(j));
      }
      if (std::abs(corr) > 0.99) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) kept.push_back(j);
  }
  Eigen::MatrixXd out(rows, static_cast<int>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) out.col(static_cast<int>(j)) = f.col(kept[j]);
  return out;
}

}  // namespace

Eigen::MatrixXd structural_features(const linegraph::LineGraph& lg, int rounds) {
  const int count = static_cast<int>(lg.lnodes.size());
  constexpr int kBase = 5;

  Eigen::MatrixXd base = Eigen::MatrixXd::Zero(count, kBase);
  for (const auto& e : lg.ledges) {
    base(e.dst, 0) += 1.0;       // in-degree
    base(e.src, 1) += 1.0;       // out-degree
    base(e.dst, 2) += e.weight;  // weighted in-degree
    base(e.src, 3) += e.weight;  // weighted out-degree
  }
  const auto neighbors = undirected_neighbors(lg);
  for (int v = 0; v < count; ++v) {
    std::set<int> ego(neighbors[static_cast<std::size_t>(v)].begin(),
                      neighbors[static_cast<std::size_t>(v)].end());
    ego.insert(v);
    int edges = 0;
    for (const auto& e : lg.ledges) {
      if (ego.count(e.src) && ego.count(e.dst)) ++edges;
    }
    base(v, 4) = edges;
  }

  // each round turns the previous block of width p into mean/sum aggregates (2p),
  // giving kBase * (2^(rounds+1) - 1) columns in total
  int total = kBase * ((1 << (rounds + 1)) - 1);
  Eigen::MatrixXd features(count, total);
  features.leftCols(kBase) = base;
  int prev_begin = 0;
  int prev_width = kBase;
  int cursor = kBase;
  for (int r = 0; r < rounds; ++r) {
    for (int v = 0; v < count; ++v) {
      const auto& nbrs = neighbors[static_cast<std::size_t>(v)];
      Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(prev_width);
      for (int u : nbrs) sum += features.block(u, prev_begin, 1, prev_width);
      const Eigen::RowVectorXd avg =
          nbrs.empty() ? Eigen::RowVectorXd::Zero(prev_width).eval()
                       : (sum / static_cast<double>(nbrs.size())).eval();
      features.block(v, cursor, 1, prev_width) = avg;
      features.block(v, cursor + prev_width, 1, prev_width) = sum;
    }
    prev_begin = cursor;
    prev_width *= 2;
    cursor += prev_width;
  }

  return prune_correlated(features);
}

RoleAssignment assign_roles(const Eigen::MatrixXd& features, int n_roles, std::uint64_t seed) {
  const int count = static_cast<int>(features.rows());
  const int dim = static_cast<int>(features.cols());
  if (n_roles < 1) throw ValidationError("assign_roles: n_roles must be >= 1");

  RoleAssignment out;
  out.n_roles = n_roles;
  out.role_of.assign(static_cast<std::size_t>(count), 0);
  if (count == 0) {
    out.effective_roles = 0;
    return out;
  }

  // z-score; constant columns go to zero
  Eigen::MatrixXd z = features;
  for (int j = 0; j < dim; ++j) {
    const double mean = z.col(j).mean();
    z.col(j).array() -= mean;
    const double sd = std::sqrt(z.col(j).squaredNorm() / count);
    if (sd > 1e-12) {
      z.col(j) /= sd;
    } else {
      z.col(j).setZero();
    }
  }

  // sort rows lexicographically; init and sampling run over this order so the
  // result depends only on the multiset of feature vectors
  std::vector<int> sorted(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) sorted[static_cast<std::size_t>(i)] = i;
  std::sort(sorted.begin(), sorted.end(), [&](int a, int b) {
    for (int j = 0; j < dim; ++j) {
      if (z(a, j) != z(b, j)) return z(a, j) < z(b, j);
    }
    return false;
  });

  const int k = std::min(n_roles, count);
  Rng rng(seed);
  Eigen::MatrixXd centers(k, dim);
  centers.row(0) = z.row(sorted[static_cast<std::size_t>(rng.uniform_int(0, count - 1))]);
  Eigen::VectorXd dist2(count);
  int chosen = 1;
  for (; chosen < k; ++chosen) {
    for (int i = 0; i < count; ++i) {
      double best = std::numeric_limits<double>::max();
      for (int c = 0; c < chosen; ++c) {
        best = std::min(best, (z.row(i) - centers.row(c)).squaredNorm());
      }
      dist2(i) = best;
    }
    double total = 0.0;
    for (int pos = 0; pos < count; ++pos) total += dist2(sorted[static_cast<std::size_t>(pos)]);
    if (total <= 0.0) break;  // fewer distinct points than clusters
    const double threshold = rng.uniform() * total;
    double acc = 0.0;
    int pick = sorted.back();
    for (int pos = 0; pos < count; ++pos) {
      acc += dist2(sorted[static_cast<std::size_t>(pos)]);
      if (acc >= threshold) {
        pick = sorted[static_cast<std::size_t>(pos)];
        break;
      }
    }
    centers.row(chosen) = z.row(pick);
  }
  for (int c = chosen; c < k; ++c) centers.row(c) = centers.row(0);

  std::vector<int> assign(static_cast<std::size_t>(count), 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (int i = 0; i < count; ++i) {
      int best = 0;
      double best_d = (z.row(i) - centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (z.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d - 1e-15) {
          best = c;
          best_d = d;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, dim);
    Eigen::VectorXi sizes = Eigen::VectorXi::Zero(k);
    for (int i = 0; i < count; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += z.row(i);
      sizes(assign[static_cast<std::size_t>(i)]) += 1;
    }
    for (int c = 0; c < k; ++c) {
      if (sizes(c) > 0) centers.row(c) = sums.row(c) / sizes(c);
    }
  }

  out.role_of = assign;
  std::set<int> used(assign.begin(), assign.end());
  out.effective_roles = static_cast<int>(used.size());
  return out;
}

RoleAdjacency build_role_adjacency(const linegraph::LineGraph& lg, const RoleAssignment& roles) {
  if (roles.role_of.size() != lg.lnodes.size()) {
    throw ValidationError("build_role_adjacency: assignment does not cover all lnodes");
  }
  std::set<std::pair<int, int>> pairs;
  std::vector<std::vector<int>> bucket(static_cast<std::size_t>(roles.n_roles));
  for (const auto& traj : lg.trajectories) {
    for (auto& b : bucket) b.clear();
    for (int v : traj) bucket[static_cast<std::size_t>(roles.role_of[static_cast<std::size_t>(v)])].push_back(v);
    for (const auto& b : bucket) {
      for (std::size_t i = 0; i < b.size(); ++i) {
        for (std::size_t j = i + 1; j < b.size(); ++j) {
          const int lo = std::min(b[i], b[j]);
          const int hi = std::max(b[i], b[j]);
          if (lo != hi) pairs.insert({lo, hi});
        }
      }
    }
  }
  RoleAdjacency adj;
  adj.pairs.assign(pairs.begin(), pairs.end());
  return adj;
}

}  // namespace netlat::roles
