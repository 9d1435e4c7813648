#include "ifsd/matcher.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ifsd::matcher {

namespace {

constexpr double kLogEps = 1e-8;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double total_of(const CostMatrix& cost, const std::vector<int>& slots) {
  double total = 0.0;
  for (size_t i = 0; i < slots.size(); ++i) {
    total += cost(i, static_cast<size_t>(slots[i]));
  }
  return total;
}

}  // namespace

double match_cost(int64_t target_label, const geometry::Box& target_box,
                  std::span<const double> pred_logits, const geometry::Box& pred_box,
                  const MatchWeights& weights) {
  if (target_label < 0 || static_cast<size_t>(target_label) >= pred_logits.size()) {
    throw std::invalid_argument("match_cost: target label " + std::to_string(target_label) +
                                " outside logit range");
  }
  const double p = sigmoid(pred_logits[static_cast<size_t>(target_label)]);
  const double a = weights.focal.alpha;
  const double g = weights.focal.gamma;
  const double pos = a * std::pow(1.0 - p, g) * -std::log(p + kLogEps);
  const double neg = (1.0 - a) * std::pow(p, g) * -std::log(1.0 - p + kLogEps);
  return weights.cls * (pos - neg) + weights.l1 * geometry::l1_distance(pred_box, target_box) +
         weights.giou * (1.0 - geometry::giou(pred_box, target_box));
}

CostMatrix cost_matrix(const GroundTruthSet& targets, const torch::Tensor& logits,
                       const torch::Tensor& boxes, const MatchWeights& weights) {
  const auto lg = logits.detach().to(torch::kFloat64).contiguous();
  const auto bx = boxes.detach().to(torch::kFloat64).contiguous();
  const size_t m = static_cast<size_t>(lg.size(0));
  const size_t c = static_cast<size_t>(lg.size(1));
  const double* lp = lg.data_ptr<double>();
  const double* bp = bx.data_ptr<double>();
  CostMatrix cost(targets.size(), m);
  for (size_t j = 0; j < m; ++j) {
    const std::span<const double> row(lp + j * c, c);
    const geometry::Box pb{bp[4 * j], bp[4 * j + 1], bp[4 * j + 2], bp[4 * j + 3]};
    for (size_t i = 0; i < targets.size(); ++i) {
      cost(i, j) = match_cost(targets[i].label, targets[i].box, row, pb, weights);
    }
  }
  return cost;
}

Assignment hungarian_solve(const CostMatrix& cost) {
  const size_t n = cost.rows();
  const size_t m = cost.cols();
  if (n > m) {
    throw std::invalid_argument("hungarian_solve: more targets (" + std::to_string(n) +
                                ") than prediction slots (" + std::to_string(m) + ")");
  }
  Assignment out;
  if (n == 0) {
    return out;
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is the virtual source.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<size_t> row_of_col(m + 1, 0), way(m + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const size_t i0 = row_of_col[j0];
      double delta = inf;
      size_t j1 = 0;
      for (size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const size_t j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  out.slot_of_target.assign(n, -1);
  for (size_t j = 1; j <= m; ++j) {
    if (row_of_col[j] != 0) {
      out.slot_of_target[row_of_col[j] - 1] = static_cast<int>(j - 1);
    }
  }
  out.total_cost = total_of(cost, out.slot_of_target);
  return out;
}

namespace {

struct BruteForce {
  const CostMatrix& cost;
  std::vector<int> current;
  std::vector<char> taken;
  Assignment best;
  bool found = false;

  void search(size_t row, double partial) {
    if (row == cost.rows()) {
      if (!found || partial < best.total_cost) {
        best.slot_of_target = current;
        best.total_cost = partial;
        found = true;
      }
      return;
    }
    for (size_t j = 0; j < cost.cols(); ++j) {
      if (taken[j]) continue;
      taken[j] = 1;
      current[row] = static_cast<int>(j);
      search(row + 1, partial + cost(row, j));
      taken[j] = 0;
    }
  }
};

}  // namespace

Assignment brute_force_solve(const CostMatrix& cost) {
  if (cost.rows() > kBruteForceMaxTargets) {
    throw std::invalid_argument("brute_force_solve: at most " +
                                std::to_string(kBruteForceMaxTargets) + " targets");
  }
  if (cost.rows() > cost.cols()) {
    throw std::invalid_argument("brute_force_solve: more targets than prediction slots");
  }
  BruteForce bf{cost, std::vector<int>(cost.rows(), -1), std::vector<char>(cost.cols(), 0), {}};
  bf.search(0, 0.0);
  return bf.best;
}

}  // namespace ifsd::matcher
