#include <doctest.h>

#include <random>
#include <set>

#include "ifsd/box_ops.hpp"
#include "ifsd/matcher.hpp"
#include "support/oracles.hpp"

using namespace ifsd;
using namespace ifsd::matcher;

namespace {

CostMatrix random_matrix(std::mt19937_64& rng, size_t n, size_t m, bool integer) {
  CostMatrix c(n, m);
  std::uniform_real_distribution<double> u(0, 10);
  std::uniform_int_distribution<int> k(0, 4);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < m; ++j) c(i, j) = integer ? k(rng) : u(rng);
  }
  return c;
}

void check_injective(const Assignment& a, size_t m) {
  std::set<int> used;
  for (const int s : a.slot_of_target) {
    CHECK(s >= 0);
    CHECK(static_cast<size_t>(s) < m);
    CHECK(used.insert(s).second);
  }
}

double recompute(const CostMatrix& c, const Assignment& a) {
  double s = 0;
  for (size_t i = 0; i < a.slot_of_target.size(); ++i) s += c(i, static_cast<size_t>(a.slot_of_target[i]));
  return s;
}

}  // namespace

TEST_SUITE("matcher") {
  TEST_CASE("small fixed instances") {
    CostMatrix one(1, 1, 4.0);
    const auto a = hungarian_solve(one);
    CHECK(a.slot_of_target == std::vector<int>{0});
    CHECK(a.total_cost == 4.0);

    CostMatrix eye(3, 3, 1.0);
    for (size_t i = 0; i < 3; ++i) eye(i, i) = 0.0;
    const auto e = hungarian_solve(eye);
    CHECK(e.slot_of_target == std::vector<int>{0, 1, 2});
    CHECK(e.total_cost == 0.0);

    CostMatrix row(1, 2);
    row(0, 0) = 3;
    row(0, 1) = 1;
    const auto b = brute_force_solve(row);
    CHECK(b.slot_of_target == std::vector<int>{1});
    CHECK(b.total_cost == 1.0);
    CHECK(hungarian_solve(row).slot_of_target == std::vector<int>{1});

    const auto empty = brute_force_solve(CostMatrix(0, 3));
    CHECK(empty.slot_of_target.empty());
    CHECK(empty.total_cost == 0.0);
    CHECK(hungarian_solve(CostMatrix(0, 3)).slot_of_target.empty());
  }

  TEST_CASE("ties resolve to the lowest slot") {
    CostMatrix c(2, 4, 1.0);
    const auto a = hungarian_solve(c);
    CHECK(a.slot_of_target == std::vector<int>{0, 1});
    CHECK(hungarian_solve(c).slot_of_target == a.slot_of_target);
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(hungarian_solve(CostMatrix(3, 2)), std::invalid_argument);
    CHECK_THROWS_AS(brute_force_solve(CostMatrix(9, 9)), std::invalid_argument);
  }

  TEST_CASE("agrees with the permutation oracle") {
    std::mt19937_64 rng(42);
    for (int t = 0; t < 300; ++t) {
      const size_t m = 1 + rng() % 7;
      const size_t n = rng() % (m + 1);
      const auto c = random_matrix(rng, n, m, t % 2 == 0);
      const auto h = hungarian_solve(c);
      const auto b = brute_force_solve(c);
      check_injective(h, m);
      check_injective(b, m);
      CHECK(h.slot_of_target.size() == n);
      CHECK(h.total_cost == oracle::min_assignment_cost(c));
      CHECK(b.total_cost == oracle::min_assignment_cost(c));
      CHECK(recompute(c, h) == h.total_cost);
    }
  }

  TEST_CASE("row shift and target permutation") {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 100; ++t) {
      const size_t m = 2 + rng() % 6;
      const size_t n = 1 + rng() % m;
      auto c = random_matrix(rng, n, m, false);
      const auto base = hungarian_solve(c);
      const size_t r = rng() % n;
      auto shifted = c;
      for (size_t j = 0; j < m; ++j) shifted(r, j) += 2.5;
      CHECK(hungarian_solve(shifted).total_cost == doctest::Approx(base.total_cost + 2.5).epsilon(1e-12));

      std::vector<size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      CostMatrix p(n, m);
      for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < m; ++j) p(i, j) = c(perm[i], j);
      }
      const auto pa = hungarian_solve(p);
      CHECK(pa.total_cost == doctest::Approx(base.total_cost).epsilon(1e-12));
      // Continuous random costs have a unique optimum.
      for (size_t i = 0; i < n; ++i) CHECK(pa.slot_of_target[i] == base.slot_of_target[perm[i]]);
    }
  }

  TEST_CASE("cost matrix equals scalar re-evaluation") {
    std::mt19937_64 rng(9);
    torch::manual_seed(9);
    const auto logits = 2 * torch::randn({5, 6}, torch::kFloat64);
    std::vector<geometry::Box> pred;
    for (int j = 0; j < 5; ++j) pred.push_back(oracle::random_box(rng));
    const auto boxes = geometry::boxes_to_tensor(pred, torch::kFloat64);
    GroundTruthSet targets = {{0, oracle::random_box(rng)}, {4, oracle::random_box(rng)},
                              {2, oracle::random_box(rng)}};
    const auto c = cost_matrix(targets, logits, boxes);
    REQUIRE(c.rows() == 3);
    REQUIRE(c.cols() == 5);
    for (size_t i = 0; i < 3; ++i) {
      for (size_t j = 0; j < 5; ++j) {
        std::vector<double> row(6);
        for (int k = 0; k < 6; ++k) row[k] = logits[j][k].item<double>();
        CHECK(c(i, j) == doctest::Approx(oracle::match_cost(targets[i].label, targets[i].box, row, pred[j])).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("cost is monotone in the target probability") {
    const geometry::Box b{0.5, 0.5, 0.2, 0.2};
    double prev = 1e300;
    for (double z = -8; z <= 8; z += 0.5) {
      const std::vector<double> logits = {z, 0.0};
      const double c = match_cost(0, b, logits, b);
      CHECK(c < prev);
      prev = c;
    }
    const std::vector<double> best = {40.0, 0.0};
    CHECK(match_cost(0, b, best, b) < match_cost(0, b, std::vector<double>{10.0, 0.0}, b));
    CHECK_THROWS_AS(match_cost(2, b, best, b), std::invalid_argument);
  }
}
