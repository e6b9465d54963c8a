#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <filesystem>
#include <limits>

#include "maskwave/errors.hpp"
#include "maskwave/rng.hpp"
#include "maskwave/svm.hpp"

using namespace maskwave;

namespace {

// --- brute-force dual oracle -------------------------------------------
// Enumerates every {0, C, free} pattern of the box constraints, solves the
// equality-constrained stationarity system on the free set, and keeps the
// best feasible objective. Exact for n <= 8 up to linear-solve precision.

bool solve_linear(std::vector<std::vector<double>> a, std::vector<double>& b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-12) return false;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t i = 0; i < n; ++i) b[i] /= a[i][i];
  return true;
}

double oracle_dual_objective(const std::vector<std::vector<double>>& x,
                             const std::vector<int>& y, double c,
                             double gamma) {
  const std::size_t n = x.size();
  std::vector<std::vector<double>> q(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      q[i][j] = y[i] * y[j] * svm::kernel_rbf(x[i], x[j], gamma);

  auto objective = [&](const std::vector<double>& alpha) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += alpha[i];
      for (std::size_t j = 0; j < n; ++j)
        s -= 0.5 * alpha[i] * alpha[j] * q[i][j];
    }
    return s;
  };

  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> pattern(n, 0);  // 0 -> alpha=0, 1 -> alpha=C, 2 -> free
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= 3;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t rem = code;
    for (std::size_t i = 0; i < n; ++i) {
      pattern[i] = static_cast<int>(rem % 3);
      rem /= 3;
    }
    std::vector<std::size_t> free;
    std::vector<double> alpha(n, 0.0);
    double clamped_y_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pattern[i] == 1) {
        alpha[i] = c;
        clamped_y_sum += c * y[i];
      } else if (pattern[i] == 2) {
        free.push_back(i);
      }
    }
    if (free.empty()) {
      if (std::abs(clamped_y_sum) > 1e-9) continue;
      best = std::max(best, objective(alpha));
      continue;
    }
    // stationarity on the free set with multiplier nu:
    //   sum_j q[f][j] alpha_j - 1 + nu*y_f = 0, plus y'alpha = 0
    const std::size_t m = free.size();
    std::vector<std::vector<double>> a(m + 1, std::vector<double>(m + 1, 0.0));
    std::vector<double> b(m + 1, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t s = 0; s < m; ++s) a[r][s] = q[free[r]][free[s]];
      a[r][m] = y[free[r]];
      double rhs = 1.0;
      for (std::size_t j = 0; j < n; ++j)
        if (pattern[j] == 1) rhs -= q[free[r]][j] * c;
      b[r] = rhs;
    }
    for (std::size_t s = 0; s < m; ++s) a[m][s] = y[free[s]];
    b[m] = -clamped_y_sum;
    if (!solve_linear(a, b)) continue;
    bool ok = true;
    for (std::size_t s = 0; s < m; ++s) {
      if (!(b[s] > -1e-9 && b[s] < c + 1e-9)) {
        ok = false;
        break;
      }
      alpha[free[s]] = std::clamp(b[s], 0.0, c);
    }
    if (!ok) continue;
    best = std::max(best, objective(alpha));
  }
  return best;
}

// Plain double-loop decision function, independent of predict().
double oracle_decision(const svm::SvmModel& model,
                       const std::vector<double>& q) {
  double f = model.bias;
  for (std::size_t s = 0; s < model.support_vectors.size(); ++s) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double d = model.support_vectors[s][i] - q[i];
      d2 += d * d;
    }
    f += model.coefficients[s] * std::exp(-model.gamma * d2);
  }
  return f;
}

struct RandomProblem {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
};

RandomProblem random_problem(Rng& rng, int max_n = 8) {
  RandomProblem p;
  const int n = static_cast<int>(rng.uniform_int(2, max_n));
  const int dim = static_cast<int>(rng.uniform_int(1, 3));
  for (int i = 0; i < n; ++i) {
    std::vector<double> row(static_cast<std::size_t>(dim));
    for (auto& v : row) v = rng.uniform(-1.0, 1.0);
    p.x.push_back(std::move(row));
    p.y.push_back(i % 2 == 0 ? 1 : -1);  // both classes always present
  }
  return p;
}

// Jacobi eigenvalue sweep for small symmetric matrices.
std::vector<double> sym_eigenvalues(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
    if (off < 1e-22) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-18) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a[i][i];
  return eig;
}

}  // namespace

TEST_CASE("kernel_rbf basics") {
  const std::vector<double> u{0.3, -0.7, 1.1};
  CHECK(svm::kernel_rbf(u, u, 0.01) == doctest::Approx(1.0).epsilon(1e-15));
  const std::vector<double> zero{0.0}, one{1.0}, two{0.0, 1.0};
  CHECK(svm::kernel_rbf(zero, one, 1.0) ==
        doctest::Approx(0.367879441171442).epsilon(1e-9));
  CHECK_THROWS_AS(svm::kernel_rbf(two, one, 1.0), ShapeError);
  CHECK_THROWS_AS(svm::kernel_rbf(zero, one, 0.0), ParameterError);

  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(4), b(4);
    for (auto& v : a) v = rng.uniform(-2, 2);
    for (auto& v : b) v = rng.uniform(-2, 2);
    const double g = rng.uniform(0.05, 2.0);
    CHECK(std::abs(svm::kernel_rbf(a, b, g) - svm::kernel_rbf(b, a, g)) <
          1e-15);
  }
}

TEST_CASE("two-point problem: symmetric alphas and midpoint boundary") {
  const std::vector<std::vector<double>> x{{0.0}, {2.0}};
  const std::vector<int> y{1, -1};
  svm::SolveInfo info;
  const auto model = svm::train_svm(x, y, {0.5, 1e6}, &info);
  REQUIRE(info.alpha.size() == 2);
  CHECK(info.alpha[0] == doctest::Approx(info.alpha[1]).epsilon(1e-9));
  const auto pred = svm::predict(model, {{1.0}, {0.9}, {1.1}});
  CHECK(std::abs(pred.margins[0]) < 1e-6);
  CHECK(pred.margins[1] > 0.0);
  CHECK(pred.margins[2] < 0.0);
}

TEST_CASE("six-point 2-D dual objective matches the brute-force oracle") {
  const std::vector<std::vector<double>> x{{0.0, 0.0}, {0.4, 0.1},
                                           {0.1, 0.5}, {1.0, 1.0},
                                           {1.2, 0.8}, {0.9, 1.3}};
  const std::vector<int> y{1, 1, 1, -1, -1, -1};
  for (double c : {0.5, 5.0}) {
    svm::SolveInfo info;
    svm::train_svm(x, y, {0.7, c}, &info);
    const double want = oracle_dual_objective(x, y, c, 0.7);
    CHECK(info.dual_objective == doctest::Approx(want).epsilon(1e-6));
  }
}

TEST_CASE("random small problems: oracle equivalence, KKT, feasibility") {
  Rng rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    const auto p = random_problem(rng);
    const double gamma = rng.uniform(0.1, 2.0);
    const double c = std::pow(10.0, rng.uniform(-1.0, 1.0));
    svm::SolveInfo info;
    const auto model = svm::train_svm(p.x, p.y, {gamma, c}, &info);

    const double want = oracle_dual_objective(p.x, p.y, c, gamma);
    CHECK(std::abs(info.dual_objective - want) <= 1e-6);
    CHECK(info.kkt_violation <= 1e-3);

    double y_alpha = 0.0;
    for (std::size_t i = 0; i < info.alpha.size(); ++i) {
      CHECK(info.alpha[i] >= 0.0);
      CHECK(info.alpha[i] <= c);
      y_alpha += info.alpha[i] * p.y[i];
    }
    CHECK(std::abs(y_alpha) <= 1e-8);
    CHECK(model.support_vectors.size() <= p.x.size());
  }
}

TEST_CASE("duplicating every training point keeps the decision pattern") {
  // Invariance holds when the box bound stays inactive: the RBF kernel is
  // strictly positive definite, so the combined weight per unique point is
  // unique and the decision function cannot move. A binding C would change
  // capacity under duplication.
  Rng rng(7);
  const auto p = random_problem(rng, 6);
  auto x2 = p.x;
  x2.insert(x2.end(), p.x.begin(), p.x.end());
  auto y2 = p.y;
  y2.insert(y2.end(), p.y.begin(), p.y.end());

  const svm::KernelParams params{0.8, 1e6};
  svm::SolveInfo info;
  const auto m1 = svm::train_svm(p.x, p.y, params, &info);
  for (double a : info.alpha) CHECK(a < params.c);  // bound inactive
  const auto m2 = svm::train_svm(x2, y2, params);

  Rng probe_rng(8);
  std::vector<std::vector<double>> probes;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> q(p.x[0].size());
    for (auto& v : q) v = probe_rng.uniform(-1.5, 1.5);
    probes.push_back(std::move(q));
  }
  const auto pr1 = svm::predict(m1, probes);
  const auto pr2 = svm::predict(m2, probes);
  CHECK(pr1.labels == pr2.labels);
}

TEST_CASE("separable problem: support vectors sit on the margin") {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    x.push_back({rng.uniform(-1.0, -0.5), rng.uniform(-1.0, 1.0)});
    y.push_back(1);
    x.push_back({rng.uniform(0.5, 1.0), rng.uniform(-1.0, 1.0)});
    y.push_back(-1);
  }
  const auto model = svm::train_svm(x, y, {0.5, 1e5});
  const auto pred = svm::predict(model, model.support_vectors);
  for (std::size_t s = 0; s < pred.margins.size(); ++s) {
    const int want = model.coefficients[s] > 0 ? 1 : -1;
    CHECK(pred.labels[s] == want);
    CHECK(std::abs(pred.margins[s]) >= 1.0 - 1e-6);
  }
}

TEST_CASE("predict: empty query set and dimension mismatch") {
  const std::vector<std::vector<double>> x{{0.0}, {1.0}};
  const std::vector<int> y{1, -1};
  const auto model = svm::train_svm(x, y, {1.0, 1.0});
  const auto pred = svm::predict(model, {});
  CHECK(pred.labels.empty());
  CHECK(pred.margins.empty());
  CHECK_THROWS_AS(svm::predict(model, {{1.0, 2.0}}), ShapeError);
}

TEST_CASE("predict agrees with a double-loop decision oracle") {
  Rng rng(11);
  const auto p = random_problem(rng, 8);
  const auto model = svm::train_svm(p.x, p.y, {0.6, 3.0});
  std::vector<std::vector<double>> probes;
  for (int i = 0; i < 20; ++i) {
    std::vector<double> q(p.x[0].size());
    for (auto& v : q) v = rng.uniform(-2.0, 2.0);
    probes.push_back(std::move(q));
  }
  const auto pred = svm::predict(model, probes);
  for (std::size_t i = 0; i < probes.size(); ++i)
    CHECK(std::abs(pred.margins[i] - oracle_decision(model, probes[i])) <
          1e-10);
}

TEST_CASE("train_svm error paths") {
  CHECK_THROWS_AS(svm::train_svm({{0.0}}, {1}, {1.0, 1.0}),
                  DegenerateDataError);
  CHECK_THROWS_AS(svm::train_svm({{0.0}, {1.0}}, {1, 2}, {1.0, 1.0}),
                  ParameterError);
  CHECK_THROWS_AS(svm::train_svm({{0.0}, {1.0}}, {1, -1}, {0.0, 1.0}),
                  ParameterError);
}

TEST_CASE("tune_c: full grid table, tie break toward the smaller C") {
  // separable data: every C reaches 100 dev UAR, so the smallest C wins
  std::vector<std::vector<double>> train_x, dev_x;
  std::vector<int> train_y, dev_y;
  Rng rng(21);
  for (int i = 0; i < 8; ++i) {
    train_x.push_back({rng.uniform(-1.0, -0.6)});
    train_y.push_back(1);
    train_x.push_back({rng.uniform(0.6, 1.0)});
    train_y.push_back(-1);
    dev_x.push_back({rng.uniform(-1.0, -0.6)});
    dev_y.push_back(1);
    dev_x.push_back({rng.uniform(0.6, 1.0)});
    dev_y.push_back(-1);
  }
  const std::vector<double> grid{1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3};
  const auto result = svm::tune_c(train_x, train_y, dev_x, dev_y, 1.0, grid);
  CHECK(result.table.size() == 7);
  CHECK(result.best_c == doctest::Approx(1e-3));
  for (const auto& row : result.table) CHECK(row.dev_uar >= 50.0);

  const auto single = svm::tune_c(train_x, train_y, dev_x, dev_y, 1.0, {5.0});
  CHECK(single.best_c == doctest::Approx(5.0));
  CHECK(single.table.size() == 1);
}

TEST_CASE("gram matrix of random samples is positive semidefinite") {
  Rng rng(31);
  const int n = 12;
  std::vector<std::vector<double>> x;
  for (int i = 0; i < n; ++i) {
    std::vector<double> row(6);
    for (auto& v : row) v = rng.uniform(-3.0, 3.0);
    x.push_back(std::move(row));
  }
  std::vector<std::vector<double>> gram(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      gram[i][j] = svm::kernel_rbf(x[i], x[j], 0.3);
  for (double eig : sym_eigenvalues(gram)) CHECK(eig >= -1e-8);
}

TEST_CASE("SVM1 round trip") {
  Rng rng(41);
  const auto p = random_problem(rng, 6);
  const auto model = svm::train_svm(p.x, p.y, {0.5, 2.0});
  const auto path = std::filesystem::temp_directory_path() / "mw_test.svm1";
  svm::write_svm(path, model);
  const auto back = svm::read_svm(path);
  CHECK(back.gamma == model.gamma);
  CHECK(back.bias == model.bias);
  REQUIRE(back.support_vectors.size() == model.support_vectors.size());
  for (std::size_t s = 0; s < back.support_vectors.size(); ++s) {
    CHECK(back.coefficients[s] == model.coefficients[s]);
    for (std::size_t i = 0; i < back.support_vectors[s].size(); ++i)
      CHECK(back.support_vectors[s][i] ==
            static_cast<double>(
                static_cast<float>(model.support_vectors[s][i])));
  }
  std::filesystem::remove(path);
}
