#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ncc/clogit.hpp"
#include "ncc/rng.hpp"

using namespace ncc;

namespace {

// design builder: sets as row-major feature lists, case first in each set
MatchedDesign make_design(const std::vector<std::vector<std::vector<double>>>& sets,
                          std::vector<std::string> names = {}) {
  MatchedDesign d;
  size_t p = sets.at(0).at(0).size();
  size_t rows = 0;
  for (const auto& s : sets) rows += s.size();
  d.x.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p));
  int r = 0;
  for (const auto& s : sets) {
    d.set_offsets.push_back(r);
    d.case_rows.push_back(r);
    for (const auto& row : s) {
      for (size_t j = 0; j < p; ++j) d.x(r, static_cast<Eigen::Index>(j)) = row[j];
      ++r;
    }
  }
  d.set_offsets.push_back(r);
  if (names.empty()) {
    for (size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
  }
  d.column_names = std::move(names);
  return d;
}

// simulate 1:m sets from the conditional model itself
MatchedDesign simulate_design(int n_sets, int controls, const Eigen::VectorXd& beta,
                              Rng& rng) {
  const int p = static_cast<int>(beta.size());
  std::vector<std::vector<std::vector<double>>> sets;
  for (int s = 0; s < n_sets; ++s) {
    std::vector<std::vector<double>> rows;
    for (int r = 0; r < controls + 1; ++r) {
      std::vector<double> x(static_cast<size_t>(p));
      for (int j = 0; j < p; ++j) x[static_cast<size_t>(j)] = rng.bernoulli(0.35) ? 1.0 : 0.0;
      rows.push_back(std::move(x));
    }
    // pick the case index by the conditional probability, then rotate it first
    std::vector<double> w(rows.size());
    double total = 0;
    for (size_t r = 0; r < rows.size(); ++r) {
      double s_lin = 0;
      for (int j = 0; j < p; ++j) s_lin += beta[j] * rows[r][static_cast<size_t>(j)];
      w[r] = std::exp(s_lin);
      total += w[r];
    }
    double u = rng.uniform() * total;
    size_t chosen = 0;
    for (size_t r = 0; r < rows.size(); ++r) {
      if (u < w[r]) {
        chosen = r;
        break;
      }
      u -= w[r];
    }
    std::swap(rows[0], rows[chosen]);
    sets.push_back(std::move(rows));
  }
  return make_design(sets);
}

}  // namespace

TEST_CASE("log-likelihood closed forms") {
  // one set, exposed case with four unexposed controls, beta = ln 2:
  // l = ln(2) - ln(2 + 4) = ln(2/6)
  const auto d = make_design({{{1}, {0}, {0}, {0}, {0}}});
  Eigen::VectorXd beta(1);
  beta[0] = std::log(2.0);
  const auto ll = cond_loglik(beta, d);
  CHECK_THAT(ll.value, Catch::Matchers::WithinAbs(std::log(2.0 / 6.0), 1e-12));

  // any design at beta = 0: minus the sum of log set sizes
  Rng rng(5);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  const auto d2 = simulate_design(20, 3, Eigen::VectorXd::Zero(2), rng);
  const auto ll0 = cond_loglik(zero, d2);
  CHECK_THAT(ll0.value, Catch::Matchers::WithinAbs(-20.0 * std::log(4.0), 1e-10));
}

TEST_CASE("gradient and hessian match central finite differences") {
  Rng rng(17);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int p = rng.range(1, 3);
    Eigen::VectorXd truth(p);
    for (int j = 0; j < p; ++j) truth[j] = rng.normal(0, 0.7);
    const auto d = simulate_design(rng.range(10, 50), rng.range(1, 4), truth, rng);
    Eigen::VectorXd beta(p);
    for (int j = 0; j < p; ++j) beta[j] = rng.normal(0, 0.8);

    const auto ll = cond_loglik(beta, d);
    const double h = 1e-5;
    for (int j = 0; j < p; ++j) {
      Eigen::VectorXd up = beta, dn = beta;
      up[j] += h;
      dn[j] -= h;
      const double fd = (cond_loglik(up, d).value - cond_loglik(dn, d).value) / (2 * h);
      CHECK_THAT(ll.gradient[j],
                 Catch::Matchers::WithinAbs(fd, 1e-6 * (1.0 + std::abs(fd))));
      // hessian column via gradient differences
      const Eigen::VectorXd gd =
          (cond_loglik(up, d).gradient - cond_loglik(dn, d).gradient) / (2 * h);
      for (int k = 0; k < p; ++k) {
        CHECK_THAT(ll.hessian(k, j),
                   Catch::Matchers::WithinAbs(gd[k], 1e-4 * (1.0 + std::abs(gd[k]))));
      }
    }
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("hessian is numerically nonpositive definite") {
  Rng rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    const int p = rng.range(1, 3);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(p);
    const auto d = simulate_design(rng.range(5, 40), rng.range(1, 4), truth, rng);
    Eigen::VectorXd beta(p);
    for (int j = 0; j < p; ++j) beta[j] = rng.normal(0, 1.0);
    const auto ll = cond_loglik(beta, d);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ll.hessian);
    CHECK(eig.eigenvalues().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("1:1 discordant pairs give the closed-form estimate") {
  // 6 sets where only the case is exposed, 3 where only the control is:
  // beta = ln(6/3) = ln 2, aOR = 2
  std::vector<std::vector<std::vector<double>>> sets;
  for (int i = 0; i < 6; ++i) sets.push_back({{1}, {0}});
  for (int i = 0; i < 3; ++i) sets.push_back({{0}, {1}});
  // concordant pairs cancel from the likelihood and must not move the estimate
  for (int i = 0; i < 4; ++i) sets.push_back({{1}, {1}});
  for (int i = 0; i < 5; ++i) sets.push_back({{0}, {0}});

  const auto result = fit_clogit(make_design(sets));
  REQUIRE(result.converged);
  REQUIRE(result.columns.size() == 1);
  CHECK_THAT(result.beta[0], Catch::Matchers::WithinAbs(std::log(2.0), 1e-8));
  CHECK_THAT(result.aor(0), Catch::Matchers::WithinAbs(2.0, 1e-6));
  // Wald interval brackets the estimate per the invariant
  CHECK(result.ci_low(0) < result.aor(0));
  CHECK(result.aor(0) < result.ci_high(0));
}

TEST_CASE("set-constant columns are dropped and do not perturb the fit") {
  // second covariate is constant within every set (value differs across sets)
  std::vector<std::vector<std::vector<double>>> sets;
  for (int i = 0; i < 6; ++i) sets.push_back({{1, double(i % 2)}, {0, double(i % 2)}});
  for (int i = 0; i < 3; ++i) sets.push_back({{0, 1}, {1, 1}});
  const auto result = fit_clogit(make_design(sets, {"exposure", "matched_on"}));
  REQUIRE(result.converged);
  REQUIRE(result.columns == std::vector<std::string>{"exposure"});
  REQUIRE(result.dropped_columns == std::vector<std::string>{"matched_on"});
  CHECK_THAT(result.beta[0], Catch::Matchers::WithinAbs(std::log(2.0), 1e-8));
}

TEST_CASE("separation is detected and flagged as non-convergence") {
  // every case exposed, no control exposed: likelihood rises without bound
  std::vector<std::vector<std::vector<double>>> sets;
  for (int i = 0; i < 10; ++i) sets.push_back({{1}, {0}, {0}});
  const auto result = fit_clogit(make_design(sets));
  CHECK_FALSE(result.converged);
  CHECK(result.separated);
}

TEST_CASE("exactly collinear columns are reported as non-identifiable") {
  Rng rng(31);
  Eigen::VectorXd truth(1);
  truth[0] = 0.5;
  auto base = simulate_design(40, 3, truth, rng);
  MatchedDesign d;
  d.set_offsets = base.set_offsets;
  d.case_rows = base.case_rows;
  d.x.resize(base.x.rows(), 2);
  d.x.col(0) = base.x.col(0);
  d.x.col(1) = base.x.col(0);  // duplicate
  d.column_names = {"a", "a_copy"};
  const auto result = fit_clogit(d);
  CHECK(result.columns.size() == 1);
  CHECK(result.dropped_columns.size() == 1);
  CHECK(result.converged);
}

TEST_CASE("fit is invariant to set order and within-set control order") {
  Rng rng(41);
  Eigen::VectorXd truth(2);
  truth << 0.6, -0.4;
  const auto d = simulate_design(60, 4, truth, rng);
  const auto r1 = fit_clogit(d);
  REQUIRE(r1.converged);

  // reverse sets and reverse controls within each set (case stays first)
  std::vector<std::vector<std::vector<double>>> sets;
  for (int s = d.n_sets() - 1; s >= 0; --s) {
    std::vector<std::vector<double>> rows;
    for (int r = d.set_offsets[s]; r < d.set_offsets[s + 1]; ++r) {
      rows.push_back({d.x(r, 0), d.x(r, 1)});
    }
    std::reverse(rows.begin() + 1, rows.end());
    sets.push_back(std::move(rows));
  }
  const auto r2 = fit_clogit(make_design(sets));
  REQUIRE(r2.converged);
  for (int j = 0; j < 2; ++j) {
    CHECK_THAT(r1.beta[j], Catch::Matchers::WithinAbs(r2.beta[j], 1e-9));
    CHECK_THAT(r1.se[j], Catch::Matchers::WithinAbs(r2.se[j], 1e-9));
  }
}

TEST_CASE("adding a set-constant shift leaves value, estimate and se unchanged") {
  Rng rng(43);
  Eigen::VectorXd truth(2);
  truth << 0.5, 0.2;
  const auto d = simulate_design(50, 3, truth, rng);
  auto shifted = d;
  for (int s = 0; s < d.n_sets(); ++s) {
    const double c0 = rng.normal(0, 2), c1 = rng.normal(0, 2);
    for (int r = d.set_offsets[s]; r < d.set_offsets[s + 1]; ++r) {
      shifted.x(r, 0) += c0;
      shifted.x(r, 1) += c1;
    }
  }
  Eigen::VectorXd probe(2);
  probe << 0.3, -0.7;
  CHECK_THAT(cond_loglik(probe, d).value,
             Catch::Matchers::WithinAbs(cond_loglik(probe, shifted).value, 1e-9));
  const auto r1 = fit_clogit(d);
  const auto r2 = fit_clogit(shifted);
  REQUIRE(r1.converged);
  REQUIRE(r2.converged);
  for (int j = 0; j < 2; ++j) {
    CHECK_THAT(r1.beta[j], Catch::Matchers::WithinAbs(r2.beta[j], 1e-7));
    CHECK_THAT(r1.se[j], Catch::Matchers::WithinAbs(r2.se[j], 1e-7));
  }
}

TEST_CASE("non-finite features are rejected") {
  auto d = make_design({{{1}, {0}}});
  d.x(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fit_clogit(d), Error);
}

TEST_CASE("vif: orthogonal, duplicated, and correlated columns") {
  // centered orthogonal columns have VIF exactly 1
  Eigen::MatrixXd x(4, 2);
  x << 1, 1, 1, -1, -1, 1, -1, -1;
  const auto orth = vif_report(x, {"a", "b"});
  CHECK_THAT(orth.entries[0].vif, Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(orth.entries[1].vif, Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(orth.max_vif, Catch::Matchers::WithinAbs(1.0, 1e-12));

  // duplicated column: infinite VIF flag
  Eigen::MatrixXd dup(5, 2);
  dup << 1, 1, 0, 0, 1, 1, 0, 0, 1, 1;
  const auto dupr = vif_report(dup, {"a", "a_copy"});
  CHECK(dupr.entries[0].infinite);
  CHECK(dupr.entries[1].infinite);
  CHECK(std::isinf(dupr.max_vif));

  // two columns with known sample correlation r: VIF = 1/(1-r^2), via a
  // direct OLS oracle on the same fixture
  Rng rng(59);
  const int n = 400;
  Eigen::MatrixXd xy(n, 2);
  for (int i = 0; i < n; ++i) {
    const double a = rng.normal(0, 1);
    xy(i, 0) = a;
    xy(i, 1) = 0.8 * a + rng.normal(0, 0.6);
  }
  // sample correlation
  const Eigen::VectorXd ca = xy.col(0).array() - xy.col(0).mean();
  const Eigen::VectorXd cb = xy.col(1).array() - xy.col(1).mean();
  const double r = ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  const double expected = 1.0 / (1.0 - r * r);
  const auto corr = vif_report(xy, {"a", "b"});
  CHECK_THAT(corr.entries[0].vif, Catch::Matchers::WithinRel(expected, 1e-9));
  CHECK_THAT(corr.entries[1].vif, Catch::Matchers::WithinRel(expected, 1e-9));

  // zero-variance column flagged and excluded from the max
  Eigen::MatrixXd z(5, 2);
  z << 1, 3, 0, 3, 1, 3, 0, 3, 1, 3;
  const auto zr = vif_report(z, {"a", "constant"});
  CHECK(zr.entries[1].zero_variance);
  CHECK(zr.max_vif < 2.0);
}

TEST_CASE("vif requires more rows than columns") {
  Eigen::MatrixXd x(2, 2);
  x << 1, 0, 0, 1;
  CHECK_THROWS_AS(vif_report(x, {"a", "b"}), Error);
}
