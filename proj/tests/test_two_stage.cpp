#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "lps/two_stage.hpp"

using namespace lps;

namespace {

// y = block + 0.3 x + 0.2 z + 0.4 eta + interaction z*eta + teacher + school + noise
struct SimOut {
  TrialDataset data;
  std::vector<double> eta;
};

SimOut simulate_mixed(double interaction, double re_sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u01(0, 1);
  SimOut out;
  out.data.covariate_names = {"x"};
  int sid = 0;
  for (int b = 0; b < 4; ++b) {
    for (int sch = 0; sch < 2; ++sch) {
      int z = sch % 2;
      double es = re_sd * nd(rng);
      for (int t = 0; t < 3; ++t) {
        double et = re_sd * nd(rng);
        for (int k = 0; k < 15; ++k) {
          Student s;
          s.student_id = "s" + std::to_string(sid++);
          s.block_id = "b" + std::to_string(b);
          s.school_id = "sch" + std::to_string(b * 2 + sch);
          s.teacher_id = "t" + std::to_string((b * 2 + sch) * 3 + t);
          s.z = z;
          double x = nd(rng), eta = nd(rng);
          s.covariates = {x};
          s.y = 0.1 * b + 0.3 * x + 0.2 * z + 0.4 * eta + interaction * z * eta + es + et +
                0.5 * nd(rng);
          out.data.students.push_back(std::move(s));
          out.eta.push_back(eta);
        }
      }
    }
  }
  (void)u01;
  return out;
}

}  // namespace

TEST_CASE("matches ols when every student is their own cluster") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  TrialDataset data;
  data.covariate_names = {"x"};
  std::vector<double> eta;
  for (int i = 0; i < 80; ++i) {
    Student s;
    s.student_id = "s" + std::to_string(i);
    s.block_id = "b" + std::to_string(i % 2);
    s.school_id = "sch" + std::to_string(i);
    s.teacher_id = "t" + std::to_string(i);
    s.z = i % 2;
    double x = nd(rng), e = nd(rng);
    s.covariates = {x};
    s.y = 0.5 * (i % 2 == 0) + 0.3 * x - 0.2 * s.z + 0.4 * e + 0.15 * s.z * e + 0.6 * nd(rng);
    eta.push_back(e);
    data.students.push_back(std::move(s));
  }
  auto fit = fit_stage2(data, eta);

  // independent OLS oracle on the same design
  int n = 80, q = 2 + 1 + 3;
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(n, q);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const auto& s = data.students[i];
    F(i, s.block_id == "b0" ? 0 : 1) = 1.0;
    F(i, 2) = s.covariates[0];
    F(i, 3) = s.z;
    F(i, 4) = eta[i];
    F(i, 5) = s.z * eta[i];
    y(i) = s.y;
  }
  Eigen::VectorXd beta = (F.transpose() * F).ldlt().solve(F.transpose() * y);
  CHECK(fit.interaction_est == doctest::Approx(beta(5)).epsilon(1e-4));
  for (int j = 2; j < q; ++j) {
    int fj = -1;
    for (size_t k = 0; k < fit.coef_names.size(); ++k)
      if ((j == 2 && fit.coef_names[k] == "x") || (j == 3 && fit.coef_names[k] == "z") ||
          (j == 4 && fit.coef_names[k] == "eta") || (j == 5 && fit.coef_names[k] == "z:eta"))
        fj = static_cast<int>(k);
    if (fj >= 0) CHECK(fit.estimates[fj] == doctest::Approx(beta(j)).epsilon(1e-4));
  }
}

TEST_CASE("recovers a known interaction from its own generative model") {
  auto sim = simulate_mixed(0.1, 0.2, 11);
  auto fit = fit_stage2(sim.data, sim.eta);
  CHECK(fit.converged);
  double se = std::sqrt(fit.interaction_var);
  CHECK(std::abs(fit.interaction_est - 0.1) < 3 * se);
  CHECK(fit.sigma2 > 0.1);
  CHECK(fit.sigma2 < 0.5);
  CHECK(fit.var_teacher >= 0.0);
  CHECK(fit.var_school >= 0.0);
}

TEST_CASE("student order does not change the fit") {
  auto sim = simulate_mixed(-0.2, 0.15, 13);
  auto fit1 = fit_stage2(sim.data, sim.eta);

  std::vector<int> perm(sim.data.students.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  std::mt19937_64 rng(17);
  std::shuffle(perm.begin(), perm.end(), rng);
  TrialDataset shuffled;
  shuffled.covariate_names = sim.data.covariate_names;
  std::vector<double> eta2;
  for (int i : perm) {
    shuffled.students.push_back(sim.data.students[i]);
    eta2.push_back(sim.eta[i]);
  }
  auto fit2 = fit_stage2(shuffled, eta2);
  CHECK(fit2.interaction_est == doctest::Approx(fit1.interaction_est).epsilon(1e-8));
  CHECK(fit2.interaction_var == doctest::Approx(fit1.interaction_var).epsilon(1e-6));
  CHECK(fit2.sigma2 == doctest::Approx(fit1.sigma2).epsilon(1e-6));
}

TEST_CASE("intercept-only design when blocks are excluded") {
  auto sim = simulate_mixed(0.0, 0.1, 19);
  Stage2Options opt;
  opt.include_blocks = false;
  auto fit = fit_stage2(sim.data, sim.eta, opt);
  CHECK(fit.coef_names[0] == "intercept");
  CHECK(fit.coef_names.back() == "z:eta");
  CHECK(fit.coef_names.size() == 5);
}

TEST_CASE("eta length mismatch is rejected") {
  auto sim = simulate_mixed(0.0, 0.1, 23);
  sim.eta.pop_back();
  CHECK_THROWS(fit_stage2(sim.data, sim.eta));
}

TEST_CASE("pool arithmetic on hand-built fits") {
  MixedModelFit a, b, c, d;
  a.interaction_est = 0.10;
  a.interaction_var = 0.04;
  b.interaction_est = 0.30;
  b.interaction_var = 0.02;
  c.interaction_est = 0.20;
  c.interaction_var = 0.03;
  d.interaction_est = 99.0;  // non-converged, must be excluded
  d.interaction_var = 1.0;
  d.converged = false;
  auto est = pool({a, b, c, d});
  CHECK(est.n_fits == 3);
  CHECK(est.mean == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(est.within_var == doctest::Approx(0.03).epsilon(1e-12));
  CHECK(est.between_var == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(est.total_var == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(est.scaled_sd == doctest::Approx(0.2).epsilon(1e-12));

  CHECK_THROWS(pool({a, d}));
}

TEST_CASE("draw_eta_vectors thins evenly across chains") {
  PosteriorDraws post;
  post.n_chains = 2;
  post.n_draws = 4;
  post.dim = 3;
  post.names = {"b1", "eta[0]", "eta[1]"};
  post.draws.resize(2 * 4 * 3);
  for (int c = 0; c < 2; ++c)
    for (int d = 0; d < 4; ++d)
      for (int p = 0; p < 3; ++p)
        post.draws[(c * 4 + d) * 3 + p] = 100 * c + 10 * d + p;

  auto vecs = draw_eta_vectors(post, 4);
  REQUIRE(vecs.size() == 4);
  // global draws 0, 2, 4, 6 -> (c0,d0), (c0,d2), (c1,d0), (c1,d2)
  CHECK(vecs[0] == std::vector<double>{1, 2});
  CHECK(vecs[1] == std::vector<double>{21, 22});
  CHECK(vecs[2] == std::vector<double>{101, 102});
  CHECK(vecs[3] == std::vector<double>{121, 122});

  CHECK_THROWS(draw_eta_vectors(post, 9));
  post.names = {"b1", "x0", "x1"};
  CHECK_THROWS(draw_eta_vectors(post, 2));
}

TEST_CASE("pooled variance grows with disagreement across draws") {
  auto sim = simulate_mixed(0.1, 0.2, 29);
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd;
  std::vector<MixedModelFit> tight, loose;
  for (int k = 0; k < 5; ++k) {
    std::vector<double> e1 = sim.eta, e2 = sim.eta;
    for (auto& v : e1) v += 0.01 * nd(rng);
    for (auto& v : e2) v += 0.5 * nd(rng);
    tight.push_back(fit_stage2(sim.data, e1));
    loose.push_back(fit_stage2(sim.data, e2));
  }
  CHECK(pool(tight).between_var < pool(loose).between_var + 1e-12);
}
