#include <cmath>
#include <random>

#include "doctest.h"
#include "lps/irt.hpp"

using namespace lps;

TEST_CASE("rasch probability at eta = delta is one half") {
  SectionParams sec;
  sec.delta = 1.3;
  CHECK(mastery_prob(1.3, sec, IrtFamily::rasch) == doctest::Approx(0.5));
}

TEST_CASE("rasch probability at eta - delta = ln 3 is 3/4") {
  SectionParams sec;
  sec.delta = 0.0;
  CHECK(mastery_prob(std::log(3.0), sec, IrtFamily::rasch) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("3pl lower asymptote is the guessing parameter") {
  SectionParams sec;
  sec.delta = 0.0;
  sec.disc = 1.0;
  sec.guess = 0.2;
  CHECK(mastery_prob(-30.0, sec, IrtFamily::threepl) == doctest::Approx(0.2).epsilon(1e-6));
}

TEST_CASE("mastery_prob is monotone in eta and in -delta for all families") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3, 3), ud(0.3, 3.0), ug(0.0, 0.5);
  for (int k = 0; k < 10000; ++k) {
    IrtFamily fam = static_cast<IrtFamily>(k % 3);
    SectionParams sec;
    sec.delta = u(rng);
    sec.disc = fam == IrtFamily::rasch ? 1.0 : ud(rng);
    sec.guess = fam == IrtFamily::threepl ? ug(rng) : 0.0;
    double e1 = u(rng), e2 = u(rng);
    if (e1 > e2) std::swap(e1, e2);
    CHECK(mastery_prob(e1, sec, fam) <= mastery_prob(e2, sec, fam));
    SectionParams harder = sec;
    harder.delta = sec.delta + 0.5;
    CHECK(mastery_prob(e1, harder, fam) <= mastery_prob(e1, sec, fam));
  }
}

TEST_CASE("rasch is the disc=1 guess=0 special case of 3pl") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-4, 4);
  for (int k = 0; k < 200; ++k) {
    std::vector<IndexedRecord> recs = {{0, 0, k % 2}};
    std::vector<double> eta = {u(rng)};
    MeasurementParams rasch;
    rasch.family = IrtFamily::rasch;
    rasch.sections = {{u(rng), 1.0, 0.0}};
    MeasurementParams tpl = rasch;
    tpl.family = IrtFamily::threepl;
    CHECK(mastery_loglik(recs, eta, rasch) ==
          doctest::Approx(mastery_loglik(recs, eta, tpl)).epsilon(1e-12));
  }
}

TEST_CASE("empty record set has zero likelihood") {
  MeasurementParams mp;
  mp.sections = {{0.0, 1.0, 0.0}};
  CHECK(mastery_loglik({}, {1.0}, mp) == 0.0);
}

TEST_CASE("single mastered record at p=0.5 gives ln 0.5") {
  MeasurementParams mp;
  mp.sections = {{0.7, 1.0, 0.0}};
  std::vector<IndexedRecord> recs = {{0, 0, 1}};
  CHECK(mastery_loglik(recs, {0.7}, mp) == doctest::Approx(std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("four-record toy set matches brute-force sum") {
  // independent oracle: direct per-record Bernoulli log terms
  MeasurementParams mp;
  mp.sections = {{-0.5, 1.0, 0.0}, {0.8, 1.0, 0.0}};
  std::vector<double> eta = {0.3, -1.1};
  std::vector<IndexedRecord> recs = {{0, 0, 1}, {0, 1, 0}, {1, 0, 0}, {1, 1, 1}};
  double expect = 0.0;
  for (const auto& r : recs) {
    double p = 1.0 / (1.0 + std::exp(-(eta[r.student] - mp.sections[r.section].delta)));
    expect += r.mastered ? std::log(p) : std::log(1.0 - p);
  }
  CHECK(mastery_loglik(recs, eta, mp) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("rasch translation invariance") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2, 2);
  MeasurementParams mp;
  mp.sections = {{u(rng), 1.0, 0.0}, {u(rng), 1.0, 0.0}, {u(rng), 1.0, 0.0}};
  std::vector<double> eta = {u(rng), u(rng)};
  std::vector<IndexedRecord> recs = {{0, 0, 1}, {0, 2, 0}, {1, 1, 1}, {1, 2, 1}};
  double base = mastery_loglik(recs, eta, mp);
  for (double c : {-3.0, 0.4, 12.0}) {
    MeasurementParams shifted = mp;
    for (auto& s : shifted.sections) s.delta += c;
    std::vector<double> eta2 = eta;
    for (auto& e : eta2) e += c;
    CHECK(mastery_loglik(recs, eta2, shifted) == doctest::Approx(base).epsilon(1e-10));
  }
}

TEST_CASE("likelihood stays finite far in the tails") {
  MeasurementParams mp;
  mp.sections = {{-40.0, 1.0, 0.0}};
  std::vector<IndexedRecord> recs = {{0, 0, 0}};
  double ll = mastery_loglik(recs, {10.0}, mp);  // eta - delta = 50
  CHECK(std::isfinite(ll));
  CHECK(ll == doctest::Approx(-50.0).epsilon(1e-6));
}

TEST_CASE("latent regression density matches a hand oracle") {
  LatentRegressionParams lr;
  lr.beta_M = {0.5, -0.2};
  lr.teacher_fx = {0.1};
  lr.school_fx = {-0.3};
  lr.sigma_M = 0.8;
  lr.sd_teacher_M = 0.2;
  lr.sd_school_M = 0.3;
  std::vector<std::vector<double>> X = {{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}};
  std::vector<int> tof = {0, 0, 0}, sof = {0, 0, 0};
  std::vector<double> eta = {0.4, -0.6, 0.0};

  auto npdf = [](double x, double mu, double sd) {
    return -0.5 * std::log(2 * M_PI) - std::log(sd) - 0.5 * (x - mu) * (x - mu) / (sd * sd);
  };
  double expect = 0;
  for (int i = 0; i < 3; ++i) {
    double mu = X[i][0] * 0.5 + X[i][1] * -0.2 + 0.1 - 0.3;
    expect += npdf(eta[i], mu, 0.8);
  }
  expect += npdf(0.1, 0, 0.2) + npdf(-0.3, 0, 0.3);
  CHECK(latent_regression_logdensity(eta, X, tof, sof, lr) ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("eta at its mean contributes the normal constant") {
  LatentRegressionParams lr;
  lr.beta_M = {};
  lr.teacher_fx = {0.0};
  lr.school_fx = {0.0};
  lr.sigma_M = 1.0;
  std::vector<std::vector<double>> X = {{}};
  double ll = latent_regression_logdensity({0.0}, X, {0}, {0}, lr);
  // per-student term -0.5 log(2 pi), plus the two intercept densities at zero
  double intercepts = 2 * (-0.5 * std::log(2 * M_PI));  // sds are 1
  CHECK(ll - intercepts == doctest::Approx(-0.5 * std::log(2 * M_PI)).epsilon(1e-12));
}

TEST_CASE("doubling sigma_M at the mean costs log 2 per student") {
  LatentRegressionParams lr;
  lr.beta_M = {};
  lr.teacher_fx = {0.0};
  lr.school_fx = {0.0};
  lr.sigma_M = 1.0;
  std::vector<std::vector<double>> X = {{}, {}};
  double a = latent_regression_logdensity({0.0, 0.0}, X, {0, 0}, {0, 0}, lr);
  lr.sigma_M = 2.0;
  double b = latent_regression_logdensity({0.0, 0.0}, X, {0, 0}, {0, 0}, lr);
  CHECK(a - b == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("non-positive sd rejected") {
  LatentRegressionParams lr;
  lr.beta_M = {};
  lr.teacher_fx = {0.0};
  lr.school_fx = {0.0};
  lr.sigma_M = -1.0;
  std::vector<std::vector<double>> X = {{}};
  CHECK_THROWS(latent_regression_logdensity({0.0}, X, {0}, {0}, lr));
}

TEST_CASE("family parameter constraints are validated") {
  MeasurementParams mp;
  mp.family = IrtFamily::rasch;
  mp.sections = {{0.0, 2.0, 0.0}};
  CHECK_THROWS(mp.validate());
  mp.family = IrtFamily::twopl;
  CHECK_NOTHROW(mp.validate());
  mp.sections[0].guess = 0.2;
  CHECK_THROWS(mp.validate());
  mp.family = IrtFamily::threepl;
  CHECK_NOTHROW(mp.validate());
  mp.sections[0].guess = 1.0;
  CHECK_THROWS(mp.validate());
}
