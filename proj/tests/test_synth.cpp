#include <cmath>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "lps/irt.hpp"
#include "lps/stats.hpp"
#include "lps/synth_trial.hpp"

using namespace lps;

namespace {

GenConfig small_config() {
  GenConfig g;
  g.n_blocks = 4;
  g.schools_per_block = 2;
  g.teachers_per_school = 2;
  g.students_per_teacher = 5;
  g.n_sections = 10;
  g.mean_sections = 5.0;
  return g;
}

}  // namespace

TEST_CASE("noiseless limit recovers the constant effect") {
  GenConfig g = small_config();
  g.b0 = 0.3;
  g.b1 = 0.0;
  g.sigma_Y_C = 1e-9;
  g.sigma_Y_T = 1e-9;
  auto [data, truth] = generate(g);
  for (size_t i = 0; i < truth.Y_T.size(); ++i)
    CHECK(truth.Y_T[i] - truth.Y_C[i] == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("b1 = 0 leaves effects uncorrelated with eta") {
  GenConfig g;
  g.n_blocks = 32;
  g.students_per_teacher = 30;  // 32*2*3*30 = 5760 students
  g.mean_sections = 0.0;
  g.b1 = 0.0;
  g.seed = 42;
  auto [data, truth] = generate(g);
  std::vector<double> diff(truth.Y_T.size());
  for (size_t i = 0; i < diff.size(); ++i) diff[i] = truth.Y_T[i] - truth.Y_C[i];
  CHECK(std::abs(correlation(truth.eta_T, diff)) < 0.05);
}

TEST_CASE("eta pinned at the difficulty gives half mastery") {
  GenConfig g = small_config();
  g.n_blocks = 20;
  g.students_per_teacher = 20;
  g.beta_M = {0.0, 0.0, 0.0, 0.0};
  g.sigma_M = 1e-9;
  g.sd_teacher_M = 1e-9;
  g.sd_school_M = 1e-9;
  g.delta.assign(g.n_sections, 0.0);
  g.mean_sections = 6.0;
  g.seed = 5;
  auto [data, truth] = generate(g);
  long mastered = 0;
  for (const auto& r : data.records) mastered += r.mastered;
  double rate = static_cast<double>(mastered) / data.records.size();
  CHECK(rate == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("generation is deterministic in the seed") {
  GenConfig g = small_config();
  g.seed = 77;
  auto [d1, t1] = generate(g);
  auto [d2, t2] = generate(g);
  REQUIRE(d1.students.size() == d2.students.size());
  for (size_t i = 0; i < d1.students.size(); ++i) {
    CHECK(d1.students[i].y == d2.students[i].y);
    CHECK(d1.students[i].z == d2.students[i].z);
    CHECK(d1.students[i].covariates == d2.students[i].covariates);
  }
  REQUIRE(d1.records.size() == d2.records.size());
  for (size_t i = 0; i < d1.records.size(); ++i)
    CHECK(d1.records[i].mastered == d2.records[i].mastered);
  CHECK(t1.eta_T == t2.eta_T);

  g.seed = 78;
  auto [d3, t3] = generate(g);
  CHECK(t3.eta_T != t1.eta_T);
}

TEST_CASE("randomization is school-level and balanced within blocks") {
  GenConfig g = small_config();
  g.schools_per_block = 4;
  auto [data, truth] = generate(g);
  std::map<std::string, std::set<int>> school_arms;
  std::map<std::string, std::set<int>> block_arms;
  for (const auto& s : data.students) {
    school_arms[s.school_id].insert(s.z);
    block_arms[s.block_id].insert(s.z);
  }
  for (const auto& [sch, arms] : school_arms) CHECK(arms.size() == 1);
  for (const auto& [blk, arms] : block_arms) CHECK(arms.size() == 2);
}

TEST_CASE("control students carry no mastery logs") {
  auto [data, truth] = generate(small_config());
  std::map<std::string, int> z_of;
  for (const auto& s : data.students) z_of[s.student_id] = s.z;
  for (const auto& r : data.records) CHECK(z_of.at(r.student_id) == 1);
  for (const auto& s : data.students)
    if (s.z == 1) CHECK(s.has_mastery_logs);
}

TEST_CASE("mean_sections = 0 disables logs") {
  GenConfig g = small_config();
  g.mean_sections = 0.0;
  auto [data, truth] = generate(g);
  CHECK(data.records.empty());
}

TEST_CASE("true difficulties beat perturbed ones in likelihood") {
  GenConfig g;
  g.students_per_teacher = 25;
  g.mean_sections = 15.0;
  g.seed = 9;
  auto [data, truth] = generate(g);

  std::map<std::string, int> sid;
  for (size_t i = 0; i < truth.student_ids.size(); ++i) sid[truth.student_ids[i]] = static_cast<int>(i);
  std::vector<IndexedRecord> recs;
  for (const auto& r : data.records)
    recs.push_back({sid.at(r.student_id), std::stoi(r.section_id.substr(3)), r.mastered});

  MeasurementParams mp;
  for (double d : truth.delta) mp.sections.push_back({d, 1.0, 0.0});
  double ll_true = mastery_loglik(recs, truth.eta_T, mp);

  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    MeasurementParams perturbed = mp;
    for (auto& s : perturbed.sections) s.delta += 0.5 + 0.5 * u(rng);
    CHECK(mastery_loglik(recs, truth.eta_T, perturbed) < ll_true);
  }
}

TEST_CASE("invalid configs are rejected") {
  GenConfig g = small_config();
  g.schools_per_block = 1;
  CHECK_THROWS(generate(g));
  g = small_config();
  g.mean_sections = 100.0;  // exceeds n_sections
  CHECK_THROWS(generate(g));
  g = small_config();
  g.sigma_M = 0.0;
  CHECK_THROWS(generate(g));
  g = small_config();
  g.beta_M = {1.0};
  CHECK_THROWS(generate(g));
}

TEST_CASE("zero placebo duplicates the treated arm untouched") {
  GenConfig g = small_config();
  auto [data, truth] = generate(g);
  TrialDataset treated;
  treated.covariate_names = data.covariate_names;
  treated.section_ids = data.section_ids;
  std::vector<double> eta_hat;
  std::map<std::string, size_t> tix;
  for (size_t i = 0; i < truth.student_ids.size(); ++i) tix[truth.student_ids[i]] = i;
  for (const auto& s : data.students)
    if (s.z == 1) {
      treated.students.push_back(s);
      eta_hat.push_back(truth.eta_T[tix.at(s.student_id)]);
    }
  for (const auto& r : data.records) treated.records.push_back(r);

  auto [pl, pt] = make_placebo(treated, eta_hat, PlaceboSpec::make(PlaceboKind::zero));
  REQUIRE(pl.students.size() == 2 * treated.students.size());
  size_t n = treated.students.size();
  for (size_t i = 0; i < n; ++i) {
    CHECK(pl.students[i].y == treated.students[i].y);
    CHECK(pl.students[i].z == 1);
    CHECK(pl.students[n + i].y == treated.students[i].y);
    CHECK(pl.students[n + i].z == 0);
    CHECK(pl.students[n + i].student_id == treated.students[i].student_id + "_p");
    CHECK(pl.students[n + i].block_id == treated.students[i].block_id);
    CHECK_FALSE(pl.students[n + i].has_mastery_logs);
  }
  // mastery records only for the original treated ids
  std::set<std::string> treated_ids;
  for (const auto& s : treated.students) treated_ids.insert(s.student_id);
  for (const auto& r : pl.records) CHECK(treated_ids.count(r.student_id) == 1);
}

TEST_CASE("linear placebo shifts outcomes by exactly tau(eta_hat)") {
  GenConfig g = small_config();
  auto [data, truth] = generate(g);
  TrialDataset treated;
  treated.covariate_names = data.covariate_names;
  std::vector<double> eta_hat;
  std::map<std::string, size_t> tix;
  for (size_t i = 0; i < truth.student_ids.size(); ++i) tix[truth.student_ids[i]] = i;
  for (const auto& s : data.students)
    if (s.z == 1) {
      treated.students.push_back(s);
      eta_hat.push_back(truth.eta_T[tix.at(s.student_id)]);
    }

  auto spec = PlaceboSpec::make(PlaceboKind::linear, {0.1, -0.2});
  auto [pl, pt] = make_placebo(treated, eta_hat, spec);
  size_t n = treated.students.size();
  for (size_t i = 0; i < n; ++i) {
    double tau = 0.1 - 0.2 * eta_hat[i];
    CHECK(pl.students[i].y - pl.students[n + i].y == doctest::Approx(tau).epsilon(1e-12));
  }
}

TEST_CASE("placebo rejects control students and mismatched eta_hat") {
  auto [data, truth] = generate(small_config());
  TrialDataset treated;
  for (const auto& s : data.students)
    if (s.z == 1) treated.students.push_back(s);
  std::vector<double> eta_hat(treated.students.size(), 0.0);

  TrialDataset with_control = treated;
  Student c = treated.students[0];
  c.student_id = "ctrl";
  c.z = 0;
  with_control.students.push_back(c);
  CHECK_THROWS(make_placebo(with_control, eta_hat, PlaceboSpec::make(PlaceboKind::zero)));

  eta_hat.pop_back();
  CHECK_THROWS(make_placebo(treated, eta_hat, PlaceboSpec::make(PlaceboKind::zero)));
}

TEST_CASE("config echo round-trips through the parser") {
  GenConfig g = small_config();
  g.b1 = -0.4;
  g.seed = 123;
  g.delta.assign(g.n_sections, 0.25);
  Config cfg = Config::parse_string(g.echo());
  GenConfig g2 = GenConfig::from_config(cfg);
  CHECK(g2.n_blocks == g.n_blocks);
  CHECK(g2.b1 == g.b1);
  CHECK(g2.seed == g.seed);
  CHECK(g2.delta == g.delta);
  CHECK(g2.beta_M == g.beta_M);
}
