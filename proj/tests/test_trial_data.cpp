#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lps/trial_data.hpp"

using namespace lps;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("lps_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name, const std::string& content) const {
    auto p = path / name;
    std::ofstream(p) << content;
    return p.string();
  }
};

const char* kStudents =
    "student_id,block_id,school_id,teacher_id,z,y,pretest,x1\n"
    "s1,b1,sch1,t1,1,0.5,1.0,0.2\n"
    "s2,b1,sch2,t2,0,-0.3,0.0,0.1\n"
    "s3,b1,sch1,t1,1,0.1,-1.0,0.6\n";

const char* kMastery =
    "student_id,section_id,mastered\n"
    "s1,secA,1\n"
    "s1,secB,0\n"
    "s3,secA,0\n";

}  // namespace

TEST_CASE("well-formed toy files load") {
  TempDir tmp;
  IngestOptions opt;
  opt.min_students = 1;
  DataReport rep;
  auto data = load_dataset(tmp.file("s.csv", kStudents), tmp.file("m.csv", kMastery), opt, &rep);
  CHECK(data.students.size() == 3);
  CHECK(data.section_ids.size() <= 2);
  CHECK(rep.n_treated == 2);
  CHECK(rep.n_control == 1);
  CHECK(data.covariate_names == std::vector<std::string>{"pretest", "x1"});
  CHECK(data.students[0].has_mastery_logs);
  CHECK_FALSE(data.students[1].has_mastery_logs);
}

TEST_CASE("dangling foreign key names the row") {
  TempDir tmp;
  std::string mastery = std::string(kMastery) + "ghost,secA,1\n";
  CHECK_THROWS_WITH_AS(
      load_dataset(tmp.file("s.csv", kStudents), tmp.file("m.csv", mastery), {}, nullptr),
      doctest::Contains("row 4"), DataError);
}

TEST_CASE("broken nesting rejected") {
  TempDir tmp;
  std::string students = std::string(kStudents) + "s4,b1,sch2,t1,0,0.0,0.5,0.3\n";
  CHECK_THROWS_WITH_AS(
      load_dataset(tmp.file("s.csv", students), tmp.file("m.csv", kMastery), {}, nullptr),
      doctest::Contains("teacher"), DataError);
}

TEST_CASE("duplicate mastery pair rejected") {
  TempDir tmp;
  std::string mastery = std::string(kMastery) + "s1,secA,0\n";
  CHECK_THROWS_AS(load_dataset(tmp.file("s.csv", kStudents), tmp.file("m.csv", mastery), {}, nullptr),
                  DataError);
}

TEST_CASE("min_students filter drops thin sections with reasons") {
  TempDir tmp;
  IngestOptions opt;
  opt.min_students = 100;
  DataReport rep;
  auto data = load_dataset(tmp.file("s.csv", kStudents), tmp.file("m.csv", kMastery), opt, &rep);
  CHECK(data.section_ids.empty());
  CHECK(rep.dropped_sections.size() == 2);
  CHECK(rep.dropped_sections[0].reason.find("worked by") != std::string::npos);
}

TEST_CASE("always-mastered sections dropped") {
  TempDir tmp;
  std::string mastery =
      "student_id,section_id,mastered\n"
      "s1,secA,1\n"
      "s3,secA,1\n"
      "s1,secB,0\n"
      "s3,secB,1\n";
  IngestOptions opt;
  opt.min_students = 1;
  DataReport rep;
  auto data = load_dataset(tmp.file("s.csv", kStudents), tmp.file("m.csv", mastery), opt, &rep);
  CHECK(data.section_ids == std::vector<std::string>{"secB"});
  REQUIRE(rep.dropped_sections.size() == 1);
  CHECK(rep.dropped_sections[0].reason == "mastered in every case");
}

TEST_CASE("control mastery rows dropped with count") {
  TempDir tmp;
  std::string mastery = std::string(kMastery) + "s2,secA,1\n";
  IngestOptions opt;
  opt.min_students = 1;
  DataReport rep;
  auto data = load_dataset(tmp.file("s.csv", kStudents), tmp.file("m.csv", mastery), opt, &rep);
  CHECK(rep.control_mastery_rows_dropped == 1);
  for (const auto& r : data.records) CHECK(r.student_id != "s2");
}

TEST_CASE("raising min_students never enlarges the retained set") {
  TempDir tmp;
  auto sp = tmp.file("s.csv", kStudents);
  auto mp = tmp.file("m.csv", kMastery);
  std::vector<std::string> prev;
  bool first = true;
  for (long ms : {1L, 2L, 3L, 100L}) {
    IngestOptions opt;
    opt.min_students = ms;
    auto data = load_dataset(sp, mp, opt, nullptr);
    if (!first) {
      for (const auto& sec : data.section_ids)
        CHECK(std::find(prev.begin(), prev.end(), sec) != prev.end());
    }
    prev = data.section_ids;
    first = false;
  }
}

TEST_CASE("load is idempotent through its own serialization") {
  TempDir tmp;
  IngestOptions opt;
  opt.min_students = 1;
  auto data = load_dataset(tmp.file("s.csv", kStudents), tmp.file("m.csv", kMastery), opt, nullptr);
  auto sp2 = (tmp.path / "s2.csv").string();
  auto mp2 = (tmp.path / "m2.csv").string();
  write_students_csv(data, sp2);
  write_mastery_csv(data, mp2);
  auto data2 = load_dataset(sp2, mp2, opt, nullptr);
  REQUIRE(data2.students.size() == data.students.size());
  for (size_t i = 0; i < data.students.size(); ++i) {
    CHECK(data2.students[i].student_id == data.students[i].student_id);
    CHECK(data2.students[i].y == data.students[i].y);
    CHECK(data2.students[i].covariates == data.students[i].covariates);
  }
  REQUIRE(data2.records.size() == data.records.size());
  for (size_t i = 0; i < data.records.size(); ++i) {
    CHECK(data2.records[i].student_id == data.records[i].student_id);
    CHECK(data2.records[i].section_id == data.records[i].section_id);
    CHECK(data2.records[i].mastered == data.records[i].mastered);
  }
  CHECK(data2.section_ids == data.section_ids);
}

TEST_CASE("NA cells are rejected") {
  TempDir tmp;
  std::string students =
      "student_id,block_id,school_id,teacher_id,z,y,pretest,x1\n"
      "s1,b1,sch1,t1,1,0.5,NA,0.2\n"
      "s2,b1,sch2,t2,0,-0.3,0.0,0.1\n";
  CHECK_THROWS(load_dataset(tmp.file("s.csv", students), tmp.file("m.csv", "student_id,section_id,mastered\n"), {}, nullptr));
}

TEST_CASE("standardize centers and scales every column") {
  TempDir tmp;
  IngestOptions opt;
  opt.min_students = 1;
  auto data = load_dataset(tmp.file("s.csv", kStudents), tmp.file("m.csv", kMastery), opt, nullptr);
  StandardizationInfo info;
  auto std_data = standardize(data, &info);
  size_t p = data.covariate_names.size();
  for (size_t j = 0; j < p; ++j) {
    double mean = 0;
    for (const auto& s : std_data.students) mean += s.covariates[j];
    mean /= std_data.students.size();
    CHECK(std::abs(mean) < 1e-10);
  }
  CHECK(std_data.covariate_names.back() == "pretest_sq");
}

TEST_CASE("pretest square column equals standardized pretest squared") {
  // pretest values {-1, 0, 1}: mean 0, sd 1, so standardized == raw
  TempDir tmp;
  IngestOptions opt;
  opt.min_students = 1;
  auto data = load_dataset(tmp.file("s.csv", kStudents), tmp.file("m.csv", kMastery), opt, nullptr);
  auto std_data = standardize(data, nullptr);
  int jp = 0;  // pretest is the first covariate
  for (const auto& s : std_data.students) {
    double expect = s.covariates[jp] * s.covariates[jp];
    CHECK(s.covariates.back() == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("zero-variance column reported by name") {
  TempDir tmp;
  std::string students =
      "student_id,block_id,school_id,teacher_id,z,y,pretest,x1\n"
      "s1,b1,sch1,t1,1,0.5,1.0,0.7\n"
      "s2,b1,sch2,t2,0,-0.3,0.0,0.7\n";
  auto data = load_dataset(tmp.file("s.csv", students),
                           tmp.file("m.csv", "student_id,section_id,mastered\n"), {}, nullptr);
  CHECK_THROWS_WITH_AS(standardize(data), doctest::Contains("x1"), DataError);
}

TEST_CASE("y scaled by pooled both-arm sd") {
  TempDir tmp;
  IngestOptions opt;
  opt.min_students = 1;
  auto data = load_dataset(tmp.file("s.csv", kStudents), tmp.file("m.csv", kMastery), opt, nullptr);
  StandardizationInfo info;
  auto std_data = standardize(data, &info);
  for (size_t i = 0; i < data.students.size(); ++i)
    CHECK(std_data.students[i].y == doctest::Approx(data.students[i].y / info.y_pooled_sd));
}

TEST_CASE("mbar arithmetic") {
  TrialDataset d;
  d.students.push_back({"s1", "b", "sch", "t", 1, 0.0, {}, true});
  d.records = {{"s1", "a", 1, {}}, {"s1", "b", 0, {}}, {"s1", "c", 1, {}}, {"s1", "d", 1, {}}};
  CHECK(mbar(d, "s1") == doctest::Approx(0.75));

  TrialDataset all;
  all.students.push_back({"s1", "b", "sch", "t", 1, 0.0, {}, true});
  all.records = {{"s1", "a", 1, {}}, {"s1", "b", 1, {}}};
  CHECK(mbar(all, "s1") == doctest::Approx(1.0));

  CHECK_THROWS_AS(mbar(d, "s2"), DataError);
}

TEST_CASE("retained sections have interior mastery rates") {
  TempDir tmp;
  std::string mastery =
      "student_id,section_id,mastered\n"
      "s1,secA,1\n"
      "s3,secA,0\n"
      "s1,secB,0\n"
      "s3,secB,0\n";
  IngestOptions opt;
  opt.min_students = 1;
  auto data = load_dataset(tmp.file("s.csv", kStudents), tmp.file("m.csv", mastery), opt, nullptr);
  for (const auto& sec : data.section_ids) {
    long worked = 0, mastered = 0;
    for (const auto& r : data.records)
      if (r.section_id == sec) {
        ++worked;
        mastered += r.mastered;
      }
    CHECK(mastered > 0);
    CHECK(mastered < worked);
  }
}
