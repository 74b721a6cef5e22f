#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lps/csv.hpp"

namespace lps {

struct Student {
  std::string student_id;
  std::string block_id;
  std::string school_id;
  std::string teacher_id;
  int z = 0;                       // treatment indicator
  double y = 0.0;                  // posttest, standardized units after preparation
  std::vector<double> covariates;  // standardized; pretest first, square appended by standardize()
  bool has_mastery_logs = false;
};

struct MasteryRecord {
  std::string student_id;
  std::string section_id;
  int mastered = 0;
  std::optional<long> order;  // parsed if present, reporting only
};

struct DroppedSection {
  std::string section_id;
  std::string reason;
};

struct TrialDataset {
  std::vector<Student> students;
  std::vector<MasteryRecord> records;
  std::vector<std::string> section_ids;      // retained sections, ordered
  std::vector<std::string> covariate_names;  // parallel to Student::covariates
  std::string provenance;
};

struct DataReport {
  long n_students = 0, n_treated = 0, n_control = 0;
  long n_teachers = 0, n_schools = 0, n_blocks = 0;
  long n_sections = 0, n_records = 0;
  double mastery_rate = 0.0;
  long control_mastery_rows_dropped = 0;
  std::vector<DroppedSection> dropped_sections;

  std::string to_text() const;
  std::string to_keyvalue() const;
};

struct IngestOptions {
  long min_students = 100;  // sections worked by fewer are dropped
  bool drop_always_mastered = true;
};

struct StandardizationInfo {
  std::vector<std::string> names;
  std::vector<double> means;
  std::vector<double> sds;
  double y_pooled_sd = 1.0;
};

// Loads and validates students.csv + mastery.csv, applying section filters.
TrialDataset load_dataset(const std::string& students_path, const std::string& mastery_path,
                          const IngestOptions& options = {}, DataReport* report = nullptr);

// Validates invariants and applies section filters to an in-memory dataset.
TrialDataset validate_dataset(TrialDataset data, const IngestOptions& options, DataReport* report);

DataReport make_report(const TrialDataset& data);

// Columns to mean 0 / sd 1, square-of-pretest appended, y divided by pooled SD.
TrialDataset standardize(const TrialDataset& data, StandardizationInfo* info = nullptr,
                         bool append_pretest_square = true);

// Observed fraction of worked sections mastered; throws DataError if no records.
double mbar(const TrialDataset& data, const std::string& student_id);

void write_students_csv(const TrialDataset& data, const std::string& path);
void write_mastery_csv(const TrialDataset& data, const std::string& path);

}  // namespace lps
