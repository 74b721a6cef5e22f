#include "lps/trial_data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "lps/csv.hpp"

namespace lps {

namespace {

std::map<std::string, size_t> index_students(const TrialDataset& d) {
  std::map<std::string, size_t> idx;
  for (size_t i = 0; i < d.students.size(); ++i) {
    auto [it, fresh] = idx.emplace(d.students[i].student_id, i);
    if (!fresh) throw DataError("duplicate student_id '" + d.students[i].student_id + "'");
  }
  return idx;
}

}  // namespace

std::string DataReport::to_text() const {
  std::ostringstream os;
  os << "students: " << n_students << " (" << n_treated << " treated, " << n_control << " control)\n"
     << "hierarchy: " << n_blocks << " blocks, " << n_schools << " schools, " << n_teachers << " teachers\n"
     << "sections retained: " << n_sections << ", mastery records: " << n_records << "\n"
     << "mastery rate: " << mastery_rate << "\n"
     << "control mastery rows dropped: " << control_mastery_rows_dropped << "\n"
     << "sections dropped: " << dropped_sections.size() << "\n";
  for (const auto& s : dropped_sections) os << "  " << s.section_id << ": " << s.reason << "\n";
  return os.str();
}

std::string DataReport::to_keyvalue() const {
  std::ostringstream os;
  os.precision(17);
  os << "n_students = " << n_students << "\nn_treated = " << n_treated
     << "\nn_control = " << n_control << "\nn_teachers = " << n_teachers
     << "\nn_schools = " << n_schools << "\nn_blocks = " << n_blocks
     << "\nn_sections = " << n_sections << "\nn_records = " << n_records
     << "\nmastery_rate = " << mastery_rate
     << "\ncontrol_mastery_rows_dropped = " << control_mastery_rows_dropped
     << "\nn_dropped_sections = " << dropped_sections.size() << "\n";
  return os.str();
}

TrialDataset load_dataset(const std::string& students_path, const std::string& mastery_path,
                          const IngestOptions& options, DataReport* report) {
  CsvTable st = read_csv(students_path);
  int c_sid = st.require_col("student_id");
  int c_blk = st.require_col("block_id");
  int c_sch = st.require_col("school_id");
  int c_tch = st.require_col("teacher_id");
  int c_z = st.require_col("z");
  int c_y = st.require_col("y");
  st.require_col("pretest");

  // covariates: pretest plus any column after the fixed six
  std::vector<int> cov_cols;
  TrialDataset data;
  std::set<std::string> fixed = {"student_id", "block_id", "school_id", "teacher_id", "z", "y"};
  for (size_t j = 0; j < st.header.size(); ++j) {
    if (fixed.count(st.header[j])) continue;
    cov_cols.push_back(static_cast<int>(j));
    data.covariate_names.push_back(st.header[j]);
  }

  for (size_t r = 0; r < st.rows.size(); ++r) {
    const auto& row = st.rows[r];
    std::string ctx = students_path + ":" + std::to_string(r + 2);
    Student s;
    s.student_id = row[c_sid];
    s.block_id = row[c_blk];
    s.school_id = row[c_sch];
    s.teacher_id = row[c_tch];
    s.z = parse_int01(row[c_z], ctx + " column z");
    s.y = parse_real(row[c_y], ctx + " column y");
    for (int j : cov_cols) s.covariates.push_back(parse_real(row[j], ctx + " column " + st.header[j]));
    data.students.push_back(std::move(s));
  }

  CsvTable ms = read_csv(mastery_path);
  int m_sid = ms.require_col("student_id");
  int m_sec = ms.require_col("section_id");
  int m_mas = ms.require_col("mastered");
  int m_ord = ms.col("order");
  for (size_t r = 0; r < ms.rows.size(); ++r) {
    const auto& row = ms.rows[r];
    std::string ctx = mastery_path + ":" + std::to_string(r + 2);
    MasteryRecord rec;
    rec.student_id = row[m_sid];
    rec.section_id = row[m_sec];
    rec.mastered = parse_int01(row[m_mas], ctx + " column mastered");
    if (m_ord >= 0 && !row[m_ord].empty())
      rec.order = static_cast<long>(parse_real(row[m_ord], ctx + " column order"));
    data.records.push_back(std::move(rec));
  }
  data.provenance = students_path + " + " + mastery_path;
  return validate_dataset(std::move(data), options, report);
}

TrialDataset validate_dataset(TrialDataset data, const IngestOptions& options, DataReport* report) {
  auto idx = index_students(data);
  DataReport rep;

  // nesting is strict
  std::map<std::string, std::string> teacher_school, school_block;
  for (const auto& s : data.students) {
    auto [it, fresh] = teacher_school.emplace(s.teacher_id, s.school_id);
    if (!fresh && it->second != s.school_id)
      throw DataError("broken nesting: teacher '" + s.teacher_id + "' appears in schools '" +
                      it->second + "' and '" + s.school_id + "' (student " + s.student_id + ")");
    auto [it2, fresh2] = school_block.emplace(s.school_id, s.block_id);
    if (!fresh2 && it2->second != s.block_id)
      throw DataError("broken nesting: school '" + s.school_id + "' appears in blocks '" +
                      it2->second + "' and '" + s.block_id + "' (student " + s.student_id + ")");
  }

  // drop control mastery rows, reject unknown students and duplicate pairs
  std::vector<MasteryRecord> kept;
  std::set<std::pair<std::string, std::string>> seen;
  for (size_t r = 0; r < data.records.size(); ++r) {
    const auto& rec = data.records[r];
    auto it = idx.find(rec.student_id);
    if (it == idx.end())
      throw DataError("mastery row " + std::to_string(r + 1) + ": unknown student_id '" +
                      rec.student_id + "'");
    if (!seen.insert({rec.student_id, rec.section_id}).second)
      throw DataError("mastery row " + std::to_string(r + 1) + ": duplicate (student, section) pair (" +
                      rec.student_id + ", " + rec.section_id + ")");
    if (data.students[it->second].z == 0) {
      ++rep.control_mastery_rows_dropped;
      continue;
    }
    kept.push_back(rec);
  }
  data.records = std::move(kept);

  // section filters
  std::map<std::string, std::pair<long, long>> workers_mastered;  // section -> (workers, mastered)
  for (const auto& rec : data.records) {
    auto& wm = workers_mastered[rec.section_id];
    ++wm.first;
    wm.second += rec.mastered;
  }
  std::set<std::string> retained;
  for (const auto& [sec, wm] : workers_mastered) {
    if (wm.first < options.min_students) {
      rep.dropped_sections.push_back({sec, "worked by " + std::to_string(wm.first) +
                                               " students (min " + std::to_string(options.min_students) + ")"});
    } else if (options.drop_always_mastered && wm.second == wm.first) {
      rep.dropped_sections.push_back({sec, "mastered in every case"});
    } else if (options.drop_always_mastered && wm.second == 0) {
      rep.dropped_sections.push_back({sec, "never mastered"});
    } else {
      retained.insert(sec);
    }
  }
  std::vector<MasteryRecord> filtered;
  for (auto& rec : data.records)
    if (retained.count(rec.section_id)) filtered.push_back(std::move(rec));
  data.records = std::move(filtered);

  data.section_ids.assign(retained.begin(), retained.end());
  for (auto& s : data.students) s.has_mastery_logs = false;
  for (const auto& rec : data.records) data.students[idx.at(rec.student_id)].has_mastery_logs = true;

  DataReport full = make_report(data);
  full.control_mastery_rows_dropped = rep.control_mastery_rows_dropped;
  full.dropped_sections = rep.dropped_sections;
  if (report) *report = full;
  return data;
}

DataReport make_report(const TrialDataset& data) {
  DataReport rep;
  std::set<std::string> teachers, schools, blocks;
  for (const auto& s : data.students) {
    ++rep.n_students;
    (s.z ? rep.n_treated : rep.n_control)++;
    teachers.insert(s.teacher_id);
    schools.insert(s.school_id);
    blocks.insert(s.block_id);
  }
  rep.n_teachers = teachers.size();
  rep.n_schools = schools.size();
  rep.n_blocks = blocks.size();
  rep.n_sections = data.section_ids.size();
  rep.n_records = data.records.size();
  long mastered = 0;
  for (const auto& r : data.records) mastered += r.mastered;
  rep.mastery_rate = rep.n_records ? static_cast<double>(mastered) / rep.n_records : 0.0;
  return rep;
}

TrialDataset standardize(const TrialDataset& data, StandardizationInfo* info,
                         bool append_pretest_square) {
  TrialDataset out = data;
  size_t n = out.students.size();
  if (n < 2) throw DataError("standardize: need at least 2 students");
  size_t p = out.covariate_names.size();

  StandardizationInfo si;
  si.names = out.covariate_names;
  for (size_t j = 0; j < p; ++j) {
    double mean = 0;
    for (const auto& s : out.students) {
      if (!std::isfinite(s.covariates[j]))
        throw DataError("standardize: non-finite value in column '" + out.covariate_names[j] + "'");
      mean += s.covariates[j];
    }
    mean /= n;
    double ss = 0;
    for (const auto& s : out.students) ss += (s.covariates[j] - mean) * (s.covariates[j] - mean);
    double sd = std::sqrt(ss / (n - 1));
    if (sd == 0) throw DataError("standardize: zero-variance column '" + out.covariate_names[j] + "'");
    for (auto& s : out.students) s.covariates[j] = (s.covariates[j] - mean) / sd;
    si.means.push_back(mean);
    si.sds.push_back(sd);
  }

  if (append_pretest_square) {
    int jp = -1;
    for (size_t j = 0; j < p; ++j)
      if (out.covariate_names[j] == "pretest") jp = static_cast<int>(j);
    if (jp < 0) throw DataError("standardize: no 'pretest' column to square");
    for (auto& s : out.students) s.covariates.push_back(s.covariates[jp] * s.covariates[jp]);
    out.covariate_names.push_back("pretest_sq");
  }

  double ymean = 0;
  for (const auto& s : out.students) {
    if (!std::isfinite(s.y)) throw DataError("standardize: non-finite y");
    ymean += s.y;
  }
  ymean /= n;
  double yss = 0;
  for (const auto& s : out.students) yss += (s.y - ymean) * (s.y - ymean);
  double ysd = std::sqrt(yss / (n - 1));
  if (ysd == 0) throw DataError("standardize: zero-variance y");
  for (auto& s : out.students) s.y /= ysd;
  si.y_pooled_sd = ysd;

  if (info) *info = si;
  return out;
}

double mbar(const TrialDataset& data, const std::string& student_id) {
  long worked = 0, mastered = 0;
  for (const auto& r : data.records) {
    if (r.student_id == student_id) {
      ++worked;
      mastered += r.mastered;
    }
  }
  if (worked == 0) throw DataError("mbar undefined for student '" + student_id + "': no mastery records");
  return static_cast<double>(mastered) / worked;
}

void write_students_csv(const TrialDataset& data, const std::string& path) {
  CsvWriter w(path);
  std::ostringstream h;
  h << "student_id,block_id,school_id,teacher_id,z,y";
  for (const auto& c : data.covariate_names) h << ',' << c;
  w.row(h.str());
  for (const auto& s : data.students) {
    std::ostringstream os;
    os.precision(17);
    os << s.student_id << ',' << s.block_id << ',' << s.school_id << ',' << s.teacher_id << ','
       << s.z << ',' << s.y;
    for (double c : s.covariates) os << ',' << c;
    w.row(os.str());
  }
}

void write_mastery_csv(const TrialDataset& data, const std::string& path) {
  CsvWriter w(path);
  bool any_order = false;
  for (const auto& r : data.records) any_order |= r.order.has_value();
  w.row(any_order ? "student_id,section_id,mastered,order" : "student_id,section_id,mastered");
  for (const auto& r : data.records) {
    if (any_order) {
      std::ostringstream os;
      os << r.student_id << ',' << r.section_id << ',' << r.mastered << ','
         << (r.order ? std::to_string(*r.order) : "");
      w.row(os.str());
    } else {
      w.row(r.student_id, r.section_id, r.mastered);
    }
  }
}

}  // namespace lps
