#include "lps/synth_trial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "lps/csv.hpp"
#include "lps/irt.hpp"

namespace lps {

void GenConfig::validate() const {
  if (n_blocks < 1 || schools_per_block < 1 || teachers_per_school < 1 || students_per_teacher < 1)
    throw std::runtime_error("gen config: counts must be >= 1");
  if (schools_per_block < 2)
    throw std::runtime_error("gen config: need >= 2 schools per block for within-block randomization");
  if (mean_sections < 0) throw std::runtime_error("gen config: mean_sections must be >= 0");
  if (mean_sections > 0 && n_sections < 1)
    throw std::runtime_error("gen config: sections required when mean_sections > 0");
  if (mean_sections > n_sections)
    throw std::runtime_error("gen config: mean sections per student exceeds section count");
  if (sigma_M <= 0 || sd_teacher_M <= 0 || sd_school_M <= 0 || sd_teacher_Y <= 0 ||
      sd_school_Y <= 0 || sigma_Y_C <= 0 || sigma_Y_T <= 0)
    throw std::runtime_error("gen config: scale parameters must be > 0");
  size_t p = static_cast<size_t>(n_continuous) + 1;
  if (beta_M.size() != p || beta_Y.size() != p)
    throw std::runtime_error("gen config: coefficient vectors must have n_continuous + 1 entries");
  if (!delta.empty() && delta.size() != static_cast<size_t>(n_sections))
    throw std::runtime_error("gen config: delta must have one entry per section");
  if (!block_Y.empty() && block_Y.size() != static_cast<size_t>(n_blocks))
    throw std::runtime_error("gen config: block_Y must have one entry per block");
}

GenConfig GenConfig::from_config(const Config& cfg) {
  GenConfig g;
  g.n_blocks = static_cast<int>(cfg.get_int("generate.n_blocks", g.n_blocks));
  g.schools_per_block = static_cast<int>(cfg.get_int("generate.schools_per_block", g.schools_per_block));
  g.teachers_per_school =
      static_cast<int>(cfg.get_int("generate.teachers_per_school", g.teachers_per_school));
  g.students_per_teacher =
      static_cast<int>(cfg.get_int("generate.students_per_teacher", g.students_per_teacher));
  g.n_sections = static_cast<int>(cfg.get_int("generate.n_sections", g.n_sections));
  g.mean_sections = cfg.get_real("generate.mean_sections", g.mean_sections);
  g.n_continuous = static_cast<int>(cfg.get_int("generate.n_continuous", g.n_continuous));
  g.binary_prob = cfg.get_real("generate.binary_prob", g.binary_prob);
  g.beta_M = cfg.get_real_list("generate.beta_M", g.beta_M);
  g.sigma_M = cfg.get_real("generate.sigma_M", g.sigma_M);
  g.sd_teacher_M = cfg.get_real("generate.sd_teacher_M", g.sd_teacher_M);
  g.sd_school_M = cfg.get_real("generate.sd_school_M", g.sd_school_M);
  g.delta = cfg.get_real_list("generate.delta", g.delta);
  g.beta_Y = cfg.get_real_list("generate.beta_Y", g.beta_Y);
  g.block_Y = cfg.get_real_list("generate.block_Y", g.block_Y);
  g.a = cfg.get_real("generate.a", g.a);
  g.b0 = cfg.get_real("generate.b0", g.b0);
  g.b1 = cfg.get_real("generate.b1", g.b1);
  g.sd_teacher_Y = cfg.get_real("generate.sd_teacher_Y", g.sd_teacher_Y);
  g.sd_school_Y = cfg.get_real("generate.sd_school_Y", g.sd_school_Y);
  g.sigma_Y_C = cfg.get_real("generate.sigma_Y_C", g.sigma_Y_C);
  g.sigma_Y_T = cfg.get_real("generate.sigma_Y_T", g.sigma_Y_T);
  g.seed = static_cast<std::uint64_t>(cfg.get_int("generate.seed", static_cast<long>(g.seed)));
  g.validate();
  return g;
}

std::string GenConfig::echo() const {
  std::ostringstream os;
  os.precision(17);
  auto list = [](const std::vector<double>& v) {
    std::ostringstream s;
    s.precision(17);
    for (size_t i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v[i];
    return s.str();
  };
  os << "[generate]\n"
     << "n_blocks = " << n_blocks << "\nschools_per_block = " << schools_per_block
     << "\nteachers_per_school = " << teachers_per_school
     << "\nstudents_per_teacher = " << students_per_teacher << "\nn_sections = " << n_sections
     << "\nmean_sections = " << mean_sections << "\nn_continuous = " << n_continuous
     << "\nbinary_prob = " << binary_prob << "\nbeta_M = " << list(beta_M)
     << "\nsigma_M = " << sigma_M << "\nsd_teacher_M = " << sd_teacher_M
     << "\nsd_school_M = " << sd_school_M << "\ndelta = " << list(delta)
     << "\nbeta_Y = " << list(beta_Y) << "\nblock_Y = " << list(block_Y) << "\na = " << a
     << "\nb0 = " << b0 << "\nb1 = " << b1 << "\nsd_teacher_Y = " << sd_teacher_Y
     << "\nsd_school_Y = " << sd_school_Y << "\nsigma_Y_C = " << sigma_Y_C
     << "\nsigma_Y_T = " << sigma_Y_T << "\nseed = " << seed << "\n";
  return os.str();
}

void PlaceboSpec::validate() const {
  if (kind == PlaceboKind::zero)
    for (double c : coef)
      if (c != 0.0) throw std::runtime_error("placebo spec: kind=zero forces all coefficients 0");
  if (noise_sd < 0) throw std::runtime_error("placebo spec: noise_sd must be >= 0");
}

PlaceboSpec PlaceboSpec::make(PlaceboKind kind, std::vector<double> coef, double noise_sd,
                              std::uint64_t seed) {
  PlaceboSpec s;
  s.kind = kind;
  s.coef = std::move(coef);
  s.coef.resize(3, 0.0);
  s.noise_sd = noise_sd;
  s.seed = seed;
  s.validate();
  return s;
}

PlaceboKind placebo_kind_from_string(const std::string& s) {
  if (s == "zero") return PlaceboKind::zero;
  if (s == "random") return PlaceboKind::random;
  if (s == "linear") return PlaceboKind::linear;
  if (s == "quadratic") return PlaceboKind::quadratic;
  throw std::runtime_error("unknown placebo kind: '" + s + "'");
}

std::string placebo_kind_name(PlaceboKind k) {
  switch (k) {
    case PlaceboKind::zero: return "zero";
    case PlaceboKind::random: return "random";
    case PlaceboKind::linear: return "linear";
    default: return "quadratic";
  }
}

std::pair<TrialDataset, SyntheticTruth> generate(const GenConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  GenConfig cfg = config;
  if (cfg.delta.empty() && cfg.n_sections > 0) {
    cfg.delta.resize(cfg.n_sections);
    for (int s = 0; s < cfg.n_sections; ++s)
      cfg.delta[s] = cfg.n_sections == 1 ? 0.0 : -1.5 + 3.0 * s / (cfg.n_sections - 1);
  }
  if (cfg.block_Y.empty()) {
    cfg.block_Y.resize(cfg.n_blocks);
    for (int b = 0; b < cfg.n_blocks; ++b)
      cfg.block_Y[b] = cfg.n_blocks == 1 ? 0.0 : -0.5 + 1.0 * b / (cfg.n_blocks - 1);
  }

  TrialDataset data;
  SyntheticTruth truth;
  truth.config = cfg;
  truth.delta = cfg.delta;
  for (int s = 0; s < cfg.n_sections; ++s) data.section_ids.push_back("sec" + std::to_string(s));
  for (int j = 0; j < cfg.n_continuous; ++j) {
    data.covariate_names.push_back(j == 0 ? "pretest" : "x" + std::to_string(j));
  }
  data.covariate_names.push_back("bin");
  data.provenance = "synthetic (seed " + std::to_string(cfg.seed) + ")";

  int p = cfg.n_continuous + 1;
  int student_count = 0;
  std::vector<int> section_index(cfg.n_sections);
  std::iota(section_index.begin(), section_index.end(), 0);

  for (int b = 0; b < cfg.n_blocks; ++b) {
    // randomize schools to arms within the block, at least one per arm
    std::vector<int> arm(cfg.schools_per_block);
    for (int s = 0; s < cfg.schools_per_block; ++s) arm[s] = s % 2;
    std::shuffle(arm.begin(), arm.end(), rng);

    for (int sch = 0; sch < cfg.schools_per_block; ++sch) {
      int school_global = b * cfg.schools_per_block + sch;
      double eMs = cfg.sd_school_M * nd(rng);
      double eYs = cfg.sd_school_Y * nd(rng);
      for (int t = 0; t < cfg.teachers_per_school; ++t) {
        int teacher_global = school_global * cfg.teachers_per_school + t;
        double eMt = cfg.sd_teacher_M * nd(rng);
        double eYt = cfg.sd_teacher_Y * nd(rng);
        for (int k = 0; k < cfg.students_per_teacher; ++k) {
          Student st;
          st.student_id = "s" + std::to_string(student_count++);
          st.block_id = "b" + std::to_string(b);
          st.school_id = "sch" + std::to_string(school_global);
          st.teacher_id = "t" + std::to_string(teacher_global);
          st.z = arm[sch];
          for (int j = 0; j < cfg.n_continuous; ++j) st.covariates.push_back(nd(rng));
          st.covariates.push_back(u01(rng) < cfg.binary_prob ? 1.0 : 0.0);

          double muM = eMt + eMs;
          for (int j = 0; j < p; ++j) muM += st.covariates[j] * cfg.beta_M[j];
          double eta = muM + cfg.sigma_M * nd(rng);

          double muY = cfg.block_Y[b] + eYt + eYs + cfg.a * eta;
          for (int j = 0; j < p; ++j) muY += st.covariates[j] * cfg.beta_Y[j];
          double yC = muY + cfg.sigma_Y_C * nd(rng);
          double yT = muY + cfg.b0 + cfg.b1 * eta + cfg.sigma_Y_T * nd(rng);
          st.y = st.z ? yT : yC;

          if (st.z == 1 && cfg.mean_sections > 0) {
            std::poisson_distribution<int> pois(cfg.mean_sections);
            int nsec = std::max(1, std::min(cfg.n_sections, pois(rng)));
            std::vector<int> worked = section_index;
            std::shuffle(worked.begin(), worked.end(), rng);
            worked.resize(nsec);
            std::sort(worked.begin(), worked.end());
            st.has_mastery_logs = true;
            for (int s : worked) {
              MasteryRecord rec;
              rec.student_id = st.student_id;
              rec.section_id = "sec" + std::to_string(s);
              rec.mastered = u01(rng) < inv_logit(eta - cfg.delta[s]) ? 1 : 0;
              data.records.push_back(std::move(rec));
            }
          }

          truth.student_ids.push_back(st.student_id);
          truth.eta_T.push_back(eta);
          truth.Y_T.push_back(yT);
          truth.Y_C.push_back(yC);
          data.students.push_back(std::move(st));
        }
      }
    }
  }
  return {std::move(data), std::move(truth)};
}

std::pair<TrialDataset, SyntheticTruth> make_placebo(const TrialDataset& treated_only,
                                                     const std::vector<double>& eta_hat,
                                                     const PlaceboSpec& spec) {
  spec.validate();
  for (const auto& s : treated_only.students)
    if (s.z == 0)
      throw std::runtime_error("make_placebo: dataset must contain treated students only (found '" +
                               s.student_id + "' with z=0)");
  if (eta_hat.size() != treated_only.students.size())
    throw std::runtime_error("make_placebo: eta_hat missing for some students (" +
                             std::to_string(eta_hat.size()) + " values for " +
                             std::to_string(treated_only.students.size()) + " students)");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> nd;

  TrialDataset out = treated_only;
  out.provenance = "placebo(" + placebo_kind_name(spec.kind) + ") from " + treated_only.provenance;
  SyntheticTruth truth;

  std::vector<Student> controls;
  for (size_t i = 0; i < out.students.size(); ++i) {
    Student& st = out.students[i];
    double e = eta_hat[i];
    double tau = 0.0;
    switch (spec.kind) {
      case PlaceboKind::zero: tau = 0.0; break;
      case PlaceboKind::random: tau = spec.coef[0] + spec.noise_sd * nd(rng); break;
      case PlaceboKind::linear: tau = spec.coef[0] + spec.coef[1] * e; break;
      case PlaceboKind::quadratic:
        tau = spec.coef[0] + spec.coef[1] * e + spec.coef[2] * e * e;
        break;
    }

    Student ctrl = st;
    ctrl.student_id = st.student_id + "_p";
    ctrl.school_id = st.school_id + "_p";
    ctrl.teacher_id = st.teacher_id + "_p";
    ctrl.z = 0;
    ctrl.has_mastery_logs = false;
    controls.push_back(std::move(ctrl));

    double yC = st.y;
    st.y = yC + tau;

    truth.student_ids.push_back(st.student_id);
    truth.eta_T.push_back(e);
    truth.Y_C.push_back(yC);
    truth.Y_T.push_back(st.y);
  }
  for (auto& c : controls) out.students.push_back(std::move(c));
  return {std::move(out), std::move(truth)};
}

void write_truth_csv(const SyntheticTruth& truth, const std::string& path) {
  CsvWriter w(path);
  w.row("student_id", "eta_T", "Y_T", "Y_C");
  for (size_t i = 0; i < truth.student_ids.size(); ++i)
    w.row(truth.student_ids[i], truth.eta_T[i], truth.Y_T[i], truth.Y_C[i]);
}

}  // namespace lps
