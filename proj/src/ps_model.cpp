#include "lps/ps_model.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "lps/stats.hpp"

namespace lps {

namespace {
constexpr double kLogSqrt2Pi = 0.9189385332046727;
// B(2,8) = Gamma(2)Gamma(8)/Gamma(10) = 1/72
constexpr double kLogBeta28 = -4.276666119016055;
}  // namespace

ModelSpec ModelSpec::from_config(const Config& cfg) {
  ModelSpec s;
  std::string variant = cfg.get_str("model.variant", "latent");
  if (variant == "latent") s.variant = ModelVariant::latent;
  else if (variant == "mbar") s.variant = ModelVariant::mbar;
  else throw std::runtime_error("config: model.variant must be 'latent' or 'mbar', got '" + variant + "'");
  s.family = family_from_string(cfg.get_str("model.family", "rasch"));
  s.priors.coef_sd = cfg.get_real("model.prior_coef_sd", 2.0);
  s.priors.effect_sd = cfg.get_real("model.prior_effect_sd", 1.0);
  std::string sp = cfg.get_str("model.scale_prior", "improper-uniform");
  if (sp == "improper-uniform") s.priors.scale_prior = ScalePrior::improper_uniform;
  else if (sp == "half-normal") s.priors.scale_prior = ScalePrior::half_normal;
  else throw std::runtime_error("config: model.scale_prior must be 'improper-uniform' or 'half-normal'");
  s.priors.scale_halfnormal_sd = cfg.get_real("model.scale_halfnormal_sd", 2.5);
  s.centered_intercepts = cfg.get_bool("model.centered_intercepts", false);
  s.include_outcome = cfg.get_bool("model.include_outcome", true);
  s.standardize = cfg.get_bool("data.standardize", true);
  s.append_pretest_square = cfg.get_bool("data.append_pretest_square", true);
  if (s.priors.coef_sd <= 0 || s.priors.effect_sd <= 0 || s.priors.scale_halfnormal_sd <= 0)
    throw std::runtime_error("config: prior sds must be > 0");
  return s;
}

void IndexMap::add(const std::string& name, int size) {
  by_name_[name] = static_cast<int>(segs_.size());
  segs_.push_back({name, dim_, size});
  dim_ += size;
}
int IndexMap::offset(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::runtime_error("unknown parameter segment '" + name + "'");
  return segs_[it->second].offset;
}
int IndexMap::size(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::runtime_error("unknown parameter segment '" + name + "'");
  return segs_[it->second].size;
}
bool IndexMap::has(const std::string& name) const { return by_name_.count(name) > 0; }

PsData PsData::build(const TrialDataset& data, ModelVariant variant) {
  PsData d;
  std::map<std::string, int> blocks, schools, teachers, students, sections;
  for (const auto& sid : data.section_ids) {
    sections[sid] = d.n_sections++;
    d.section_ids.push_back(sid);
  }

  // mbar per student (for the mbar variant)
  std::map<std::string, std::pair<long, long>> wm;
  for (const auto& r : data.records) {
    auto& e = wm[r.student_id];
    ++e.first;
    e.second += r.mastered;
  }

  for (const auto& s : data.students) {
    if (variant == ModelVariant::mbar && s.z == 1 && !wm.count(s.student_id))
      continue;  // treated without records: mbar undefined, excluded from mbar fits
    int i = d.n++;
    students[s.student_id] = i;
    d.student_ids.push_back(s.student_id);
    auto blk = blocks.emplace(s.block_id, d.n_blocks);
    if (blk.second) { ++d.n_blocks; d.block_ids.push_back(s.block_id); }
    auto sch = schools.emplace(s.school_id, d.n_schools);
    if (sch.second) { ++d.n_schools; d.school_ids.push_back(s.school_id); }
    auto tch = teachers.emplace(s.teacher_id, d.n_teachers);
    if (tch.second) { ++d.n_teachers; d.teacher_ids.push_back(s.teacher_id); }
    d.block_of.push_back(blk.first->second);
    d.school_of.push_back(sch.first->second);
    d.teacher_of.push_back(tch.first->second);
    d.X.push_back(s.covariates);
    d.y.push_back(s.y);
    d.z.push_back(s.z);
    if (variant == ModelVariant::mbar) {
      if (s.z == 1) {
        const auto& e = wm.at(s.student_id);
        d.mbar_obs.push_back(static_cast<double>(e.second) / e.first);
        d.control_slot.push_back(-1);
      } else {
        d.mbar_obs.push_back(std::nan(""));
        d.control_slot.push_back(d.n_control_slots++);
      }
    }
  }
  d.p = d.X.empty() ? 0 : static_cast<int>(d.X[0].size());
  for (const auto& x : d.X)
    if (static_cast<int>(x.size()) != d.p)
      throw DataError("inconsistent covariate dimensions across students");

  if (variant == ModelVariant::latent) {
    for (const auto& r : data.records) {
      auto it = students.find(r.student_id);
      if (it == students.end()) continue;
      d.records.push_back({it->second, sections.at(r.section_id), r.mastered});
    }
  }
  d.nsec.assign(d.n, 0);
  for (const auto& r : d.records) ++d.nsec[r.student];
  return d;
}

PsModel::PsModel(const TrialDataset& data, const ModelSpec& spec)
    : spec_(spec), data_(PsData::build(data, spec.variant)) {
  const auto& d = data_;
  if (spec_.include_outcome) {
    map_.add("beta_Y", d.p);
    map_.add("block_Y", d.n_blocks);
    map_.add("a", 1);
    map_.add("b0", 1);
    map_.add("b1", 1);
    map_.add("u_teacher_Y", d.n_teachers);
    map_.add("u_school_Y", d.n_schools);
    map_.add("log_sd_teacher_Y", 1);
    map_.add("log_sd_school_Y", 1);
    map_.add("log_sigma_Y_C", 1);
    map_.add("log_sigma_Y_T", 1);
  }
  if (spec_.variant == ModelVariant::latent) {
    map_.add("delta", d.n_sections);
    if (spec_.family != IrtFamily::rasch) map_.add("log_disc", d.n_sections);
    if (spec_.family == IrtFamily::threepl) map_.add("logit_guess", d.n_sections);
  }
  map_.add("beta_M", d.p);
  map_.add("u_teacher_M", d.n_teachers);
  map_.add("u_school_M", d.n_schools);
  map_.add("log_sd_teacher_M", 1);
  map_.add("log_sd_school_M", 1);
  map_.add("log_sigma_M", 1);
  if (spec_.variant == ModelVariant::latent) {
    map_.add("eta", d.n);
  } else {
    map_.add("mbar_miss", d.n_control_slots);
  }

  for (const auto& seg : map_.segments()) {
    if (seg.size == 1) {
      names_.push_back(seg.name);
    } else {
      for (int k = 0; k < seg.size; ++k)
        names_.push_back(seg.name + "[" + std::to_string(k) + "]");
    }
  }
}

double PsModel::eval(const std::vector<double>& x, std::vector<double>* grad,
                     SegmentValues* segments) const {
  const auto& d = data_;
  const bool latent = spec_.variant == ModelVariant::latent;
  const bool centered = spec_.centered_intercepts;
  if (static_cast<int>(x.size()) != dim()) throw std::runtime_error("parameter vector has wrong dimension");
  if (grad) grad->assign(dim(), 0.0);
  auto g = [&](int idx) -> double& {
    static double sink;
    return grad ? (*grad)[idx] : sink;
  };

  SegmentValues sv;

  // ---- latent regression segment offsets
  const int o_betaM = map_.offset("beta_M");
  const int o_uMt = map_.offset("u_teacher_M");
  const int o_uMs = map_.offset("u_school_M");
  const int o_lsdMt = map_.offset("log_sd_teacher_M");
  const int o_lsdMs = map_.offset("log_sd_school_M");
  const int o_lsigM = map_.offset("log_sigma_M");
  const double sd_Mt = std::exp(x[o_lsdMt]);
  const double sd_Ms = std::exp(x[o_lsdMs]);
  const double sig_M = std::exp(x[o_lsigM]);

  const int o_eta = latent ? map_.offset("eta") : map_.offset("mbar_miss");

  // per-student eta value (latent eta, or observed/latent mbar)
  auto eta_of = [&](int i) {
    if (latent) return x[o_eta + i];
    return d.z[i] ? d.mbar_obs[i] : x[o_eta + d.control_slot[i]];
  };
  // gradient slot for eta of student i, or -1 if observed
  auto eta_slot = [&](int i) {
    if (latent) return o_eta + i;
    return d.z[i] ? -1 : o_eta + d.control_slot[i];
  };

  // ---- (i) mastery likelihood (latent variant only)
  if (latent && !d.records.empty()) {
    const int o_delta = map_.offset("delta");
    const int o_ldisc = spec_.family != IrtFamily::rasch ? map_.offset("log_disc") : -1;
    const int o_guess = spec_.family == IrtFamily::threepl ? map_.offset("logit_guess") : -1;
    for (const auto& r : d.records) {
      double delta = x[o_delta + r.section];
      double disc = o_ldisc >= 0 ? std::exp(x[o_ldisc + r.section]) : 1.0;
      double guess = o_guess >= 0 ? inv_logit(x[o_guess + r.section]) : 0.0;
      double eta = eta_of(r.student);
      double t = disc * (eta - delta);
      double l = inv_logit(t);
      double dll_dt;  // d loglik / d t
      if (r.mastered) {
        if (guess == 0.0) {
          sv.mastery += -log1p_exp(-t);
          dll_dt = 1.0 - l;
        } else {
          double p = guess + (1.0 - guess) * l;
          sv.mastery += std::log(p);
          dll_dt = (1.0 - guess) * l * (1.0 - l) / p;
          if (grad && o_guess >= 0) {
            // d loglik / d logit_guess = (1-l)/p * guess*(1-guess)
            g(o_guess + r.section) += (1.0 - l) / p * guess * (1.0 - guess);
          }
        }
      } else {
        sv.mastery += std::log1p(-guess) - log1p_exp(t);
        dll_dt = -l;
        if (grad && o_guess >= 0) g(o_guess + r.section) += -guess;  // d log(1-guess)/d logit_guess
      }
      if (grad) {
        int es = eta_slot(r.student);
        if (es >= 0) g(es) += dll_dt * disc;
        g(o_delta + r.section) += -dll_dt * disc;
        if (o_ldisc >= 0) g(o_ldisc + r.section) += dll_dt * t;  // d t/d log disc = t
      }
    }
  }

  // ---- (ii) latent regression (eta or mbar as response)
  for (int i = 0; i < d.n; ++i) {
    double mu = 0;
    for (int j = 0; j < d.p; ++j) mu += d.X[i][j] * x[o_betaM + j];
    double uMt = x[o_uMt + d.teacher_of[i]];
    double uMs = x[o_uMs + d.school_of[i]];
    double eMt = centered ? uMt : sd_Mt * uMt;
    double eMs = centered ? uMs : sd_Ms * uMs;
    mu += eMt + eMs;
    double eta = eta_of(i);
    double zres = (eta - mu) / sig_M;
    sv.latent_reg += -kLogSqrt2Pi - x[o_lsigM] - 0.5 * zres * zres;
    if (grad) {
      double gmu = zres / sig_M;  // d ll / d mu
      int es = eta_slot(i);
      if (es >= 0) g(es) += -gmu;
      for (int j = 0; j < d.p; ++j) g(o_betaM + j) += gmu * d.X[i][j];
      if (centered) {
        g(o_uMt + d.teacher_of[i]) += gmu;
        g(o_uMs + d.school_of[i]) += gmu;
      } else {
        g(o_uMt + d.teacher_of[i]) += gmu * sd_Mt;
        g(o_uMs + d.school_of[i]) += gmu * sd_Ms;
        g(o_lsdMt) += gmu * eMt;
        g(o_lsdMs) += gmu * eMs;
      }
      g(o_lsigM) += -1.0 + zres * zres;
    }
  }
  // intercept densities
  for (int t = 0; t < d.n_teachers; ++t) {
    double u = x[o_uMt + t];
    if (centered) {
      double zr = u / sd_Mt;
      sv.latent_reg += -kLogSqrt2Pi - x[o_lsdMt] - 0.5 * zr * zr;
      if (grad) {
        g(o_uMt + t) += -u / (sd_Mt * sd_Mt);
        g(o_lsdMt) += -1.0 + zr * zr;
      }
    } else {
      sv.latent_reg += -kLogSqrt2Pi - 0.5 * u * u;
      if (grad) g(o_uMt + t) += -u;
    }
  }
  for (int s = 0; s < d.n_schools; ++s) {
    double u = x[o_uMs + s];
    if (centered) {
      double zr = u / sd_Ms;
      sv.latent_reg += -kLogSqrt2Pi - x[o_lsdMs] - 0.5 * zr * zr;
      if (grad) {
        g(o_uMs + s) += -u / (sd_Ms * sd_Ms);
        g(o_lsdMs) += -1.0 + zr * zr;
      }
    } else {
      sv.latent_reg += -kLogSqrt2Pi - 0.5 * u * u;
      if (grad) g(o_uMs + s) += -u;
    }
  }

  // ---- (iii) outcome model
  if (spec_.include_outcome) {
    const int o_betaY = map_.offset("beta_Y");
    const int o_blkY = map_.offset("block_Y");
    const int o_a = map_.offset("a");
    const int o_b0 = map_.offset("b0");
    const int o_b1 = map_.offset("b1");
    const int o_uYt = map_.offset("u_teacher_Y");
    const int o_uYs = map_.offset("u_school_Y");
    const int o_lsdYt = map_.offset("log_sd_teacher_Y");
    const int o_lsdYs = map_.offset("log_sd_school_Y");
    const int o_lsigC = map_.offset("log_sigma_Y_C");
    const int o_lsigT = map_.offset("log_sigma_Y_T");
    const double sd_Yt = std::exp(x[o_lsdYt]);
    const double sd_Ys = std::exp(x[o_lsdYs]);
    const double a = x[o_a], b0 = x[o_b0], b1 = x[o_b1];

    for (int i = 0; i < d.n; ++i) {
      double mu = x[o_blkY + d.block_of[i]];
      for (int j = 0; j < d.p; ++j) mu += d.X[i][j] * x[o_betaY + j];
      double eta = eta_of(i);
      mu += a * eta;
      if (d.z[i]) mu += b0 + b1 * eta;
      double uYt = x[o_uYt + d.teacher_of[i]];
      double uYs = x[o_uYs + d.school_of[i]];
      double eYt = centered ? uYt : sd_Yt * uYt;
      double eYs = centered ? uYs : sd_Ys * uYs;
      mu += eYt + eYs;
      int o_lsig = d.z[i] ? o_lsigT : o_lsigC;
      double sig = std::exp(x[o_lsig]);
      double zres = (d.y[i] - mu) / sig;
      sv.outcome += -kLogSqrt2Pi - x[o_lsig] - 0.5 * zres * zres;
      if (grad) {
        double gmu = zres / sig;
        g(o_blkY + d.block_of[i]) += gmu;
        for (int j = 0; j < d.p; ++j) g(o_betaY + j) += gmu * d.X[i][j];
        g(o_a) += gmu * eta;
        if (d.z[i]) {
          g(o_b0) += gmu;
          g(o_b1) += gmu * eta;
        }
        int es = eta_slot(i);
        if (es >= 0) g(es) += gmu * (a + (d.z[i] ? b1 : 0.0));
        if (centered) {
          g(o_uYt + d.teacher_of[i]) += gmu;
          g(o_uYs + d.school_of[i]) += gmu;
        } else {
          g(o_uYt + d.teacher_of[i]) += gmu * sd_Yt;
          g(o_uYs + d.school_of[i]) += gmu * sd_Ys;
          g(o_lsdYt) += gmu * eYt;
          g(o_lsdYs) += gmu * eYs;
        }
        g(o_lsig) += -1.0 + zres * zres;
      }
    }
    for (int t = 0; t < d.n_teachers; ++t) {
      double u = x[o_uYt + t];
      if (centered) {
        double zr = u / sd_Yt;
        sv.outcome += -kLogSqrt2Pi - x[o_lsdYt] - 0.5 * zr * zr;
        if (grad) {
          g(o_uYt + t) += -u / (sd_Yt * sd_Yt);
          g(o_lsdYt) += -1.0 + zr * zr;
        }
      } else {
        sv.outcome += -kLogSqrt2Pi - 0.5 * u * u;
        if (grad) g(o_uYt + t) += -u;
      }
    }
    for (int s = 0; s < d.n_schools; ++s) {
      double u = x[o_uYs + s];
      if (centered) {
        double zr = u / sd_Ys;
        sv.outcome += -kLogSqrt2Pi - x[o_lsdYs] - 0.5 * zr * zr;
        if (grad) {
          g(o_uYs + s) += -u / (sd_Ys * sd_Ys);
          g(o_lsdYs) += -1.0 + zr * zr;
        }
      } else {
        sv.outcome += -kLogSqrt2Pi - 0.5 * u * u;
        if (grad) g(o_uYs + s) += -u;
      }
    }
  }

  // ---- (iv) priors + change-of-variables
  const double csd = spec_.priors.coef_sd;
  const double esd = spec_.priors.effect_sd;
  auto normal_prior = [&](int off, int size, double sd) {
    for (int k = 0; k < size; ++k) {
      double v = x[off + k];
      sv.prior += -kLogSqrt2Pi - std::log(sd) - 0.5 * v * v / (sd * sd);
      if (grad) g(off + k) += -v / (sd * sd);
    }
  };
  auto scale_term = [&](int off) {
    // parameter is s = log(sigma); improper-uniform prior on sigma contributes the Jacobian only
    sv.prior += x[off];
    if (grad) g(off) += 1.0;
    if (spec_.priors.scale_prior == ScalePrior::half_normal) {
      double s0 = spec_.priors.scale_halfnormal_sd;
      double sig = std::exp(x[off]);
      sv.prior += std::log(2.0) - kLogSqrt2Pi - std::log(s0) - 0.5 * sig * sig / (s0 * s0);
      if (grad) g(off) += -sig * sig / (s0 * s0);
    }
  };

  normal_prior(o_betaM, d.p, csd);
  scale_term(o_lsdMt);
  scale_term(o_lsdMs);
  scale_term(o_lsigM);
  if (spec_.include_outcome) {
    normal_prior(map_.offset("beta_Y"), d.p, csd);
    normal_prior(map_.offset("block_Y"), d.n_blocks, csd);
    normal_prior(map_.offset("a"), 1, esd);
    normal_prior(map_.offset("b0"), 1, esd);
    normal_prior(map_.offset("b1"), 1, esd);
    scale_term(map_.offset("log_sd_teacher_Y"));
    scale_term(map_.offset("log_sd_school_Y"));
    scale_term(map_.offset("log_sigma_Y_C"));
    scale_term(map_.offset("log_sigma_Y_T"));
  }
  if (latent && spec_.family != IrtFamily::rasch) {
    // delta flat; log disc ~ N(0, 0.5) (lognormal(0,0.5) on disc)
    int o_ldisc = map_.offset("log_disc");
    normal_prior(o_ldisc, d.n_sections, 0.5);
    if (spec_.family == IrtFamily::threepl) {
      // guess ~ Beta(2,8) with logit transform; combined with Jacobian:
      // 2 log(g) + 8 log(1-g) - log B(2,8)
      int o_guess = map_.offset("logit_guess");
      for (int s = 0; s < d.n_sections; ++s) {
        double t = x[o_guess + s];
        double gg = inv_logit(t);
        sv.prior += 2.0 * std::log(gg) + 8.0 * std::log1p(-gg) - kLogBeta28;
        if (grad) g(o_guess + s) += 2.0 - 10.0 * gg;
      }
    }
  }

  if (segments) *segments = sv;
  return sv.mastery + sv.latent_reg + sv.outcome + sv.prior;
}

std::vector<double> PsModel::grad_log_posterior(const std::vector<double>& x) const {
  std::vector<double> grad;
  eval(x, &grad);
  return grad;
}

void PsModel::check_finite(const std::vector<double>& x) const {
  SegmentValues sv;
  std::vector<double> grad;
  eval(x, &grad, &sv);
  auto bad = [](double v) { return !std::isfinite(v); };
  if (bad(sv.mastery)) throw std::runtime_error("non-finite log posterior in segment 'mastery'");
  if (bad(sv.latent_reg)) throw std::runtime_error("non-finite log posterior in segment 'latent_reg'");
  if (bad(sv.outcome)) throw std::runtime_error("non-finite log posterior in segment 'outcome'");
  if (bad(sv.prior)) throw std::runtime_error("non-finite log posterior in segment 'prior'");
  for (const auto& seg : map_.segments())
    for (int k = 0; k < seg.size; ++k)
      if (bad(grad[seg.offset + k]))
        throw std::runtime_error("non-finite gradient in segment '" + seg.name + "'");
}

std::vector<double> PsModel::init_point(std::mt19937_64& rng, double jitter) const {
  std::uniform_real_distribution<double> u(-jitter, jitter);
  std::vector<double> x(dim());
  for (auto& v : x) v = u(rng);

  // eta (or latent mbar) at the implied regression mean
  const auto& d = data_;
  const int o_betaM = map_.offset("beta_M");
  const int o_uMt = map_.offset("u_teacher_M");
  const int o_uMs = map_.offset("u_school_M");
  const double sd_Mt = std::exp(x[map_.offset("log_sd_teacher_M")]);
  const double sd_Ms = std::exp(x[map_.offset("log_sd_school_M")]);
  const bool latent = spec_.variant == ModelVariant::latent;
  const int o_eta = latent ? map_.offset("eta") : map_.offset("mbar_miss");
  for (int i = 0; i < d.n; ++i) {
    if (!latent && d.z[i]) continue;
    double mu = 0;
    for (int j = 0; j < d.p; ++j) mu += d.X[i][j] * x[o_betaM + j];
    double scale_t = spec_.centered_intercepts ? 1.0 : sd_Mt;
    double scale_s = spec_.centered_intercepts ? 1.0 : sd_Ms;
    mu += scale_t * x[o_uMt + d.teacher_of[i]] + scale_s * x[o_uMs + d.school_of[i]];
    x[o_eta + (latent ? i : d.control_slot[i])] = mu;
  }
  return x;
}

std::vector<double> PsModel::eta_values(const std::vector<double>& x) const {
  const auto& d = data_;
  const bool latent = spec_.variant == ModelVariant::latent;
  const int o_eta = latent ? map_.offset("eta") : map_.offset("mbar_miss");
  std::vector<double> out(d.n);
  for (int i = 0; i < d.n; ++i)
    out[i] = latent ? x[o_eta + i] : (d.z[i] ? d.mbar_obs[i] : x[o_eta + d.control_slot[i]]);
  return out;
}

double standardized_slope(double b1, const std::vector<double>& eta_draws) {
  double iqr = quantile_type7(eta_draws, 0.75) - quantile_type7(eta_draws, 0.25);
  return b1 * iqr;
}

}  // namespace lps
