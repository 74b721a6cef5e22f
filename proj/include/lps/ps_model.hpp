#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "lps/config.hpp"
#include "lps/irt.hpp"
#include "lps/sampler.hpp"
#include "lps/trial_data.hpp"

namespace lps {

enum class ModelVariant { latent, mbar };
enum class ScalePrior { improper_uniform, half_normal };

struct PriorSpec {
  double coef_sd = 2.0;    // block effects and covariate coefficients
  double effect_sd = 1.0;  // a, b0, b1
  ScalePrior scale_prior = ScalePrior::improper_uniform;
  double scale_halfnormal_sd = 2.5;
};

struct ModelSpec {
  ModelVariant variant = ModelVariant::latent;
  IrtFamily family = IrtFamily::rasch;
  PriorSpec priors;
  bool centered_intercepts = false;  // non-centered by default
  bool include_outcome = true;       // false: measurement + latent regression only
  bool standardize = true;           // applied by callers before model construction
  bool append_pretest_square = true;

  static ModelSpec from_config(const Config& cfg);
};

struct IndexSegment {
  std::string name;
  int offset = 0;
  int size = 0;
};

class IndexMap {
 public:
  void add(const std::string& name, int size);
  int offset(const std::string& name) const;
  int size(const std::string& name) const;
  bool has(const std::string& name) const;
  int dim() const { return dim_; }
  const std::vector<IndexSegment>& segments() const { return segs_; }

 private:
  std::vector<IndexSegment> segs_;
  std::map<std::string, int> by_name_;
  int dim_ = 0;
};

// Per-term breakdown of the log posterior.
struct SegmentValues {
  double mastery = 0.0;     // (i)
  double latent_reg = 0.0;  // (ii) incl. intercept densities
  double outcome = 0.0;     // (iii) incl. intercept densities
  double prior = 0.0;       // (iv) incl. change-of-variables terms
};

// Dense-indexed view of a TrialDataset for likelihood evaluation.
struct PsData {
  int n = 0, p = 0, n_blocks = 0, n_schools = 0, n_teachers = 0, n_sections = 0;
  std::vector<std::vector<double>> X;  // n x p
  std::vector<double> y;
  std::vector<int> z;
  std::vector<int> block_of, school_of, teacher_of;
  std::vector<IndexedRecord> records;
  std::vector<int> nsec;             // records per student
  std::vector<double> mbar_obs;      // observed mbar for treated (mbar variant); NaN otherwise
  std::vector<int> control_slot;     // student -> latent-mbar slot, -1 if observed
  int n_control_slots = 0;
  std::vector<std::string> student_ids, block_ids, school_ids, teacher_ids, section_ids;

  static PsData build(const TrialDataset& data, ModelVariant variant);
};

class PsModel : public Target {
 public:
  PsModel(const TrialDataset& data, const ModelSpec& spec);

  int dim() const override { return map_.dim(); }
  const IndexMap& index_map() const { return map_; }
  std::vector<std::string> names() const override { return names_; }
  const PsData& data() const { return data_; }
  const ModelSpec& spec() const { return spec_; }

  double logp_grad(const std::vector<double>& x, std::vector<double>& grad) const override {
    return eval(x, &grad);
  }

  // Log posterior; fills grad (size dim) when non-null, per-term values when non-null.
  double eval(const std::vector<double>& x, std::vector<double>* grad = nullptr,
              SegmentValues* segments = nullptr) const;

  double log_posterior(const std::vector<double>& x) const { return eval(x); }
  std::vector<double> grad_log_posterior(const std::vector<double>& x) const;

  // Throws with the offending segment name if the value or gradient is non-finite at x.
  void check_finite(const std::vector<double>& x) const;

  // Jittered start, with eta (or latent mbar) at its regression mean.
  std::vector<double> init_point(std::mt19937_64& rng, double jitter) const override;

  // Per-student eta values implied by x (observed mbar for treated under the mbar variant).
  std::vector<double> eta_values(const std::vector<double>& x) const;

  static double principal_effect(double b0, double b1, double eta) { return b0 + b1 * eta; }

 private:
  ModelSpec spec_;
  PsData data_;
  IndexMap map_;
  std::vector<std::string> names_;
};

// IQR-standardized slope: b1 * IQR(eta draws); y is already in pooled-SD units.
double standardized_slope(double b1, const std::vector<double>& eta_draws);

}  // namespace lps
