#pragma once

#include <string>
#include <vector>

#include "lps/sampler.hpp"
#include "lps/trial_data.hpp"

namespace lps {

struct Stage2Options {
  bool include_blocks = true;  // block fixed effects in the stage-2 design
};

struct MixedModelFit {
  std::vector<std::string> coef_names;
  std::vector<double> estimates;
  std::vector<double> variances;  // sampling variances of the estimates
  double interaction_est = 0.0;   // treatment x eta coefficient
  double interaction_var = 0.0;
  double var_teacher = 0.0;
  double var_school = 0.0;
  double sigma2 = 0.0;
  bool converged = true;
};

struct PooledEstimate {
  double mean = 0.0;          // across-draw mean of the interaction coefficient
  double between_var = 0.0;   // variance of estimates across draws
  double within_var = 0.0;    // average sampling variance within fits
  double total_var = 0.0;     // between + within
  double scaled_sd = 0.0;     // sqrt(total_var), the comparison scale for b1
  long n_fits = 0;
};

// n thinned eta vectors, evenly spaced across the pooled chains.
std::vector<std::vector<double>> draw_eta_vectors(const PosteriorDraws& posterior, int n);

// y ~ X (+ blocks) + z + eta + z:eta with teacher/school random intercepts,
// fit by profiled REML over the two variance ratios.
MixedModelFit fit_stage2(const TrialDataset& dataset, const std::vector<double>& eta,
                         const Stage2Options& options = {});

PooledEstimate pool(const std::vector<MixedModelFit>& fits);

void write_fits_csv(const std::vector<MixedModelFit>& fits, const std::string& path);
std::string pooled_text(const PooledEstimate& est);

}  // namespace lps
