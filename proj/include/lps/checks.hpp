#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lps/ps_model.hpp"
#include "lps/sampler.hpp"
#include "lps/synth_trial.hpp"

namespace lps {

// Full parameter vector of one retained draw.
std::vector<double> draw_row(const PosteriorDraws& draws, int chain, int draw);

// Per-draw IQR-standardized slope b1 * IQR(eta), pooled across chains.
std::vector<double> slope_draws(const PsModel& model, const PosteriorDraws& draws);

struct PlaceboResult {
  PlaceboKind kind = PlaceboKind::zero;
  std::vector<double> true_coef;
  double b0_mean = 0, b0_sd = 0;
  double b1_mean = 0, b1_sd = 0;
  double b1_q025 = 0, b1_q975 = 0;
  bool pass = false;
  std::string note;
  std::string error;  // sampler failure, recorded not fatal
};

struct TrackedParam {
  std::string name;
  double truth = 0, mean = 0, sd = 0, q025 = 0, q975 = 0;
  bool covered = false;
};

struct RecoveryResult {
  int replication = 0;
  std::vector<TrackedParam> params;
  std::string error;
};

struct FamilyRow {
  IrtFamily family = IrtFamily::rasch;
  double slope_mean = 0, slope_sd = 0;
  double b1_mean = 0, b1_sd = 0;
  double max_guess_mean = 0;  // 3pl only
  std::string error;
};

// Fits the latent model to each placebo dataset built from the treated arm.
// eta_hat is taken as posterior means of eta from `posterior` (a treatment-group fit).
std::vector<PlaceboResult> run_placebo_grid(const TrialDataset& treated_only,
                                            const PsModel& eta_model,
                                            const PosteriorDraws& posterior,
                                            const std::vector<PlaceboSpec>& specs,
                                            const SamplerConfig& sampler_cfg,
                                            const ModelSpec& fit_spec = {});

std::vector<RecoveryResult> run_recovery(const GenConfig& gen, int n_reps,
                                         const SamplerConfig& sampler_cfg,
                                         const ModelSpec& fit_spec = {});

std::vector<FamilyRow> sensitivity_family(const TrialDataset& dataset,
                                          const std::vector<IrtFamily>& families,
                                          const SamplerConfig& sampler_cfg);

void write_placebo_csv(const std::vector<PlaceboResult>& results, const std::string& path);
void write_recovery_csv(const std::vector<RecoveryResult>& results, const std::string& path);
void write_family_csv(const std::vector<FamilyRow>& rows, const std::string& path);
std::string rollup_report(const std::vector<PlaceboResult>& placebo,
                          const std::vector<RecoveryResult>& recovery);

}  // namespace lps
