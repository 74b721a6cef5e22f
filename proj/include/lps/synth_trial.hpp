#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lps/config.hpp"
#include "lps/trial_data.hpp"

namespace lps {

struct GenConfig {
  // hierarchy counts
  int n_blocks = 10;
  int schools_per_block = 2;
  int teachers_per_school = 3;
  int students_per_teacher = 15;
  int n_sections = 40;
  double mean_sections = 20.0;  // Poisson, truncated to >= 1; 0 disables mastery logs

  // covariates: independent standard normals plus one binary column
  int n_continuous = 3;
  double binary_prob = 0.5;

  // latent regression truth
  std::vector<double> beta_M = {0.5, -0.3, 0.2, 0.25};
  double sigma_M = 0.8;
  double sd_teacher_M = 0.2;
  double sd_school_M = 0.2;
  std::vector<double> delta;  // empty: evenly spaced over [-1.5, 1.5]

  // outcome truth
  std::vector<double> beta_Y = {0.4, -0.2, 0.1, 0.15};
  std::vector<double> block_Y;  // empty: evenly spaced over [-0.5, 0.5]
  double a = 0.3;
  double b0 = 0.2;
  double b1 = -0.15;
  double sd_teacher_Y = 0.2;
  double sd_school_Y = 0.2;
  double sigma_Y_C = 0.5;
  double sigma_Y_T = 0.5;

  std::uint64_t seed = 1;

  void validate() const;
  static GenConfig from_config(const Config& cfg);
  std::string echo() const;  // config round-trip text
};

struct SyntheticTruth {
  std::vector<std::string> student_ids;
  std::vector<double> eta_T, Y_T, Y_C;
  std::vector<double> delta;  // per retained section, generator order
  GenConfig config;
};

enum class PlaceboKind { zero, random, linear, quadratic };

struct PlaceboSpec {
  PlaceboKind kind = PlaceboKind::zero;
  std::vector<double> coef;  // tau(eta) = coef[0] + coef[1]*eta + coef[2]*eta^2
  double noise_sd = 0.2;     // random kind
  std::uint64_t seed = 1;

  void validate() const;
  static PlaceboSpec make(PlaceboKind kind, std::vector<double> coef = {}, double noise_sd = 0.2,
                          std::uint64_t seed = 1);
};

PlaceboKind placebo_kind_from_string(const std::string& s);
std::string placebo_kind_name(PlaceboKind k);

// Samples a full trial from the generative model. Deterministic given config.seed.
std::pair<TrialDataset, SyntheticTruth> generate(const GenConfig& config);

// Builds a placebo dataset from the treated arm: control is a relabeled duplicate
// (mastery stripped), treated outcomes shifted by tau(eta_hat).
std::pair<TrialDataset, SyntheticTruth> make_placebo(const TrialDataset& treated_only,
                                                     const std::vector<double>& eta_hat,
                                                     const PlaceboSpec& spec);

void write_truth_csv(const SyntheticTruth& truth, const std::string& path);

}  // namespace lps
