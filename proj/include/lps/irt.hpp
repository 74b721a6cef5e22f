#pragma once

#include <string>
#include <vector>

namespace lps {

enum class IrtFamily { rasch, twopl, threepl };

IrtFamily family_from_string(const std::string& s);
std::string family_name(IrtFamily f);

struct SectionParams {
  double delta = 0.0;  // difficulty
  double disc = 1.0;   // discrimination, fixed to 1 for rasch
  double guess = 0.0;  // lower asymptote, fixed to 0 for rasch/2pl
};

struct MeasurementParams {
  IrtFamily family = IrtFamily::rasch;
  std::vector<SectionParams> sections;  // one per retained section

  void validate() const;
};

struct LatentRegressionParams {
  std::vector<double> beta_M;
  std::vector<double> teacher_fx;  // values, one per teacher
  std::vector<double> school_fx;
  double sigma_M = 1.0;
  double sd_teacher_M = 1.0;
  double sd_school_M = 1.0;
};

// Index-mapped mastery record (dense indices into eta / section arrays).
struct IndexedRecord {
  int student = 0;
  int section = 0;
  int mastered = 0;
};

double mastery_prob(double eta, const SectionParams& sec, IrtFamily family);

// Bernoulli log-likelihood over records; students with no records contribute 0.
double mastery_loglik(const std::vector<IndexedRecord>& records, const std::vector<double>& eta,
                      const MeasurementParams& params);

// Normal log-density of eta given the explanatory regression, plus intercept log-densities.
// covariates is row-major n x p; teacher_of/school_of map students to intercept indices.
double latent_regression_logdensity(const std::vector<double>& eta,
                                    const std::vector<std::vector<double>>& covariates,
                                    const std::vector<int>& teacher_of,
                                    const std::vector<int>& school_of,
                                    const LatentRegressionParams& params);

// log(1 + exp(x)) without overflow
double log1p_exp(double x);
double inv_logit(double x);

struct Q3Pair {
  int section_a = 0;
  int section_b = 0;
  double realized_q3 = 0.0;  // posterior mean of realized Q3
  double p_value = 0.0;
  long n_coworkers = 0;
};

struct Q3Report {
  std::vector<Q3Pair> pairs;
  std::vector<std::pair<int, int>> skipped;  // pairs with too few co-workers
  double median_p_value = 0.0;
  long n_draws_used = 0;
};

}  // namespace lps
