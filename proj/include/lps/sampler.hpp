#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace lps {

// Differentiable log-density interface for the HMC engine.
class Target {
 public:
  virtual ~Target() = default;
  virtual int dim() const = 0;
  virtual double logp_grad(const std::vector<double>& x, std::vector<double>& grad) const = 0;
  virtual std::vector<double> init_point(std::mt19937_64& rng, double jitter) const;
  virtual std::vector<std::string> names() const;
};

class FnTarget : public Target {
 public:
  using Fn = std::function<double(const std::vector<double>&, std::vector<double>&)>;
  FnTarget(int dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}
  int dim() const override { return dim_; }
  double logp_grad(const std::vector<double>& x, std::vector<double>& grad) const override {
    return fn_(x, grad);
  }

 private:
  int dim_;
  Fn fn_;
};

struct SamplerConfig {
  int n_chains = 4;
  int n_warmup = 1000;
  int n_draws = 1000;
  double target_accept = 0.8;
  int max_leapfrog = 32;
  std::uint64_t seed = 1;
  double init_jitter = 1.0;
  bool parallel_chains = false;
  bool check_gradient = true;  // finite-difference check at the initial point
};

struct ChainStats {
  long n_divergences = 0;
  double mean_accept = 0.0;
  double step_size = 0.0;
};

struct PosteriorDraws {
  int n_chains = 0, n_draws = 0, dim = 0;
  std::vector<double> draws;  // [chain][draw][dim]
  std::vector<std::string> names;
  std::vector<double> rhat;      // per parameter, split-chain
  std::vector<double> ess_bulk;  // per parameter
  std::vector<ChainStats> chain_stats;
  bool reliable = true;  // false if divergence rate > 10%

  double at(int chain, int draw, int param) const {
    return draws[(static_cast<size_t>(chain) * n_draws + draw) * dim + param];
  }
  // all draws of one parameter, chains concatenated
  std::vector<double> flat(int param) const;
  std::vector<double> flat(const std::string& name) const;
  int param_index(const std::string& name) const;
  long total_divergences() const;
};

class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

PosteriorDraws sample(const Target& target, const SamplerConfig& config);

struct DiagRow {
  std::string name;
  double rhat = 0.0;
  double ess = 0.0;
};

struct DiagReport {
  std::vector<DiagRow> rows;
  double max_rhat = 0.0;
  double min_ess = 0.0;
  long n_divergences = 0;
  bool reliable = true;
};

DiagReport diagnostics(const PosteriorDraws& draws);
void write_traceplot_csv(const PosteriorDraws& draws, const std::vector<std::string>& params,
                         const std::string& path);

struct SummaryRow {
  std::string name;
  double mean = 0, sd = 0;
  double q025 = 0, q25 = 0, q50 = 0, q75 = 0, q975 = 0;
  double prob_neg = 0;  // Pr(param < 0)
  double rhat = 0, ess = 0;
};

struct SummaryTable {
  std::vector<SummaryRow> rows;
  const SummaryRow& row(const std::string& name) const;
  void write_csv(const std::string& path) const;
  std::string to_text() const;
};

SummaryTable summarize(const PosteriorDraws& draws, const std::vector<std::string>& params);

// Split-chain Gelman-Rubin statistic and bulk ESS on a [chain][draw] series.
double split_rhat(const std::vector<std::vector<double>>& chains);
double bulk_ess(const std::vector<std::vector<double>>& chains);

// Persistence: one row per draw (chain, iteration, selected parameters).
void write_draws_csv(const PosteriorDraws& draws, const std::vector<std::string>& params,
                     const std::string& path);
// All parameters matching prefix (e.g. "eta[") as a wide CSV.
void write_wide_csv(const PosteriorDraws& draws, const std::string& prefix, const std::string& path);
PosteriorDraws read_draws_csv(const std::string& path);

// Column-wise union of two draw sets with identical chain/draw shape.
PosteriorDraws merge_draws(const PosteriorDraws& a, const PosteriorDraws& b);

}  // namespace lps
