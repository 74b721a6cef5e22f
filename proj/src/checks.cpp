#include "lps/checks.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "lps/csv.hpp"
#include "lps/stats.hpp"

namespace lps {

std::vector<double> draw_row(const PosteriorDraws& draws, int chain, int draw) {
  std::vector<double> x(draws.dim);
  for (int p = 0; p < draws.dim; ++p) x[p] = draws.at(chain, draw, p);
  return x;
}

std::vector<double> slope_draws(const PsModel& model, const PosteriorDraws& draws) {
  int b1 = draws.param_index("b1");
  std::vector<double> out;
  out.reserve(static_cast<size_t>(draws.n_chains) * draws.n_draws);
  for (int c = 0; c < draws.n_chains; ++c)
    for (int d = 0; d < draws.n_draws; ++d) {
      auto x = draw_row(draws, c, d);
      auto eta = model.eta_values(x);
      out.push_back(standardized_slope(x[b1], eta));
    }
  return out;
}

namespace {

struct ParamSummary {
  double mean, sd, q025, q975;
};

ParamSummary summarize_vec(const std::vector<double>& v) {
  return {mean_of(v), sd_of(v), quantile_type7(v, 0.025), quantile_type7(v, 0.975)};
}

TrackedParam track(const std::string& name, double truth, const std::vector<double>& v) {
  auto s = summarize_vec(v);
  return {name, truth, s.mean, s.sd, s.q025, s.q975, truth >= s.q025 && truth <= s.q975};
}

}  // namespace

std::vector<PlaceboResult> run_placebo_grid(const TrialDataset& treated_only,
                                            const PsModel& eta_model,
                                            const PosteriorDraws& posterior,
                                            const std::vector<PlaceboSpec>& specs,
                                            const SamplerConfig& sampler_cfg,
                                            const ModelSpec& fit_spec) {
  // posterior means of eta from the treatment-group fit
  const int n = static_cast<int>(treated_only.students.size());
  if (eta_model.data().n != n)
    throw std::runtime_error("run_placebo_grid: eta model does not match the treated dataset");
  std::vector<double> eta_hat(n);
  for (int i = 0; i < n; ++i)
    eta_hat[i] = mean_of(posterior.flat("eta[" + std::to_string(i) + "]"));

  std::vector<PlaceboResult> results;
  for (const auto& spec : specs) {
    PlaceboResult res;
    res.kind = spec.kind;
    res.true_coef = spec.coef;
    try {
      auto [pdata, ptruth] = make_placebo(treated_only, eta_hat, spec);
      PsModel model(pdata, fit_spec);
      auto draws = sample(model, sampler_cfg);
      auto b0 = draws.flat("b0");
      auto b1 = draws.flat("b1");
      auto s0 = summarize_vec(b0);
      auto s1 = summarize_vec(b1);
      res.b0_mean = s0.mean;
      res.b0_sd = s0.sd;
      res.b1_mean = s1.mean;
      res.b1_sd = s1.sd;
      res.b1_q025 = s1.q025;
      res.b1_q975 = s1.q975;
      switch (spec.kind) {
        case PlaceboKind::zero:
          res.pass = std::abs(res.b1_mean) < 2 * res.b1_sd;
          res.note = "|mean b1| < 2 sd";
          break;
        case PlaceboKind::linear:
          res.pass = spec.coef[1] >= res.b1_q025 && spec.coef[1] <= res.b1_q975;
          res.note = "95% interval covers injected slope";
          break;
        case PlaceboKind::quadratic:
        case PlaceboKind::random:
          res.pass = std::abs(res.b1_mean - spec.coef[1]) < 2 * res.b1_sd;
          res.note = "b1 within 2 sd of injected linear slope";
          break;
      }
    } catch (const std::exception& e) {
      res.error = e.what();
    }
    results.push_back(std::move(res));
  }
  return results;
}

std::vector<RecoveryResult> run_recovery(const GenConfig& gen, int n_reps,
                                         const SamplerConfig& sampler_cfg,
                                         const ModelSpec& fit_spec) {
  std::vector<RecoveryResult> results;
  for (int r = 0; r < n_reps; ++r) {
    RecoveryResult res;
    res.replication = r;
    try {
      GenConfig g = gen;
      g.seed = gen.seed + static_cast<std::uint64_t>(r) * 1000003ULL;
      auto [data, truth] = generate(g);
      PsModel model(data, fit_spec);
      SamplerConfig sc = sampler_cfg;
      sc.seed = sampler_cfg.seed + r;
      auto draws = sample(model, sc);

      res.params.push_back(track("b0", truth.config.b0, draws.flat("b0")));
      res.params.push_back(track("b1", truth.config.b1, draws.flat("b1")));
      res.params.push_back(track("a", truth.config.a, draws.flat("a")));
      auto lsig = draws.flat("log_sigma_M");
      for (auto& v : lsig) v = std::exp(v);
      res.params.push_back(track("sigma_M", truth.config.sigma_M, lsig));
      auto lsc = draws.flat("log_sigma_Y_C");
      for (auto& v : lsc) v = std::exp(v);
      res.params.push_back(track("sigma_Y_C", truth.config.sigma_Y_C, lsc));
      auto lst = draws.flat("log_sigma_Y_T");
      for (auto& v : lst) v = std::exp(v);
      res.params.push_back(track("sigma_Y_T", truth.config.sigma_Y_T, lst));
      if (model.index_map().has("delta")) {
        const auto& secs = model.data().section_ids;
        std::vector<int> picks = {0, static_cast<int>(secs.size()) / 2,
                                  static_cast<int>(secs.size()) - 1};
        for (int s : picks) {
          // generator section id "secK" maps to truth.delta[K]
          int k = std::stoi(secs[s].substr(3));
          res.params.push_back(track("delta[" + std::to_string(s) + "]", truth.delta[k],
                                     draws.flat("delta[" + std::to_string(s) + "]")));
        }
      }
    } catch (const std::exception& e) {
      res.error = e.what();
    }
    results.push_back(std::move(res));
  }
  return results;
}

std::vector<FamilyRow> sensitivity_family(const TrialDataset& dataset,
                                          const std::vector<IrtFamily>& families,
                                          const SamplerConfig& sampler_cfg) {
  std::vector<FamilyRow> rows;
  for (IrtFamily fam : families) {
    FamilyRow row;
    row.family = fam;
    try {
      ModelSpec spec;
      spec.family = fam;
      PsModel model(dataset, spec);
      auto draws = sample(model, sampler_cfg);
      auto slopes = slope_draws(model, draws);
      row.slope_mean = mean_of(slopes);
      row.slope_sd = sd_of(slopes);
      auto b1 = draws.flat("b1");
      row.b1_mean = mean_of(b1);
      row.b1_sd = sd_of(b1);
      if (fam == IrtFamily::threepl) {
        for (int s = 0; s < model.data().n_sections; ++s) {
          auto g = draws.flat("logit_guess[" + std::to_string(s) + "]");
          for (auto& v : g) v = inv_logit(v);
          row.max_guess_mean = std::max(row.max_guess_mean, mean_of(g));
        }
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_placebo_csv(const std::vector<PlaceboResult>& results, const std::string& path) {
  CsvWriter w(path);
  w.row("kind", "c0", "c1", "c2", "b0_mean", "b0_sd", "b1_mean", "b1_sd", "b1_q025", "b1_q975",
        "pass", "note", "error");
  for (const auto& r : results) {
    std::vector<double> c = r.true_coef;
    c.resize(3, 0.0);
    w.row(placebo_kind_name(r.kind), c[0], c[1], c[2], r.b0_mean, r.b0_sd, r.b1_mean, r.b1_sd,
          r.b1_q025, r.b1_q975, r.pass ? 1 : 0, r.note, r.error);
  }
}

void write_recovery_csv(const std::vector<RecoveryResult>& results, const std::string& path) {
  CsvWriter w(path);
  w.row("replication", "parameter", "truth", "mean", "sd", "q025", "q975", "covered", "error");
  for (const auto& r : results) {
    if (!r.error.empty()) {
      w.row(r.replication, "", "", "", "", "", "", "", r.error);
      continue;
    }
    for (const auto& p : r.params)
      w.row(r.replication, p.name, p.truth, p.mean, p.sd, p.q025, p.q975, p.covered ? 1 : 0, "");
  }
}

void write_family_csv(const std::vector<FamilyRow>& rows, const std::string& path) {
  CsvWriter w(path);
  w.row("family", "slope_mean", "slope_sd", "b1_mean", "b1_sd", "max_guess_mean", "error");
  for (const auto& r : rows)
    w.row(family_name(r.family), r.slope_mean, r.slope_sd, r.b1_mean, r.b1_sd, r.max_guess_mean,
          r.error);
}

std::string rollup_report(const std::vector<PlaceboResult>& placebo,
                          const std::vector<RecoveryResult>& recovery) {
  std::ostringstream os;
  os.precision(4);
  if (!placebo.empty()) {
    os << "## Placebo grid\n\n";
    for (const auto& r : placebo) {
      os << "- " << placebo_kind_name(r.kind) << ": ";
      if (!r.error.empty()) {
        os << "ERROR " << r.error << "\n";
      } else {
        os << "b1 = " << r.b1_mean << " (sd " << r.b1_sd << "), " << r.note << ": "
           << (r.pass ? "pass" : "FAIL") << "\n";
      }
    }
    os << "\n";
  }
  if (!recovery.empty()) {
    os << "## Parameter recovery\n\n";
    std::map<std::string, std::pair<int, int>> cover;  // name -> (covered, total)
    for (const auto& r : recovery) {
      if (!r.error.empty()) continue;
      for (const auto& p : r.params) {
        auto& c = cover[p.name];
        c.first += p.covered;
        ++c.second;
      }
    }
    for (const auto& [name, c] : cover)
      os << "- " << name << ": 95% interval coverage " << c.first << "/" << c.second << "\n";
  }
  return os.str();
}

}  // namespace lps
