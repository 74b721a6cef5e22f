#include "lps/q3.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

#include "lps/csv.hpp"
#include "lps/stats.hpp"

namespace lps {

namespace {

struct PairInfo {
  int section_a, section_b;
  std::vector<int> rec_a, rec_b;  // record indices, parallel over co-workers
};

double residual_corr(const std::vector<double>& resid, const PairInfo& pr) {
  std::vector<double> ra, rb;
  ra.reserve(pr.rec_a.size());
  rb.reserve(pr.rec_b.size());
  for (size_t k = 0; k < pr.rec_a.size(); ++k) {
    ra.push_back(resid[pr.rec_a[k]]);
    rb.push_back(resid[pr.rec_b[k]]);
  }
  return correlation(ra, rb);
}

}  // namespace

Q3Report q3_check(const PsModel& model, const PosteriorDraws& posterior, int n_rep,
                  int min_coworkers, std::uint64_t seed) {
  if (n_rep < 100) throw std::runtime_error("q3_check: n_rep must be >= 100");
  if (model.spec().variant != ModelVariant::latent)
    throw std::runtime_error("q3_check requires the latent model variant");
  const PsData& d = model.data();
  if (d.records.empty()) throw std::runtime_error("q3_check: no mastery records");

  // co-worker record pairs per section pair
  std::vector<std::vector<int>> by_student(d.n);
  for (size_t r = 0; r < d.records.size(); ++r) by_student[d.records[r].student].push_back(static_cast<int>(r));
  std::map<std::pair<int, int>, PairInfo> pairs;
  for (int i = 0; i < d.n; ++i) {
    const auto& recs = by_student[i];
    for (size_t u = 0; u < recs.size(); ++u)
      for (size_t v = u + 1; v < recs.size(); ++v) {
        int sa = d.records[recs[u]].section, sb = d.records[recs[v]].section;
        int ru = recs[u], rv = recs[v];
        if (sa > sb) {
          std::swap(sa, sb);
          std::swap(ru, rv);
        }
        auto& pr = pairs[{sa, sb}];
        pr.section_a = sa;
        pr.section_b = sb;
        pr.rec_a.push_back(ru);
        pr.rec_b.push_back(rv);
      }
  }

  Q3Report rep;
  std::vector<const PairInfo*> kept;
  for (int a = 0; a < d.n_sections; ++a)
    for (int b = a + 1; b < d.n_sections; ++b) {
      auto it = pairs.find({a, b});
      long cw = it == pairs.end() ? 0 : static_cast<long>(it->second.rec_a.size());
      if (cw < min_coworkers) {
        rep.skipped.push_back({a, b});
      } else {
        kept.push_back(&it->second);
        Q3Pair qp;
        qp.section_a = a;
        qp.section_b = b;
        qp.n_coworkers = cw;
        rep.pairs.push_back(qp);
      }
    }
  if (kept.empty()) {
    rep.median_p_value = std::nan("");
    return rep;
  }

  // evenly spaced draws across the pooled chains
  long total = static_cast<long>(posterior.n_chains) * posterior.n_draws;
  int used = static_cast<int>(std::min<long>(n_rep, total));
  // name-based lookup so reloaded draw files work as well as in-memory fits
  std::vector<int> eta_idx(d.n), delta_idx(d.n_sections);
  for (int i = 0; i < d.n; ++i) eta_idx[i] = posterior.param_index("eta[" + std::to_string(i) + "]");
  for (int s = 0; s < d.n_sections; ++s)
    delta_idx[s] = posterior.param_index("delta[" + std::to_string(s) + "]");
  const bool has_disc = model.index_map().has("log_disc");
  const bool has_guess = model.index_map().has("logit_guess");
  std::vector<int> disc_idx, guess_idx;
  for (int s = 0; s < d.n_sections; ++s) {
    if (has_disc) disc_idx.push_back(posterior.param_index("log_disc[" + std::to_string(s) + "]"));
    if (has_guess) guess_idx.push_back(posterior.param_index("logit_guess[" + std::to_string(s) + "]"));
  }

  std::vector<long> exceed(kept.size(), 0);
  std::vector<double> q3_obs_sum(kept.size(), 0.0);
  std::vector<double> resid_obs(d.records.size()), resid_rep(d.records.size());

  for (int k = 0; k < used; ++k) {
    long g = total * k / used;
    int chain = static_cast<int>(g / posterior.n_draws);
    int draw = static_cast<int>(g % posterior.n_draws);
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + k);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    for (size_t r = 0; r < d.records.size(); ++r) {
      const auto& rec = d.records[r];
      double eta = posterior.at(chain, draw, eta_idx[rec.student]);
      SectionParams sp;
      sp.delta = posterior.at(chain, draw, delta_idx[rec.section]);
      if (has_disc) sp.disc = std::exp(posterior.at(chain, draw, disc_idx[rec.section]));
      if (has_guess) sp.guess = inv_logit(posterior.at(chain, draw, guess_idx[rec.section]));
      double p = mastery_prob(eta, sp, model.spec().family);
      resid_obs[r] = rec.mastered - p;
      resid_rep[r] = (u01(rng) < p ? 1.0 : 0.0) - p;
    }
    for (size_t j = 0; j < kept.size(); ++j) {
      double qo = residual_corr(resid_obs, *kept[j]);
      double qr = residual_corr(resid_rep, *kept[j]);
      q3_obs_sum[j] += qo;
      if (std::abs(qr) >= std::abs(qo)) ++exceed[j];
    }
  }

  std::vector<double> pvals;
  for (size_t j = 0; j < kept.size(); ++j) {
    rep.pairs[j].realized_q3 = q3_obs_sum[j] / used;
    rep.pairs[j].p_value = static_cast<double>(exceed[j]) / used;
    pvals.push_back(rep.pairs[j].p_value);
  }
  rep.median_p_value = quantile_type7(pvals, 0.5);
  rep.n_draws_used = used;
  return rep;
}

void write_q3_csv(const Q3Report& report, const PsData& data, const std::string& path) {
  CsvWriter w(path);
  w.row("section_a", "section_b", "n_coworkers", "realized_q3", "p_value");
  for (const auto& p : report.pairs)
    w.row(data.section_ids[p.section_a], data.section_ids[p.section_b], p.n_coworkers,
          p.realized_q3, p.p_value);
  w.row("# median_p_value", report.median_p_value, report.n_draws_used, report.skipped.size(), "");
}

}  // namespace lps
