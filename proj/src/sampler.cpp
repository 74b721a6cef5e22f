#include "lps/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "lps/csv.hpp"
#include "lps/stats.hpp"

namespace lps {

std::vector<double> Target::init_point(std::mt19937_64& rng, double jitter) const {
  std::uniform_real_distribution<double> u(-jitter, jitter);
  std::vector<double> x(dim());
  for (auto& v : x) v = u(rng);
  return x;
}

std::vector<std::string> Target::names() const {
  std::vector<std::string> n;
  for (int i = 0; i < dim(); ++i) n.push_back("p[" + std::to_string(i) + "]");
  return n;
}

std::vector<double> PosteriorDraws::flat(int param) const {
  std::vector<double> out;
  out.reserve(static_cast<size_t>(n_chains) * n_draws);
  for (int c = 0; c < n_chains; ++c)
    for (int d = 0; d < n_draws; ++d) out.push_back(at(c, d, param));
  return out;
}

int PosteriorDraws::param_index(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw SamplerError("unknown parameter name '" + name + "'");
}

std::vector<double> PosteriorDraws::flat(const std::string& name) const {
  return flat(param_index(name));
}

long PosteriorDraws::total_divergences() const {
  long n = 0;
  for (const auto& c : chain_stats) n += c.n_divergences;
  return n;
}

namespace {

struct ChainResult {
  std::vector<double> draws;  // n_draws x dim
  ChainStats stats;
};

// mixes (seed, chain) into an independent RNG stream
std::mt19937_64 chain_rng(std::uint64_t seed, int chain) {
  std::seed_seq seq{static_cast<std::uint64_t>(0x9e3779b97f4a7c15ULL), seed,
                    static_cast<std::uint64_t>(chain + 1)};
  return std::mt19937_64(seq);
}

struct Hmc {
  const Target& target;
  const SamplerConfig& cfg;
  std::mt19937_64 rng;
  std::vector<double> inv_mass;  // diagonal
  double step = 0.1;

  std::vector<double> x, grad;
  double logp = 0;

  explicit Hmc(const Target& t, const SamplerConfig& c, int chain)
      : target(t), cfg(c), rng(chain_rng(c.seed, chain)), inv_mass(t.dim(), 1.0) {
    x = target.init_point(rng, cfg.init_jitter);
    grad.resize(target.dim());
    logp = target.logp_grad(x, grad);
    if (!std::isfinite(logp))
      throw SamplerError("non-finite log density at the initial point");
  }

  // one trajectory; returns accept probability, sets diverged
  double transition(int n_leapfrog, bool* diverged) {
    const int dim = target.dim();
    std::normal_distribution<double> nd;
    std::vector<double> p(dim);
    for (int i = 0; i < dim; ++i) p[i] = nd(rng) / std::sqrt(inv_mass[i]);
    double h0 = -logp;
    for (int i = 0; i < dim; ++i) h0 += 0.5 * p[i] * p[i] * inv_mass[i];

    std::vector<double> xq = x, gq = grad;
    double lq = logp;
    bool bad = false;
    for (int l = 0; l < n_leapfrog; ++l) {
      for (int i = 0; i < dim; ++i) p[i] += 0.5 * step * gq[i];
      for (int i = 0; i < dim; ++i) xq[i] += step * inv_mass[i] * p[i];
      lq = target.logp_grad(xq, gq);
      if (!std::isfinite(lq)) {
        bad = true;
        break;
      }
      for (int i = 0; i < dim; ++i) p[i] += 0.5 * step * gq[i];
    }
    double h1 = std::numeric_limits<double>::infinity();
    if (!bad) {
      h1 = -lq;
      for (int i = 0; i < dim; ++i) h1 += 0.5 * p[i] * p[i] * inv_mass[i];
    }
    double dh = h1 - h0;
    *diverged = !std::isfinite(dh) || dh > 1000.0;
    double accept = *diverged ? 0.0 : std::min(1.0, std::exp(-dh));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    if (!*diverged && u01(rng) < accept) {
      x = std::move(xq);
      grad = std::move(gq);
      logp = lq;
    }
    return accept;
  }

  int draw_steps() {
    std::uniform_int_distribution<int> d(1, std::max(1, cfg.max_leapfrog));
    return d(rng);
  }
};

double reasonable_step(Hmc& h) {
  // crude bracketing of a step size with accept prob near 0.5
  double s = 0.1;
  for (int iter = 0; iter < 30; ++iter) {
    h.step = s;
    bool div = false;
    Hmc probe = h;  // do not move the chain while probing
    double a = probe.transition(1, &div);
    if (a > 0.9) {
      s *= 2.0;
    } else if (a < 0.1) {
      s *= 0.5;
    } else {
      break;
    }
  }
  return s;
}

// dual-averaging state (Hoffman & Gelman 2014 defaults)
struct DualAvg {
  double mu = 0, log_step_bar = 0, hbar = 0, m = 0;
  void reset(double step) {
    mu = std::log(10.0 * step);
    log_step_bar = std::log(step);
    hbar = 0;
    m = 0;
  }
  double update(double accept, double target_accept) {
    const double gamma = 0.05, t0 = 10.0, kappa = 0.75;
    m += 1;
    hbar = (1.0 - 1.0 / (m + t0)) * hbar + (target_accept - accept) / (m + t0);
    double log_step = mu - std::sqrt(m) / gamma * hbar;
    double w = std::pow(m, -kappa);
    log_step_bar = w * log_step + (1.0 - w) * log_step_bar;
    return std::exp(log_step);
  }
};

ChainResult run_chain(const Target& target, const SamplerConfig& cfg, int chain) {
  Hmc h(target, cfg, chain);
  const int dim = target.dim();

  // Stan-style windowed warmup: a fast step-size interval, expanding slow
  // windows that re-estimate the diagonal mass (each followed by a dual-
  // averaging restart), then a final fast interval under the last metric.
  std::vector<int> bounds;
  if (cfg.n_warmup >= 100) {
    for (double f : {0.15, 0.35, 0.65, 0.9})
      bounds.push_back(static_cast<int>(f * cfg.n_warmup));
  } else {
    bounds = {cfg.n_warmup / 2};
  }

  h.step = reasonable_step(h);
  DualAvg da;
  da.reset(h.step);

  std::vector<double> msum(dim, 0.0), msum2(dim, 0.0);
  long mcount = 0;

  for (int it = 0; it < cfg.n_warmup; ++it) {
    bool div = false;
    double a = h.transition(h.draw_steps(), &div);
    h.step = da.update(a, cfg.target_accept);

    bool in_slow = bounds.size() > 1 && it >= bounds.front() && it < bounds.back();
    if (in_slow) {
      for (int i = 0; i < dim; ++i) {
        msum[i] += h.x[i];
        msum2[i] += h.x[i] * h.x[i];
      }
      ++mcount;
    }
    bool window_end = false;
    for (size_t w = 1; w < bounds.size(); ++w) window_end |= it + 1 == bounds[w];
    if (window_end && mcount > 10) {
      for (int i = 0; i < dim; ++i) {
        double mean = msum[i] / mcount;
        double var = msum2[i] / mcount - mean * mean;
        // regularize toward unit, as Stan does for short windows
        double v = (mcount * var + 5.0) / (mcount + 5.0);
        h.inv_mass[i] = std::max(v, 1e-10);
      }
      msum.assign(dim, 0.0);
      msum2.assign(dim, 0.0);
      mcount = 0;
      h.step = reasonable_step(h);
      da.reset(h.step);
    }
  }
  h.step = std::exp(da.log_step_bar);

  ChainResult res;
  res.draws.reserve(static_cast<size_t>(cfg.n_draws) * dim);
  double acc_sum = 0;
  for (int it = 0; it < cfg.n_draws; ++it) {
    bool div = false;
    acc_sum += h.transition(h.draw_steps(), &div);
    if (div) ++res.stats.n_divergences;
    res.draws.insert(res.draws.end(), h.x.begin(), h.x.end());
  }
  res.stats.mean_accept = acc_sum / cfg.n_draws;
  res.stats.step_size = h.step;
  return res;
}

void fd_check_gradient(const Target& target, const SamplerConfig& cfg) {
  auto rng = chain_rng(cfg.seed, -1);
  std::vector<double> x = target.init_point(rng, cfg.init_jitter);
  std::vector<double> grad(target.dim());
  target.logp_grad(x, grad);
  // every coordinate for small targets, a spot-check otherwise
  std::uniform_int_distribution<int> pick(0, target.dim() - 1);
  std::vector<double> dummy(target.dim());
  bool full = target.dim() <= 200;
  int n_checks = full ? target.dim() : 50;
  for (int k = 0; k < n_checks; ++k) {
    int i = full ? k : pick(rng);
    double h = 1e-5;
    std::vector<double> xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    double fd = (target.logp_grad(xp, dummy) - target.logp_grad(xm, dummy)) / (2 * h);
    double denom = std::max({std::abs(fd), std::abs(grad[i]), 1.0});
    if (std::abs(fd - grad[i]) / denom > 1e-3)
      throw SamplerError("gradient check failed at coordinate " + std::to_string(i) +
                         ": analytic " + std::to_string(grad[i]) + " vs fd " + std::to_string(fd));
  }
}

}  // namespace

PosteriorDraws sample(const Target& target, const SamplerConfig& config) {
  if (config.n_chains < 2) throw SamplerError("need at least 2 chains for R-hat");
  if (config.target_accept <= 0 || config.target_accept >= 1)
    throw SamplerError("target_accept must be in (0,1)");
  if (config.check_gradient) fd_check_gradient(target, config);

  std::vector<ChainResult> results(config.n_chains);
  if (config.parallel_chains) {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errs(config.n_chains);
    for (int c = 0; c < config.n_chains; ++c)
      threads.emplace_back([&, c] {
        try {
          results[c] = run_chain(target, config, c);
        } catch (...) {
          errs[c] = std::current_exception();
        }
      });
    for (auto& t : threads) t.join();
    for (auto& e : errs)
      if (e) std::rethrow_exception(e);
  } else {
    for (int c = 0; c < config.n_chains; ++c) results[c] = run_chain(target, config, c);
  }

  PosteriorDraws out;
  out.n_chains = config.n_chains;
  out.n_draws = config.n_draws;
  out.dim = target.dim();
  out.names = target.names();
  for (auto& r : results) {
    out.draws.insert(out.draws.end(), r.draws.begin(), r.draws.end());
    out.chain_stats.push_back(r.stats);
  }
  long total = static_cast<long>(config.n_chains) * config.n_draws;
  out.reliable = out.total_divergences() <= total / 10;

  out.rhat.resize(out.dim);
  out.ess_bulk.resize(out.dim);
  for (int p = 0; p < out.dim; ++p) {
    std::vector<std::vector<double>> chains(out.n_chains);
    for (int c = 0; c < out.n_chains; ++c) {
      chains[c].reserve(out.n_draws);
      for (int d = 0; d < out.n_draws; ++d) chains[c].push_back(out.at(c, d, p));
    }
    out.rhat[p] = split_rhat(chains);
    out.ess_bulk[p] = bulk_ess(chains);
  }
  return out;
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  for (const auto& c : chains) {
    size_t h = c.size() / 2;
    halves.emplace_back(c.begin(), c.begin() + h);
    halves.emplace_back(c.begin() + h, c.begin() + 2 * h);
  }
  size_t m = halves.size(), n = halves[0].size();
  std::vector<double> means;
  double w = 0;
  for (const auto& h : halves) {
    means.push_back(mean_of(h));
    double v = sd_of(h);
    w += v * v;
  }
  w /= m;
  double grand = mean_of(means);
  double b = 0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= static_cast<double>(n) / (m - 1);
  if (w <= 0) return b <= 0 ? 1.0 : std::numeric_limits<double>::infinity();
  double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double bulk_ess(const std::vector<std::vector<double>>& chains) {
  // split chains, pooled autocovariance with Geyer initial positive sequence
  std::vector<std::vector<double>> halves;
  for (const auto& c : chains) {
    size_t h = c.size() / 2;
    halves.emplace_back(c.begin(), c.begin() + h);
    halves.emplace_back(c.begin() + h, c.begin() + 2 * h);
  }
  size_t m = halves.size(), n = halves[0].size();
  if (n < 4) return static_cast<double>(m * n);

  std::vector<double> means;
  double w = 0;
  for (const auto& h : halves) {
    means.push_back(mean_of(h));
    double v = sd_of(h);
    w += v * v;
  }
  w /= m;
  double grand = mean_of(means);
  double b = 0;
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= static_cast<double>(n) / (m - 1);
  double var_plus = (n - 1.0) / n * w + b / n;
  if (var_plus <= 0) return static_cast<double>(m * n);

  // mean autocovariance at each lag across chains
  auto acov = [&](size_t lag) {
    double s = 0;
    for (size_t c = 0; c < m; ++c) {
      const auto& h = halves[c];
      double mu = means[c];
      double a = 0;
      for (size_t t = 0; t + lag < n; ++t) a += (h[t] - mu) * (h[t + lag] - mu);
      s += a / n;
    }
    return s / m;
  };

  double rho_sum = 0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (size_t lag = 1; lag + 1 < n; lag += 2) {
    double pair = (1.0 - (w - acov(lag)) / var_plus) + (1.0 - (w - acov(lag + 1)) / var_plus);
    if (pair < 0) break;
    pair = std::min(pair, prev_pair);  // initial monotone sequence
    prev_pair = pair;
    rho_sum += pair;
  }
  double tau = 1.0 + 2.0 * rho_sum;
  double ess = static_cast<double>(m * n) / std::max(tau, 1e-10);
  return std::min(ess, static_cast<double>(m * n) * std::log10(static_cast<double>(m * n)));
}

DiagReport diagnostics(const PosteriorDraws& draws) {
  if (draws.n_chains < 2) throw SamplerError("diagnostics require at least 2 chains");
  if (draws.n_draws < 100) throw SamplerError("diagnostics require at least 100 draws per chain");
  DiagReport rep;
  rep.max_rhat = 0;
  rep.min_ess = std::numeric_limits<double>::infinity();
  for (int p = 0; p < draws.dim; ++p) {
    rep.rows.push_back({draws.names[p], draws.rhat[p], draws.ess_bulk[p]});
    rep.max_rhat = std::max(rep.max_rhat, draws.rhat[p]);
    rep.min_ess = std::min(rep.min_ess, draws.ess_bulk[p]);
  }
  rep.n_divergences = draws.total_divergences();
  rep.reliable = draws.reliable;
  return rep;
}

void write_traceplot_csv(const PosteriorDraws& draws, const std::vector<std::string>& params,
                         const std::string& path) {
  CsvWriter w(path);
  w.row("chain", "iteration", "parameter", "value");
  for (const auto& name : params) {
    int p = draws.param_index(name);
    for (int c = 0; c < draws.n_chains; ++c)
      for (int d = 0; d < draws.n_draws; ++d) w.row(c, d, name, draws.at(c, d, p));
  }
}

const SummaryRow& SummaryTable::row(const std::string& name) const {
  for (const auto& r : rows)
    if (r.name == name) return r;
  throw SamplerError("summary has no row '" + name + "'");
}

void SummaryTable::write_csv(const std::string& path) const {
  CsvWriter w(path);
  w.row("parameter", "mean", "sd", "q2.5", "q25", "q50", "q75", "q97.5", "prob_neg", "rhat", "ess");
  for (const auto& r : rows)
    w.row(r.name, r.mean, r.sd, r.q025, r.q25, r.q50, r.q75, r.q975, r.prob_neg, r.rhat, r.ess);
}

std::string SummaryTable::to_text() const {
  std::ostringstream os;
  os.precision(4);
  os << "parameter        mean      sd      2.5%     50%    97.5%   Pr(<0)   Rhat    ESS\n";
  for (const auto& r : rows) {
    os.width(14);
    os << std::left << r.name << std::right << "  ";
    os.width(8);
    os << r.mean << "  ";
    os.width(6);
    os << r.sd << "  ";
    os.width(7);
    os << r.q025 << "  ";
    os.width(6);
    os << r.q50 << "  ";
    os.width(7);
    os << r.q975 << "  ";
    os.width(6);
    os << r.prob_neg << "  ";
    os.width(5);
    os << r.rhat << "  ";
    os.width(6);
    os << r.ess << "\n";
  }
  return os.str();
}

SummaryTable summarize(const PosteriorDraws& draws, const std::vector<std::string>& params) {
  SummaryTable t;
  for (const auto& name : params) {
    int p = draws.param_index(name);
    auto v = draws.flat(p);
    SummaryRow r;
    r.name = name;
    r.mean = mean_of(v);
    r.sd = v.size() > 1 ? sd_of(v) : 0.0;
    r.q025 = quantile_type7(v, 0.025);
    r.q25 = quantile_type7(v, 0.25);
    r.q50 = quantile_type7(v, 0.50);
    r.q75 = quantile_type7(v, 0.75);
    r.q975 = quantile_type7(v, 0.975);
    long neg = 0;
    for (double x : v) neg += x < 0;
    r.prob_neg = static_cast<double>(neg) / v.size();
    r.rhat = draws.rhat[p];
    r.ess = draws.ess_bulk[p];
    t.rows.push_back(r);
  }
  return t;
}

void write_draws_csv(const PosteriorDraws& draws, const std::vector<std::string>& params,
                     const std::string& path) {
  CsvWriter w(path);
  std::ostringstream h;
  h << "chain,iteration";
  std::vector<int> idx;
  for (const auto& name : params) {
    idx.push_back(draws.param_index(name));
    h << ',' << name;
  }
  w.row(h.str());
  for (int c = 0; c < draws.n_chains; ++c)
    for (int d = 0; d < draws.n_draws; ++d) {
      std::ostringstream os;
      os.precision(17);
      os << c << ',' << d;
      for (int p : idx) os << ',' << draws.at(c, d, p);
      w.row(os.str());
    }
}

void write_wide_csv(const PosteriorDraws& draws, const std::string& prefix, const std::string& path) {
  std::vector<std::string> params;
  for (const auto& n : draws.names)
    if (n.rfind(prefix, 0) == 0) params.push_back(n);
  if (params.empty()) throw SamplerError("no parameters match prefix '" + prefix + "'");
  write_draws_csv(draws, params, path);
}

PosteriorDraws read_draws_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  if (t.header.size() < 3 || t.header[0] != "chain" || t.header[1] != "iteration")
    throw SamplerError("not a draws CSV: " + path);
  PosteriorDraws out;
  out.names.assign(t.header.begin() + 2, t.header.end());
  out.dim = static_cast<int>(out.names.size());
  int max_chain = 0, max_iter = 0;
  for (const auto& row : t.rows) {
    max_chain = std::max(max_chain, static_cast<int>(std::stol(row[0])));
    max_iter = std::max(max_iter, static_cast<int>(std::stol(row[1])));
  }
  out.n_chains = max_chain + 1;
  out.n_draws = max_iter + 1;
  out.draws.assign(static_cast<size_t>(out.n_chains) * out.n_draws * out.dim, 0.0);
  for (const auto& row : t.rows) {
    int c = static_cast<int>(std::stol(row[0]));
    int d = static_cast<int>(std::stol(row[1]));
    for (int p = 0; p < out.dim; ++p)
      out.draws[(static_cast<size_t>(c) * out.n_draws + d) * out.dim + p] =
          parse_real(row[p + 2], path);
  }
  out.rhat.assign(out.dim, 0.0);
  out.ess_bulk.assign(out.dim, 0.0);
  for (int p = 0; p < out.dim; ++p) {
    std::vector<std::vector<double>> chains(out.n_chains);
    for (int c = 0; c < out.n_chains; ++c)
      for (int d = 0; d < out.n_draws; ++d) chains[c].push_back(out.at(c, d, p));
    if (out.n_chains >= 2 && out.n_draws >= 4) {
      out.rhat[p] = split_rhat(chains);
      out.ess_bulk[p] = bulk_ess(chains);
    }
  }
  return out;
}

PosteriorDraws merge_draws(const PosteriorDraws& a, const PosteriorDraws& b) {
  if (a.n_chains != b.n_chains || a.n_draws != b.n_draws)
    throw SamplerError("merge_draws: chain/draw shapes differ");
  PosteriorDraws out;
  out.n_chains = a.n_chains;
  out.n_draws = a.n_draws;
  out.dim = a.dim + b.dim;
  out.names = a.names;
  out.names.insert(out.names.end(), b.names.begin(), b.names.end());
  out.draws.reserve(static_cast<size_t>(out.n_chains) * out.n_draws * out.dim);
  for (int c = 0; c < out.n_chains; ++c)
    for (int d = 0; d < out.n_draws; ++d) {
      for (int p = 0; p < a.dim; ++p) out.draws.push_back(a.at(c, d, p));
      for (int p = 0; p < b.dim; ++p) out.draws.push_back(b.at(c, d, p));
    }
  out.rhat = a.rhat;
  out.rhat.insert(out.rhat.end(), b.rhat.begin(), b.rhat.end());
  out.ess_bulk = a.ess_bulk;
  out.ess_bulk.insert(out.ess_bulk.end(), b.ess_bulk.begin(), b.ess_bulk.end());
  out.chain_stats = a.chain_stats;
  return out;
}

}  // namespace lps
