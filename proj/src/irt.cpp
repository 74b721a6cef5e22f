#include "lps/irt.hpp"

#include <cmath>
#include <stdexcept>

namespace lps {

IrtFamily family_from_string(const std::string& s) {
  if (s == "rasch") return IrtFamily::rasch;
  if (s == "2pl") return IrtFamily::twopl;
  if (s == "3pl") return IrtFamily::threepl;
  throw std::runtime_error("unknown measurement family: '" + s + "'");
}

std::string family_name(IrtFamily f) {
  switch (f) {
    case IrtFamily::rasch: return "rasch";
    case IrtFamily::twopl: return "2pl";
    default: return "3pl";
  }
}

void MeasurementParams::validate() const {
  for (const auto& s : sections) {
    if (s.disc <= 0) throw std::runtime_error("discrimination must be > 0");
    if (s.guess < 0 || s.guess >= 1) throw std::runtime_error("guess must be in [0,1)");
    if (family == IrtFamily::rasch && s.disc != 1.0)
      throw std::runtime_error("rasch requires disc = 1");
    if (family != IrtFamily::threepl && s.guess != 0.0)
      throw std::runtime_error("guess must be 0 unless family is 3pl");
  }
}

double log1p_exp(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

double inv_logit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double mastery_prob(double eta, const SectionParams& sec, IrtFamily family) {
  double x = sec.disc * (eta - sec.delta);
  double l = inv_logit(x);
  if (family == IrtFamily::threepl) return sec.guess + (1.0 - sec.guess) * l;
  return l;
}

double mastery_loglik(const std::vector<IndexedRecord>& records, const std::vector<double>& eta,
                      const MeasurementParams& params) {
  double ll = 0.0;
  for (const auto& r : records) {
    const auto& sec = params.sections.at(r.section);
    double x = sec.disc * (eta.at(r.student) - sec.delta);
    // log L = -log1p(exp(-x)), log(1-L) = -log1p(exp(x))
    if (sec.guess == 0.0) {
      ll += r.mastered ? -log1p_exp(-x) : -log1p_exp(x);
    } else {
      double l = inv_logit(x);
      double p = sec.guess + (1.0 - sec.guess) * l;
      ll += r.mastered ? std::log(p) : std::log1p(-sec.guess) - log1p_exp(x);
    }
  }
  return ll;
}

namespace {
constexpr double kLogSqrt2Pi = 0.9189385332046727;  // log(sqrt(2*pi))

double normal_logpdf(double x, double mu, double sd) {
  double z = (x - mu) / sd;
  return -kLogSqrt2Pi - std::log(sd) - 0.5 * z * z;
}
}  // namespace

double latent_regression_logdensity(const std::vector<double>& eta,
                                    const std::vector<std::vector<double>>& covariates,
                                    const std::vector<int>& teacher_of,
                                    const std::vector<int>& school_of,
                                    const LatentRegressionParams& params) {
  if (params.sigma_M <= 0 || params.sd_teacher_M <= 0 || params.sd_school_M <= 0)
    throw std::runtime_error("latent regression: non-positive scale parameter");
  if (eta.size() != covariates.size())
    throw std::runtime_error("latent regression: eta/covariate size mismatch");

  double ll = 0.0;
  for (size_t i = 0; i < eta.size(); ++i) {
    const auto& x = covariates[i];
    if (x.size() != params.beta_M.size())
      throw std::runtime_error("latent regression: covariate dimension mismatch");
    double mu = 0.0;
    for (size_t j = 0; j < x.size(); ++j) mu += x[j] * params.beta_M[j];
    mu += params.teacher_fx.at(teacher_of[i]);
    mu += params.school_fx.at(school_of[i]);
    ll += normal_logpdf(eta[i], mu, params.sigma_M);
  }
  for (double e : params.teacher_fx) ll += normal_logpdf(e, 0.0, params.sd_teacher_M);
  for (double e : params.school_fx) ll += normal_logpdf(e, 0.0, params.sd_school_M);
  return ll;
}

}  // namespace lps
