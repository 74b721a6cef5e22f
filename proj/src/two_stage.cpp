#include "lps/two_stage.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "lps/csv.hpp"

namespace lps {

std::vector<std::vector<double>> draw_eta_vectors(const PosteriorDraws& posterior, int n) {
  std::vector<int> eta_idx;
  for (size_t i = 0; i < posterior.names.size(); ++i)
    if (posterior.names[i].rfind("eta[", 0) == 0) eta_idx.push_back(static_cast<int>(i));
  if (eta_idx.empty())
    throw std::runtime_error("draw_eta_vectors: posterior has no eta segment (fit without eta persistence?)");
  long total = static_cast<long>(posterior.n_chains) * posterior.n_draws;
  if (n > total) throw std::runtime_error("draw_eta_vectors: requested more draws than available");
  std::vector<std::vector<double>> out;
  for (int k = 0; k < n; ++k) {
    long g = total * k / n;
    int chain = static_cast<int>(g / posterior.n_draws);
    int draw = static_cast<int>(g % posterior.n_draws);
    std::vector<double> v;
    v.reserve(eta_idx.size());
    for (int p : eta_idx) v.push_back(posterior.at(chain, draw, p));
    out.push_back(std::move(v));
  }
  return out;
}

namespace {

struct SchoolBlockDesign {
  std::vector<int> rows;                   // student indices in this school
  std::vector<std::vector<int>> teachers;  // local row groups per teacher
};

// REML criterion and GLS solution at fixed variance ratios (lt, ls).
struct RemlEval {
  double criterion = 0.0;
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov_unit;  // (F' V^-1 F)^-1, multiply by sigma2 for the covariance
  double sigma2 = 0.0;
};

RemlEval reml_at(const Eigen::MatrixXd& F, const Eigen::VectorXd& y,
                 const std::vector<SchoolBlockDesign>& schools, double lt, double ls) {
  const int n = static_cast<int>(y.size());
  const int q = static_cast<int>(F.cols());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(q, q);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(q);
  double logdetV = 0.0;

  // V is block diagonal by school: I + lt * sum_j J_j + ls * J
  std::vector<Eigen::MatrixXd> Vinv_blocks;
  Vinv_blocks.reserve(schools.size());
  for (const auto& sb : schools) {
    int m = static_cast<int>(sb.rows.size());
    Eigen::MatrixXd V = Eigen::MatrixXd::Identity(m, m);
    V.array() += ls;
    for (const auto& tg : sb.teachers)
      for (int a : tg)
        for (int b : tg) V(a, b) += lt;
    Eigen::LLT<Eigen::MatrixXd> llt(V);
    if (llt.info() != Eigen::Success) throw std::runtime_error("stage-2 REML: covariance not PD");
    for (int i = 0; i < m; ++i) logdetV += 2.0 * std::log(llt.matrixL()(i, i));

    Eigen::MatrixXd Fb(m, q);
    Eigen::VectorXd yb(m);
    for (int i = 0; i < m; ++i) {
      Fb.row(i) = F.row(sb.rows[i]);
      yb(i) = y(sb.rows[i]);
    }
    Eigen::MatrixXd VinvF = llt.solve(Fb);
    A += Fb.transpose() * VinvF;
    c += VinvF.transpose() * yb;
    Vinv_blocks.push_back(llt.solve(Eigen::MatrixXd::Identity(m, m)));
  }

  Eigen::LDLT<Eigen::MatrixXd> Aldlt(A);
  RemlEval out;
  out.beta = Aldlt.solve(c);
  out.cov_unit = Aldlt.solve(Eigen::MatrixXd::Identity(q, q));

  double quad = 0.0;
  size_t bi = 0;
  for (const auto& sb : schools) {
    int m = static_cast<int>(sb.rows.size());
    Eigen::VectorXd rb(m);
    for (int i = 0; i < m; ++i) rb(i) = y(sb.rows[i]) - F.row(sb.rows[i]).dot(out.beta);
    quad += rb.dot(Vinv_blocks[bi++] * rb);
  }
  out.sigma2 = quad / (n - q);
  double logdetA = 0.0;
  Eigen::VectorXd dvec = Aldlt.vectorD();
  for (int i = 0; i < q; ++i) logdetA += std::log(std::abs(dvec(i)));
  out.criterion = (n - q) * std::log(out.sigma2) + logdetV + logdetA;
  return out;
}

// golden-section minimization of f over [lo, hi]
template <typename F>
double golden_min(F f, double lo, double hi, int iters = 25) {
  const double phi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    }
  }
  return f1 < f2 ? x1 : x2;
}

}  // namespace

MixedModelFit fit_stage2(const TrialDataset& dataset, const std::vector<double>& eta,
                         const Stage2Options& options) {
  const auto& students = dataset.students;
  const int n = static_cast<int>(students.size());
  if (eta.size() != students.size())
    throw std::runtime_error("fit_stage2: eta required for all students");
  const int p = static_cast<int>(dataset.covariate_names.size());

  std::map<std::string, int> blocks, schools;
  std::map<std::string, std::pair<int, int>> teachers;  // teacher -> (school idx, teacher idx)
  for (const auto& s : students) {
    int si = static_cast<int>(schools.size());
    auto sc = schools.emplace(s.school_id, si);
    int sidx = sc.first->second;
    int ti = static_cast<int>(teachers.size());
    teachers.emplace(s.teacher_id, std::make_pair(sidx, ti));
    blocks.emplace(s.block_id, static_cast<int>(blocks.size()));
  }
  const int n_blocks = static_cast<int>(blocks.size());

  // design: blocks (or intercept) | covariates | z | eta | z:eta
  const int q0 = options.include_blocks ? n_blocks : 1;
  const int q = q0 + p + 3;
  if (q >= n) throw std::runtime_error("fit_stage2: more coefficients than observations");
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(n, q);
  Eigen::VectorXd y(n);
  MixedModelFit fit;
  if (options.include_blocks) {
    std::vector<std::string> bn(n_blocks);
    for (const auto& [id, i] : blocks) bn[i] = "block:" + id;
    fit.coef_names = bn;
  } else {
    fit.coef_names = {"intercept"};
  }
  for (const auto& c : dataset.covariate_names) fit.coef_names.push_back(c);
  fit.coef_names.push_back("z");
  fit.coef_names.push_back("eta");
  fit.coef_names.push_back("z:eta");

  std::vector<SchoolBlockDesign> school_design(schools.size());
  std::map<int, std::map<int, std::vector<int>>> teacher_rows;  // school -> teacher -> local rows
  for (int i = 0; i < n; ++i) {
    const auto& s = students[i];
    if (options.include_blocks)
      F(i, blocks.at(s.block_id)) = 1.0;
    else
      F(i, 0) = 1.0;
    for (int j = 0; j < p; ++j) F(i, q0 + j) = s.covariates[j];
    F(i, q0 + p) = s.z;
    F(i, q0 + p + 1) = eta[i];
    F(i, q0 + p + 2) = s.z * eta[i];
    y(i) = s.y;
    auto [sidx, tidx] = teachers.at(s.teacher_id);
    auto& sd = school_design[sidx];
    teacher_rows[sidx][tidx].push_back(static_cast<int>(sd.rows.size()));
    sd.rows.push_back(i);
  }
  for (auto& [sidx, tmap] : teacher_rows)
    for (auto& [tidx, rows] : tmap) school_design[sidx].teachers.push_back(rows);

  auto crit = [&](double lt, double ls) { return reml_at(F, y, school_design, lt, ls).criterion; };

  // nested grid over the two ratios (0 plus log-spaced), then golden-section refinement
  std::vector<double> grid = {0.0};
  for (double lg = -4.0; lg <= 1.0 + 1e-9; lg += 0.5) grid.push_back(std::pow(10.0, lg));
  double best_lt = 0, best_ls = 0, best = std::numeric_limits<double>::infinity();
  for (double lt : grid)
    for (double ls : grid) {
      double c = crit(lt, ls);
      if (c < best) {
        best = c;
        best_lt = lt;
        best_ls = ls;
      }
    }
  const double upper = grid.back();
  fit.converged = best_lt < upper && best_ls < upper;

  for (int pass = 0; pass < 2; ++pass) {
    if (best_lt > 0) {
      double lo = std::log(best_lt) - std::log(10.0), hi = std::min(std::log(best_lt) + std::log(10.0), std::log(upper));
      best_lt = std::exp(golden_min([&](double l) { return crit(std::exp(l), best_ls); }, lo, hi));
    }
    if (best_ls > 0) {
      double lo = std::log(best_ls) - std::log(10.0), hi = std::min(std::log(best_ls) + std::log(10.0), std::log(upper));
      best_ls = std::exp(golden_min([&](double l) { return crit(best_lt, std::exp(l)); }, lo, hi));
    }
  }

  RemlEval sol = reml_at(F, y, school_design, best_lt, best_ls);
  fit.sigma2 = sol.sigma2;
  fit.var_teacher = best_lt * sol.sigma2;
  fit.var_school = best_ls * sol.sigma2;
  for (int j = 0; j < q; ++j) {
    fit.estimates.push_back(sol.beta(j));
    fit.variances.push_back(sol.sigma2 * sol.cov_unit(j, j));
  }
  fit.interaction_est = fit.estimates[q - 1];
  fit.interaction_var = fit.variances[q - 1];
  return fit;
}

PooledEstimate pool(const std::vector<MixedModelFit>& fits) {
  std::vector<const MixedModelFit*> conv;
  for (const auto& f : fits)
    if (f.converged) conv.push_back(&f);
  if (conv.size() < 2) throw std::runtime_error("pool: need at least 2 converged fits");
  PooledEstimate est;
  est.n_fits = static_cast<long>(conv.size());
  for (const auto* f : conv) {
    est.mean += f->interaction_est;
    est.within_var += f->interaction_var;
  }
  est.mean /= est.n_fits;
  est.within_var /= est.n_fits;
  for (const auto* f : conv)
    est.between_var += (f->interaction_est - est.mean) * (f->interaction_est - est.mean);
  est.between_var /= (est.n_fits - 1);
  est.total_var = est.between_var + est.within_var;
  est.scaled_sd = std::sqrt(est.total_var);
  return est;
}

void write_fits_csv(const std::vector<MixedModelFit>& fits, const std::string& path) {
  CsvWriter w(path);
  w.row("fit", "interaction_est", "interaction_var", "var_teacher", "var_school", "sigma2",
        "converged");
  for (size_t i = 0; i < fits.size(); ++i)
    w.row(i, fits[i].interaction_est, fits[i].interaction_var, fits[i].var_teacher,
          fits[i].var_school, fits[i].sigma2, fits[i].converged ? 1 : 0);
}

std::string pooled_text(const PooledEstimate& est) {
  std::ostringstream os;
  os.precision(6);
  os << "pooled interaction estimate over " << est.n_fits << " stage-2 fits\n"
     << "mean = " << est.mean << "\nbetween-draw variance = " << est.between_var
     << "\naverage within-fit variance = " << est.within_var
     << "\ntotal variance = " << est.total_var << "\ncomparison sd = " << est.scaled_sd << "\n";
  return os.str();
}

}  // namespace lps
