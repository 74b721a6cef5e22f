#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "lps/checks.hpp"
#include "lps/csv.hpp"
#include "lps/manifest.hpp"
#include "lps/q3.hpp"
#include "lps/stats.hpp"
#include "lps/two_stage.hpp"

namespace fs = std::filesystem;
using namespace lps;

namespace {

// exit codes: 0 success, 2 validation error, 3 convergence failure, 4 internal error
constexpr int kExitValidation = 2;
constexpr int kExitConvergence = 3;
constexpr int kExitInternal = 4;

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  long seed = -1;  // -1: take from config
};

Config load_config(const std::string& path) {
  if (path.empty()) return Config::parse_string("");
  return Config::parse_file(path);
}

SamplerConfig sampler_from_config(const Config& cfg) {
  SamplerConfig sc;
  sc.n_chains = static_cast<int>(cfg.get_int("sampler.chains", sc.n_chains));
  sc.n_warmup = static_cast<int>(cfg.get_int("sampler.warmup", sc.n_warmup));
  sc.n_draws = static_cast<int>(cfg.get_int("sampler.draws", sc.n_draws));
  sc.target_accept = cfg.get_real("sampler.target_accept", sc.target_accept);
  sc.max_leapfrog = static_cast<int>(cfg.get_int("sampler.max_leapfrog", sc.max_leapfrog));
  sc.seed = static_cast<std::uint64_t>(cfg.get_int("sampler.seed", 1));
  sc.init_jitter = cfg.get_real("sampler.init_jitter", sc.init_jitter);
  sc.parallel_chains = cfg.get_bool("sampler.parallel_chains", false);
  return sc;
}

IngestOptions ingest_from_config(const Config& cfg) {
  IngestOptions io;
  io.min_students = cfg.get_int("data.min_students", io.min_students);
  io.drop_always_mastered = cfg.get_bool("data.drop_always_mastered", true);
  return io;
}

RunManifest start_manifest(const std::string& command, const CommonOpts& common,
                           std::uint64_t seed) {
  RunManifest m;
  m.command = command;
  if (!common.config_path.empty()) m.config_paths.push_back(common.config_path);
  m.seed = seed;
  m.code_version = code_version();
  return m;
}

void finish_manifest(RunManifest& m, const std::chrono::steady_clock::time_point& t0,
                     const std::string& out_dir) {
  m.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  m.write(out_dir + "/manifest.json");
}

// scalar and low-dimensional segments worth persisting by default
std::vector<std::string> default_save_params(const PsModel& model) {
  std::vector<std::string> out;
  for (const auto& seg : model.index_map().segments()) {
    if (seg.name == "eta" || seg.name == "mbar_miss" || seg.name.rfind("u_", 0) == 0) continue;
    for (int k = 0; k < seg.size; ++k)
      out.push_back(seg.size == 1 ? seg.name : seg.name + "[" + std::to_string(k) + "]");
  }
  return out;
}

TrialDataset load_for_model(const std::string& students, const std::string& mastery,
                            const Config& cfg, const ModelSpec& spec, RunManifest& manifest,
                            DataReport* report = nullptr) {
  if (!fs::exists(students)) throw DataError("missing students file: " + students);
  if (!fs::exists(mastery)) {
    if (spec.variant == ModelVariant::latent && spec.include_outcome)
      throw DataError("missing mastery file: " + mastery + " (required by the latent model)");
    throw DataError("missing mastery file: " + mastery);
  }
  manifest.add_input(students);
  manifest.add_input(mastery);
  TrialDataset data = load_dataset(students, mastery, ingest_from_config(cfg), report);
  if (spec.standardize) data = standardize(data, nullptr, spec.append_pretest_square);
  return data;
}

int cmd_simulate(const CommonOpts& common) {
  auto t0 = std::chrono::steady_clock::now();
  Config cfg = load_config(common.config_path);
  GenConfig gen = GenConfig::from_config(cfg);
  if (common.seed >= 0) gen.seed = static_cast<std::uint64_t>(common.seed);
  RunManifest manifest = start_manifest("simulate", common, gen.seed);

  fs::create_directories(common.out_dir);
  auto [data, truth] = generate(gen);
  std::string students = common.out_dir + "/students.csv";
  std::string mastery = common.out_dir + "/mastery.csv";
  std::string truthp = common.out_dir + "/truth.csv";
  write_students_csv(data, students);
  write_mastery_csv(data, mastery);
  write_truth_csv(truth, truthp);
  std::ofstream echo(common.out_dir + "/gen_config.toml");
  echo << truth.config.echo();

  DataReport rep = make_report(data);
  std::ofstream rpt(common.out_dir + "/report.txt");
  rpt << rep.to_text();
  std::ofstream kv(common.out_dir + "/report.kv");
  kv << rep.to_keyvalue();

  manifest.output_paths = {students, mastery, truthp, common.out_dir + "/gen_config.toml",
                           common.out_dir + "/report.txt", common.out_dir + "/report.kv"};
  finish_manifest(manifest, t0, common.out_dir);
  std::cout << rep.to_text();
  return 0;
}

struct FitOpts {
  std::string students, mastery;
  std::string model_override, family_override;
  int chains = -1, warmup = -1, draws = -1;
  bool allow_nonconverged = false;
  bool save_eta = false;
};

int cmd_fit(const CommonOpts& common, const FitOpts& opt) {
  auto t0 = std::chrono::steady_clock::now();
  Config cfg = load_config(common.config_path);
  ModelSpec spec = ModelSpec::from_config(cfg);
  if (!opt.model_override.empty())
    spec.variant = opt.model_override == "mbar" ? ModelVariant::mbar : ModelVariant::latent;
  if (!opt.family_override.empty()) spec.family = family_from_string(opt.family_override);
  SamplerConfig sc = sampler_from_config(cfg);
  if (opt.chains > 0) sc.n_chains = opt.chains;
  if (opt.warmup > 0) sc.n_warmup = opt.warmup;
  if (opt.draws > 0) sc.n_draws = opt.draws;
  if (common.seed >= 0) sc.seed = static_cast<std::uint64_t>(common.seed);
  RunManifest manifest = start_manifest("fit", common, sc.seed);

  fs::create_directories(common.out_dir);
  TrialDataset data = load_for_model(opt.students, opt.mastery, cfg, spec, manifest);
  PsModel model(data, spec);
  PosteriorDraws draws = sample(model, sc);

  auto params = default_save_params(model);
  std::string draws_path = common.out_dir + "/draws.csv";
  write_draws_csv(draws, params, draws_path);
  manifest.output_paths.push_back(draws_path);
  if (opt.save_eta || spec.variant == ModelVariant::latent) {
    std::string eta_path = common.out_dir + "/eta_draws.csv";
    write_wide_csv(draws, spec.variant == ModelVariant::latent ? "eta[" : "mbar_miss[", eta_path);
    manifest.output_paths.push_back(eta_path);
  }

  SummaryTable summary = summarize(draws, params);
  if (model.index_map().has("b1")) {
    auto slopes = slope_draws(model, draws);
    SummaryRow r;
    r.name = "std_slope_per_iqr";
    r.mean = mean_of(slopes);
    r.sd = sd_of(slopes);
    r.q025 = quantile_type7(slopes, 0.025);
    r.q25 = quantile_type7(slopes, 0.25);
    r.q50 = quantile_type7(slopes, 0.5);
    r.q75 = quantile_type7(slopes, 0.75);
    r.q975 = quantile_type7(slopes, 0.975);
    long neg = 0;
    for (double s : slopes) neg += s < 0;
    r.prob_neg = static_cast<double>(neg) / slopes.size();
    summary.rows.push_back(r);
  }
  summary.write_csv(common.out_dir + "/summary.csv");
  std::ofstream(common.out_dir + "/summary.txt") << summary.to_text();

  DiagReport diag = diagnostics(draws);
  {
    CsvWriter w(common.out_dir + "/diagnostics.csv");
    w.row("parameter", "rhat", "ess");
    for (const auto& r : diag.rows) w.row(r.name, r.rhat, r.ess);
  }
  write_traceplot_csv(draws, {"b0", "b1", "a"}, common.out_dir + "/trace.csv");
  manifest.output_paths.insert(manifest.output_paths.end(),
                               {common.out_dir + "/summary.csv", common.out_dir + "/summary.txt",
                                common.out_dir + "/diagnostics.csv", common.out_dir + "/trace.csv"});
  finish_manifest(manifest, t0, common.out_dir);

  std::cout << summary.to_text() << "\nmax R-hat " << diag.max_rhat << ", min ESS " << diag.min_ess
            << ", divergences " << diag.n_divergences << "\n";
  if (!diag.reliable) {
    std::cerr << "fit flagged unreliable: divergence rate > 10%\n";
    if (!opt.allow_nonconverged) return kExitConvergence;
  }
  if (diag.max_rhat > 1.05) {
    std::cerr << "convergence failure: max R-hat " << diag.max_rhat << " > 1.05\n";
    if (!opt.allow_nonconverged) return kExitConvergence;
  }
  return 0;
}

int cmd_diagnose(const CommonOpts& common, const std::string& draws_path,
                 bool allow_nonconverged) {
  auto t0 = std::chrono::steady_clock::now();
  RunManifest manifest = start_manifest("diagnose", common, 0);
  manifest.add_input(draws_path);
  PosteriorDraws draws = read_draws_csv(draws_path);
  DiagReport diag = diagnostics(draws);
  fs::create_directories(common.out_dir);
  {
    CsvWriter w(common.out_dir + "/diagnostics.csv");
    w.row("parameter", "rhat", "ess");
    for (const auto& r : diag.rows) w.row(r.name, r.rhat, r.ess);
  }
  manifest.output_paths.push_back(common.out_dir + "/diagnostics.csv");
  finish_manifest(manifest, t0, common.out_dir);
  std::cout << "max R-hat " << diag.max_rhat << ", min ESS " << diag.min_ess << "\n";
  if (diag.max_rhat > 1.05 && !allow_nonconverged) return kExitConvergence;
  return 0;
}

int cmd_placebo(const CommonOpts& common, const std::string& students, const std::string& mastery) {
  auto t0 = std::chrono::steady_clock::now();
  Config cfg = load_config(common.config_path);
  SamplerConfig sc = sampler_from_config(cfg);
  if (common.seed >= 0) sc.seed = static_cast<std::uint64_t>(common.seed);
  RunManifest manifest = start_manifest("placebo", common, sc.seed);

  ModelSpec eta_spec;
  eta_spec.include_outcome = false;
  TrialDataset data = load_for_model(students, mastery, cfg, eta_spec, manifest);

  // restrict to the treated arm with usage data
  TrialDataset treated = data;
  treated.students.clear();
  for (const auto& s : data.students)
    if (s.z == 1) treated.students.push_back(s);
  if (treated.students.empty()) throw DataError("placebo: no treated students in dataset");

  PsModel eta_model(treated, eta_spec);
  PosteriorDraws eta_post = sample(eta_model, sc);

  std::vector<PlaceboSpec> specs = {
      PlaceboSpec::make(PlaceboKind::zero),
      PlaceboSpec::make(PlaceboKind::random, {cfg.get_real("placebo.b0", 0.2), 0, 0},
                        cfg.get_real("placebo.noise_sd", 0.2), sc.seed + 11),
      PlaceboSpec::make(PlaceboKind::linear,
                        {cfg.get_real("placebo.b0", 0.2), cfg.get_real("placebo.b1", -0.15), 0},
                        0.0, sc.seed + 12),
      PlaceboSpec::make(PlaceboKind::quadratic,
                        {cfg.get_real("placebo.b0", 0.2), 0, cfg.get_real("placebo.b2", 0.1)}, 0.0,
                        sc.seed + 13)};
  auto results = run_placebo_grid(treated, eta_model, eta_post, specs, sc);

  fs::create_directories(common.out_dir);
  write_placebo_csv(results, common.out_dir + "/placebo.csv");
  std::ofstream(common.out_dir + "/report.md") << rollup_report(results, {});
  manifest.output_paths = {common.out_dir + "/placebo.csv", common.out_dir + "/report.md"};
  finish_manifest(manifest, t0, common.out_dir);
  std::cout << rollup_report(results, {});
  for (const auto& r : results)
    if (!r.error.empty() || !r.pass) return r.error.empty() ? kExitConvergence : kExitInternal;
  return 0;
}

int cmd_recovery(const CommonOpts& common, int n_reps) {
  auto t0 = std::chrono::steady_clock::now();
  Config cfg = load_config(common.config_path);
  GenConfig gen = GenConfig::from_config(cfg);
  SamplerConfig sc = sampler_from_config(cfg);
  if (common.seed >= 0) {
    gen.seed = static_cast<std::uint64_t>(common.seed);
    sc.seed = static_cast<std::uint64_t>(common.seed);
  }
  RunManifest manifest = start_manifest("recovery", common, gen.seed);
  auto results = run_recovery(gen, n_reps, sc);
  fs::create_directories(common.out_dir);
  write_recovery_csv(results, common.out_dir + "/recovery.csv");
  std::ofstream(common.out_dir + "/report.md") << rollup_report({}, results);
  manifest.output_paths = {common.out_dir + "/recovery.csv", common.out_dir + "/report.md"};
  finish_manifest(manifest, t0, common.out_dir);
  std::cout << rollup_report({}, results);
  return 0;
}

int cmd_two_stage(const CommonOpts& common, const std::string& students, const std::string& mastery,
                  const std::string& eta_draws_path, int n_draws) {
  auto t0 = std::chrono::steady_clock::now();
  Config cfg = load_config(common.config_path);
  RunManifest manifest = start_manifest("two-stage", common, 0);
  ModelSpec spec = ModelSpec::from_config(cfg);
  TrialDataset data = load_for_model(students, mastery, cfg, spec, manifest);
  manifest.add_input(eta_draws_path);
  PosteriorDraws eta_post = read_draws_csv(eta_draws_path);

  auto vectors = draw_eta_vectors(eta_post, n_draws);
  Stage2Options opts;
  opts.include_blocks = cfg.get_bool("two_stage.include_blocks", true);
  std::vector<MixedModelFit> fits;
  for (const auto& v : vectors) fits.push_back(fit_stage2(data, v, opts));
  PooledEstimate pooled = pool(fits);

  fs::create_directories(common.out_dir);
  write_fits_csv(fits, common.out_dir + "/stage2_fits.csv");
  std::ofstream(common.out_dir + "/pooled.txt") << pooled_text(pooled);
  manifest.output_paths = {common.out_dir + "/stage2_fits.csv", common.out_dir + "/pooled.txt"};
  finish_manifest(manifest, t0, common.out_dir);
  std::cout << pooled_text(pooled);
  return 0;
}

int cmd_ppc(const CommonOpts& common, const std::string& students, const std::string& mastery,
            const std::string& draws_path, const std::string& eta_draws_path, int n_rep) {
  auto t0 = std::chrono::steady_clock::now();
  Config cfg = load_config(common.config_path);
  ModelSpec spec = ModelSpec::from_config(cfg);
  RunManifest manifest = start_manifest("ppc", common, 0);
  TrialDataset data = load_for_model(students, mastery, cfg, spec, manifest);
  manifest.add_input(draws_path);
  manifest.add_input(eta_draws_path);
  PosteriorDraws post = merge_draws(read_draws_csv(draws_path), read_draws_csv(eta_draws_path));

  PsModel model(data, spec);
  Q3Report rep = q3_check(model, post, n_rep);
  fs::create_directories(common.out_dir);
  write_q3_csv(rep, model.data(), common.out_dir + "/q3.csv");
  manifest.output_paths = {common.out_dir + "/q3.csv"};
  finish_manifest(manifest, t0, common.out_dir);
  std::cout << "Q3 pairs: " << rep.pairs.size() << " (skipped " << rep.skipped.size()
            << "), median posterior predictive p-value: " << rep.median_p_value << "\n";
  return 0;
}

int cmd_figures(const CommonOpts& common, const std::string& students, const std::string& mastery,
                const std::string& draws_path, const std::string& eta_draws_path, int n_lines) {
  auto t0 = std::chrono::steady_clock::now();
  Config cfg = load_config(common.config_path);
  ModelSpec spec = ModelSpec::from_config(cfg);
  RunManifest manifest = start_manifest("figures", common, 0);
  TrialDataset data = load_for_model(students, mastery, cfg, spec, manifest);
  manifest.add_input(draws_path);
  manifest.add_input(eta_draws_path);
  PosteriorDraws post = merge_draws(read_draws_csv(draws_path), read_draws_csv(eta_draws_path));

  const int n = static_cast<int>(data.students.size());
  std::vector<int> eta_idx(n);
  for (int i = 0; i < n; ++i) eta_idx[i] = post.param_index("eta[" + std::to_string(i) + "]");
  int i_b0 = post.param_index("b0"), i_b1 = post.param_index("b1");

  // posterior-mean eta range for the tau(eta) lines
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int i = 0; i < n; ++i) {
    double m = mean_of(post.flat(eta_idx[i]));
    lo = std::min(lo, m);
    hi = std::max(hi, m);
  }

  fs::create_directories(common.out_dir);
  long total = static_cast<long>(post.n_chains) * post.n_draws;
  int lines = static_cast<int>(std::min<long>(n_lines, total));
  {
    CsvWriter w(common.out_dir + "/tau_lines.csv");
    w.row("draw", "eta", "tau");
    for (int k = 0; k < lines; ++k) {
      long g = total * k / lines;
      int c = static_cast<int>(g / post.n_draws), d = static_cast<int>(g % post.n_draws);
      double b0 = post.at(c, d, i_b0), b1 = post.at(c, d, i_b1);
      for (int t = 0; t <= 20; ++t) {
        double e = lo + (hi - lo) * t / 20.0;
        w.row(k, e, PsModel::principal_effect(b0, b1, e));
      }
    }
  }
  {
    // scatter + arm-wise OLS lines from the last retained draw
    int c = post.n_chains - 1, d = post.n_draws - 1;
    CsvWriter w(common.out_dir + "/eta_scatter.csv");
    w.row("student_id", "eta_draw", "y", "z");
    std::vector<double> e0, y0, e1, y1;
    for (int i = 0; i < n; ++i) {
      double e = post.at(c, d, eta_idx[i]);
      const auto& s = data.students[i];
      w.row(s.student_id, e, s.y, s.z);
      (s.z ? e1 : e0).push_back(e);
      (s.z ? y1 : y0).push_back(s.y);
    }
    CsvWriter wl(common.out_dir + "/reg_lines.csv");
    wl.row("arm", "intercept", "slope");
    auto ols = [&](const std::vector<double>& x, const std::vector<double>& y, int arm) {
      double mx = mean_of(x), my = mean_of(y), sxy = 0, sxx = 0;
      for (size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
      }
      double slope = sxx > 0 ? sxy / sxx : 0.0;
      wl.row(arm, my - slope * mx, slope);
    };
    if (!e0.empty()) ols(e0, y0, 0);
    if (!e1.empty()) ols(e1, y1, 1);
  }
  manifest.output_paths = {common.out_dir + "/tau_lines.csv", common.out_dir + "/eta_scatter.csv",
                           common.out_dir + "/reg_lines.csv"};
  finish_manifest(manifest, t0, common.out_dir);
  return 0;
}

int cmd_summarize(const CommonOpts& common, const std::string& draws_path) {
  auto t0 = std::chrono::steady_clock::now();
  RunManifest manifest = start_manifest("summarize", common, 0);
  manifest.add_input(draws_path);
  PosteriorDraws draws = read_draws_csv(draws_path);
  SummaryTable t = summarize(draws, draws.names);
  fs::create_directories(common.out_dir);
  t.write_csv(common.out_dir + "/summary.csv");
  manifest.output_paths = {common.out_dir + "/summary.csv"};
  finish_manifest(manifest, t0, common.out_dir);
  std::cout << t.to_text();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent principal stratification for tutoring-trial mastery data"};
  app.require_subcommand(1);

  CommonOpts common;
  FitOpts fit;
  std::string students = "students.csv", mastery = "mastery.csv";
  std::string draws_path = "draws.csv", eta_draws_path = "eta_draws.csv";
  bool allow_nonconverged = false;
  int n_reps = 20, n_stage2 = 200, n_rep_q3 = 200, n_lines = 200;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "TOML-style config file");
    sub->add_option("--seed", common.seed, "override the config seed");
    sub->add_option("--out-dir", common.out_dir, "output directory");
  };

  auto* sim = app.add_subcommand("simulate", "generate a synthetic trial");
  add_common(sim);

  auto* fitc = app.add_subcommand("fit", "fit the principal stratification model");
  add_common(fitc);
  fitc->add_option("--students", fit.students, "students.csv path")->required();
  fitc->add_option("--mastery", fit.mastery, "mastery.csv path")->required();
  fitc->add_option("--model", fit.model_override, "latent or mbar")
      ->check(CLI::IsMember({"latent", "mbar"}));
  fitc->add_option("--family", fit.family_override, "rasch, 2pl or 3pl")
      ->check(CLI::IsMember({"rasch", "2pl", "3pl"}));
  fitc->add_option("--chains", fit.chains, "number of chains");
  fitc->add_option("--warmup", fit.warmup, "warmup iterations");
  fitc->add_option("--draws", fit.draws, "retained draws per chain");
  fitc->add_flag("--allow-nonconverged", fit.allow_nonconverged, "exit 0 even if R-hat > 1.05");
  fitc->add_flag("--save-eta", fit.save_eta, "persist latent draws as a wide CSV");

  auto* diag = app.add_subcommand("diagnose", "convergence diagnostics for saved draws");
  add_common(diag);
  diag->add_option("--draws-file", draws_path, "draws.csv path")->required();
  diag->add_flag("--allow-nonconverged", allow_nonconverged);

  auto* plc = app.add_subcommand("placebo", "run the four-placebo validation grid");
  add_common(plc);
  plc->add_option("--students", students)->required();
  plc->add_option("--mastery", mastery)->required();

  auto* rec = app.add_subcommand("recovery", "simulation-based parameter recovery");
  add_common(rec);
  rec->add_option("--reps", n_reps, "number of replications");

  auto* ts = app.add_subcommand("two-stage", "multiple-imputation secondary estimator");
  add_common(ts);
  ts->add_option("--students", students)->required();
  ts->add_option("--mastery", mastery)->required();
  ts->add_option("--eta-draws", eta_draws_path, "wide CSV of eta draws")->required();
  ts->add_option("--n-draws", n_stage2, "number of eta vectors");

  auto* ppc = app.add_subcommand("ppc", "Yen's Q3 posterior predictive check");
  add_common(ppc);
  ppc->add_option("--students", students)->required();
  ppc->add_option("--mastery", mastery)->required();
  ppc->add_option("--draws-file", draws_path)->required();
  ppc->add_option("--eta-draws", eta_draws_path)->required();
  ppc->add_option("--n-rep", n_rep_q3, "retained draws for the check");

  auto* figs = app.add_subcommand("figures", "plot-ready CSVs for the figure analogs");
  add_common(figs);
  figs->add_option("--students", students)->required();
  figs->add_option("--mastery", mastery)->required();
  figs->add_option("--draws-file", draws_path)->required();
  figs->add_option("--eta-draws", eta_draws_path)->required();
  figs->add_option("--lines", n_lines, "tau(eta) posterior lines to emit");

  auto* summ = app.add_subcommand("summarize", "summary table for saved draws");
  add_common(summ);
  summ->add_option("--draws-file", draws_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(common);
    if (fitc->parsed()) return cmd_fit(common, fit);
    if (diag->parsed()) return cmd_diagnose(common, draws_path, allow_nonconverged);
    if (plc->parsed()) return cmd_placebo(common, students, mastery);
    if (rec->parsed()) return cmd_recovery(common, n_reps);
    if (ts->parsed()) return cmd_two_stage(common, students, mastery, eta_draws_path, n_stage2);
    if (ppc->parsed()) return cmd_ppc(common, students, mastery, draws_path, eta_draws_path, n_rep_q3);
    if (figs->parsed()) return cmd_figures(common, students, mastery, draws_path, eta_draws_path, n_lines);
    if (summ->parsed()) return cmd_summarize(common, draws_path);
  } catch (const DataError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const SamplerError& e) {
    std::cerr << "sampler error: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
