// Command-line interface: simulate | fit | predict | scenario | cv | diagnose.
// Exit codes: 0 success, 2 input/schema error, 3 numerical failure,
// 4 finished with outputs but without convergence.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "hdgm/diagnostics.hpp"
#include "hdgm/emfit.hpp"
#include "hdgm/io/artifact.hpp"
#include "hdgm/io/config.hpp"
#include "hdgm/io/csv.hpp"
#include "hdgm/io/panel_io.hpp"
#include "hdgm/kernels/kernels.hpp"
#include "hdgm/predict.hpp"
#include "hdgm/scenario.hpp"
#include "hdgm/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitNotConverged = 4;

struct CliOverrides {
  std::optional<int> max_iter;
  std::optional<double> tol;
  std::optional<unsigned> seed;
  std::optional<std::string> response;

  void apply(hdgm::io::RunConfig& cfg) const {
    if (max_iter) cfg.em.max_iter = *max_iter;
    if (tol) cfg.em.tol = *tol;
    if (seed) cfg.em.seed = *seed;
    if (response) cfg.response = *response;
  }
};

void write_report_json(const fs::path& path, const hdgm::FitResult& fit) {
  json j;
  j["iterations"] = fit.report.iterations;
  j["converged"] = fit.report.converged;
  j["criterion"] = fit.report.criterion;
  j["loglik_first"] = fit.report.loglik_trace.front();
  j["loglik_last"] = fit.report.loglik_trace.back();
  j["loglik_trace"] = fit.report.loglik_trace;
  j["rmse_insample"] = fit.report.rmse_insample;
  j["safeguard_activations"] = fit.report.safeguard_activations;
  j["kernel_backend"] = hdgm::kernels::backend_name(hdgm::kernels::active_backend());
  hdgm::io::atomic_write(path, j.dump(1));
}

int cmd_simulate(const fs::path& config_path, const fs::path& out,
                 const std::optional<fs::path>& latent_out,
                 const std::optional<unsigned>& seed) {
  hdgm::SimSpec spec = hdgm::io::load_sim_config(config_path);
  if (seed) spec.seed = *seed;
  const hdgm::SimOutput sim = hdgm::simulate(spec);
  hdgm::io::write_panel_csv(out, sim.panel, sim.spec);
  if (latent_out) hdgm::io::write_latent_csv(*latent_out, sim.panel, sim.latent);
  std::cerr << "simulated " << sim.panel.n() << " stations x " << sim.panel.T() << " days -> "
            << out.string() << "\n";
  return kExitOk;
}

int cmd_fit(const fs::path& panel_path, const fs::path& config_path, fs::path out_dir,
            const CliOverrides& overrides) {
  hdgm::io::RunConfig cfg = hdgm::io::load_run_config(config_path);
  overrides.apply(cfg);
  if (out_dir.empty()) out_dir = cfg.output_dir;
  const hdgm::ModelSpec spec = cfg.model_spec();

  hdgm::io::IngestStats stats;
  const hdgm::ObservationPanel panel = hdgm::io::ingest_panel(panel_path, spec, &stats);
  std::cerr << "panel: " << stats.n << " stations x " << stats.T << " days, "
            << stats.observed_cells << " complete cells, " << stats.missing_cells
            << " missing\n";

  const hdgm::FitResult fit = hdgm::em_fit(panel, spec, cfg.em);

  fs::create_directories(out_dir);
  hdgm::io::save_fit(out_dir / "fit.json", fit);
  hdgm::io::write_coefficients_csv(out_dir / "coefficients.csv", fit);
  hdgm::io::write_sigma2_csv(out_dir / "sigma2.csv", fit);
  write_report_json(out_dir / "report.json", fit);

  std::cerr << "fit: " << fit.report.iterations << " iterations, loglik "
            << fit.report.loglik_trace.back() << ", in-sample rmse " << fit.report.rmse_insample
            << (fit.report.converged ? "" : " (NOT converged)") << "\n";
  return fit.report.converged ? kExitOk : kExitNotConverged;
}

int cmd_predict(const fs::path& fit_path, const fs::path& grid_path, const fs::path& out) {
  const hdgm::FitResult fit = hdgm::io::load_fit(fit_path);
  const hdgm::PredictionGrid grid = hdgm::io::ingest_grid(grid_path, fit.spec);
  const hdgm::GridPrediction pred = hdgm::predict_response(fit, grid);
  hdgm::io::write_prediction_csv(out, grid, pred);
  if (pred.skipped > 0)
    std::cerr << "skipped " << pred.skipped << " pixel-days with incomplete covariates\n";
  return kExitOk;
}

int cmd_scenario(const fs::path& fit_path, const fs::path& grid_path,
                 const fs::path& config_path, fs::path out_dir,
                 const std::vector<std::string>& names) {
  const hdgm::FitResult fit = hdgm::io::load_fit(fit_path);
  const hdgm::io::RunConfig cfg = hdgm::io::load_run_config(config_path);
  if (out_dir.empty()) out_dir = cfg.output_dir;
  std::vector<hdgm::ScenarioSpec> specs = cfg.scenario_specs();
  if (!names.empty()) {
    std::vector<hdgm::ScenarioSpec> filtered;
    for (const auto& s : specs)
      if (std::find(names.begin(), names.end(), s.name) != names.end()) filtered.push_back(s);
    specs = std::move(filtered);
  }
  if (specs.empty()) throw hdgm::InputError("no scenarios selected");

  const hdgm::PredictionGrid grid = hdgm::io::ingest_grid(grid_path, fit.spec);
  std::vector<hdgm::ScenarioResult> results;
  for (const auto& spec : specs) {
    results.push_back(hdgm::run_scenario(fit, grid, spec));
    for (const std::string& w : results.back().warnings)
      std::cerr << "warning: " << spec.name << ": " << w << "\n";
  }

  fs::create_directories(out_dir);
  hdgm::io::write_scenario_delta_csv(out_dir / "scenario_deltas.csv", grid, results);
  hdgm::io::write_scenario_summary_csv(out_dir / "scenario_summary.csv", results);
  hdgm::io::write_scenario_pixel_csv(out_dir / "scenario_pixels.csv", results);
  return kExitOk;
}

int cmd_cv(const fs::path& panel_path, const fs::path& config_path,
           const std::vector<std::string>& holdout, const fs::path& out,
           const CliOverrides& overrides) {
  hdgm::io::RunConfig cfg = hdgm::io::load_run_config(config_path);
  overrides.apply(cfg);
  const hdgm::ModelSpec spec = cfg.model_spec();
  const hdgm::ObservationPanel panel = hdgm::io::ingest_panel(panel_path, spec);
  const hdgm::CvReport report = hdgm::losocv(panel, spec, cfg.em, holdout);
  hdgm::io::write_cv_csv(out, report);
  for (const std::string& f : report.failed) std::cerr << "warning: fold failed: " << f << "\n";
  std::cerr << "cv: pooled rmse " << report.pooled_rmse << ", in-sample "
            << report.insample_rmse << "\n";
  return kExitOk;
}

int cmd_diagnose(const fs::path& fit_path, const fs::path& panel_path, const fs::path& out_dir,
                 const fs::path& config_path) {
  const hdgm::FitResult fit = hdgm::io::load_fit(fit_path);
  hdgm::io::RunConfig cfg;
  if (!config_path.empty()) cfg = hdgm::io::load_run_config(config_path);
  const hdgm::ObservationPanel panel = hdgm::io::ingest_panel(panel_path, fit.spec);
  if (panel.n() != static_cast<int>(fit.station_ids.size()) ||
      panel.station_ids != fit.station_ids)
    throw hdgm::InputError("panel stations do not match the fitted stations");
  if (panel.T() != static_cast<int>(fit.dates.size()) ||
      panel.dates.front().serial != fit.dates.front().serial)
    throw hdgm::InputError("panel dates do not match the fitted dates");

  const Eigen::MatrixXd resid =
      hdgm::studentized_residuals(panel, fit.spec, fit.params, fit.z_smooth);
  const hdgm::StationAcf acf = hdgm::station_acf(resid, cfg.acf_max_lag);
  const hdgm::Variogram vario = hdgm::st_variogram(panel, cfg.vario_bins, cfg.vario_lags);

  fs::create_directories(out_dir);
  hdgm::io::write_residuals_csv(out_dir / "residuals.csv", panel, resid);
  hdgm::io::write_acf_csv(out_dir / "acf.csv", panel, acf);
  hdgm::io::write_variogram_csv(out_dir / "variogram.csv", vario);
  for (int i : acf.skipped)
    std::cerr << "warning: station " << panel.station_ids[i]
              << " skipped in the acf (series too short or constant)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heteroskedastic hidden dynamic geostatistical modeling toolkit"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "sample a synthetic panel from the model");
  fs::path sim_config, sim_out;
  std::optional<fs::path> sim_latent;
  std::optional<unsigned> sim_seed;
  sim->add_option("--config", sim_config, "simulation config (JSON)")->required();
  sim->add_option("--out", sim_out, "output panel CSV")->required();
  sim->add_option("--latent-out", sim_latent, "optional latent path CSV");
  sim->add_option("--seed", sim_seed, "override the config seed");

  // shared fit/cv overrides
  CliOverrides overrides;

  // fit
  auto* fit = app.add_subcommand("fit", "maximum-likelihood fit by EM");
  fs::path fit_panel, fit_config, fit_out;
  fit->add_option("--panel", fit_panel, "panel CSV")->required();
  fit->add_option("--config", fit_config, "run config (JSON)")->required();
  fit->add_option("--out-dir", fit_out, "output directory (default: config output_dir)");
  fit->add_option("--max-iter", overrides.max_iter, "EM iteration cap");
  fit->add_option("--tol", overrides.tol, "relative log-likelihood tolerance");
  fit->add_option("--seed", overrides.seed, "seed recorded with the fit");
  fit->add_option("--response", overrides.response, "response column name");

  // predict
  auto* pred = app.add_subcommand("predict", "predict the response on a grid");
  fs::path pred_fit, pred_grid, pred_out;
  pred->add_option("--fit", pred_fit, "fit artifact")->required();
  pred->add_option("--grid", pred_grid, "grid CSV")->required();
  pred->add_option("--out", pred_out, "output CSV")->required();

  // scenario
  auto* scen = app.add_subcommand("scenario", "what-if reduction analysis");
  fs::path scen_fit, scen_grid, scen_config, scen_out;
  std::vector<std::string> scen_names;
  scen->add_option("--fit", scen_fit, "fit artifact")->required();
  scen->add_option("--grid", scen_grid, "grid CSV")->required();
  scen->add_option("--config", scen_config, "run config (JSON)")->required();
  scen->add_option("--out-dir", scen_out, "output directory (default: config output_dir)");
  scen->add_option("--names", scen_names, "scenario names to run (default: all)")
      ->delimiter(',');

  // cv
  auto* cv = app.add_subcommand("cv", "leave-one-station-out cross-validation");
  fs::path cv_panel, cv_config, cv_out;
  std::vector<std::string> cv_holdout;
  cv->add_option("--panel", cv_panel, "panel CSV")->required();
  cv->add_option("--config", cv_config, "run config (JSON)")->required();
  cv->add_option("--holdout", cv_holdout, "held-out station ids")->required()->delimiter(',');
  cv->add_option("--out", cv_out, "output CSV")->required();
  cv->add_option("--max-iter", overrides.max_iter, "EM iteration cap");
  cv->add_option("--tol", overrides.tol, "relative log-likelihood tolerance");

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "residuals, acf and variogram CSVs");
  fs::path diag_fit, diag_panel, diag_out = "out", diag_config;
  diag->add_option("--fit", diag_fit, "fit artifact")->required();
  diag->add_option("--panel", diag_panel, "panel CSV")->required();
  diag->add_option("--out-dir", diag_out, "output directory");
  diag->add_option("--config", diag_config, "run config (JSON), for diagnostics settings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_config, sim_out, sim_latent, sim_seed);
    if (fit->parsed()) return cmd_fit(fit_panel, fit_config, fit_out, overrides);
    if (pred->parsed()) return cmd_predict(pred_fit, pred_grid, pred_out);
    if (scen->parsed()) return cmd_scenario(scen_fit, scen_grid, scen_config, scen_out, scen_names);
    if (cv->parsed()) return cmd_cv(cv_panel, cv_config, cv_holdout, cv_out, overrides);
    if (diag->parsed()) return cmd_diagnose(diag_fit, diag_panel, diag_out, diag_config);
  } catch (const hdgm::InputError& e) {
    std::cerr << "error: input: " << e.what() << "\n";
    return kExitInput;
  } catch (const hdgm::NumericalError& e) {
    std::cerr << "error: numerical: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitInput;
}
