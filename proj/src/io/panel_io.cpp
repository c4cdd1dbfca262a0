#include "hdgm/io/panel_io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "hdgm/io/csv.hpp"

namespace hdgm::io {

namespace {

// Raw input columns the model spec consumes, split into required and optional.
struct RawNeeds {
  std::vector<std::string> required;
  std::vector<std::string> optional;  // binary columns derivable from the rain rule
};

RawNeeds raw_needs(const ModelSpec& spec) {
  RawNeeds needs;
  std::set<std::string> req, opt;
  for (const Column& c : spec.columns) {
    switch (c.kind) {
      case Column::Kind::Intercept:
        break;
      case Column::Kind::Continuous:
        req.insert(c.name);
        break;
      case Column::Kind::Binary:
        if (spec.rain && c.name == spec.rain->name) {
          opt.insert(c.name);
          req.insert(spec.rain->source);
        } else {
          req.insert(c.name);
        }
        break;
      case Column::Kind::Interaction:
        req.insert(c.base);
        break;
    }
  }
  needs.required.assign(req.begin(), req.end());
  needs.optional.assign(opt.begin(), opt.end());
  return needs;
}

}  // namespace

ObservationPanel ingest_panel(const std::filesystem::path& path, const ModelSpec& spec,
                              IngestStats* stats) {
  spec.validate();
  const CsvTable table = read_csv(path);
  const int c_station = table.require_col("station_id");
  const int c_date = table.require_col("date");
  const int c_lat = table.require_col("latitude");
  const int c_lon = table.require_col("longitude");
  const int c_resp = table.require_col(spec.response);

  const RawNeeds needs = raw_needs(spec);
  std::map<std::string, int> raw_cols;
  for (const std::string& name : needs.required)
    raw_cols[name] = table.require_col(name);
  for (const std::string& name : needs.optional) {
    const int j = table.col(name);
    if (j >= 0) raw_cols[name] = j;
  }
  const int c_alt = table.col("altitude");
  const int c_prov = table.col("province");
  const int c_land = table.col("land_type");

  // stations sorted by id for deterministic ordering
  std::map<std::string, int> station_index;
  for (const auto& row : table.rows) station_index.emplace(row[c_station], 0);
  {
    int idx = 0;
    for (auto& [id, i] : station_index) i = idx++;
  }
  const int n = static_cast<int>(station_index.size());
  if (n == 0) throw InputError("panel file has no data rows");

  int d_min = std::numeric_limits<int>::max();
  int d_max = std::numeric_limits<int>::min();
  for (const auto& row : table.rows) {
    const int s = Date::from_string(row[c_date]).serial;
    d_min = std::min(d_min, s);
    d_max = std::max(d_max, s);
  }
  const int T = d_max - d_min + 1;

  ObservationPanel panel;
  panel.station_ids.resize(n);
  panel.sites.sites.resize(n);
  panel.sites.labels.resize(n);
  for (const auto& [id, i] : station_index) {
    panel.station_ids[i] = id;
    panel.sites.labels[i] = id;
  }
  panel.dates.resize(T);
  for (int t = 0; t < T; ++t) panel.dates[t] = Date{d_min + t};
  panel.y = Eigen::MatrixXd::Constant(n, T, std::nan(""));

  std::map<std::string, Eigen::MatrixXd> raw;
  for (const auto& [name, j] : raw_cols)
    raw[name] = Eigen::MatrixXd::Constant(n, T, std::nan(""));

  std::vector<bool> site_set(n, false);
  if (c_alt >= 0) panel.altitude.assign(n, std::nan(""));
  if (c_prov >= 0) panel.province.assign(n, "");
  if (c_land >= 0) panel.land_type.assign(n, "");

  std::map<std::pair<int, int>, std::size_t> seen;  // (station, date) -> row number
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const int i = station_index[row[c_station]];
    const int t = Date::from_string(row[c_date]).serial - d_min;

    const auto [it, fresh] = seen.emplace(std::make_pair(i, t), r + 2);
    if (!fresh)
      throw InputError("duplicate (station, date) = (" + row[c_station] + ", " + row[c_date] +
                       ") on rows " + std::to_string(it->second) + " and " +
                       std::to_string(r + 2));

    const double lat = parse_double(row[c_lat], "latitude");
    const double lon = parse_double(row[c_lon], "longitude");
    if (!site_set[i]) {
      panel.sites.sites[i] = {lat, lon};
      site_set[i] = true;
    } else if (panel.sites.sites[i].lat != lat || panel.sites.sites[i].lon != lon) {
      throw InputError("inconsistent coordinates for station '" + row[c_station] + "' on row " +
                       std::to_string(r + 2));
    }

    panel.y(i, t) = parse_double_or_nan(row[c_resp], spec.response);
    for (const auto& [name, j] : raw_cols)
      raw[name](i, t) = parse_double_or_nan(row[j], name);

    if (c_alt >= 0 && panel.altitude[i] != panel.altitude[i])
      panel.altitude[i] = parse_double_or_nan(row[c_alt], "altitude");
    if (c_prov >= 0 && panel.province[i].empty()) panel.province[i] = row[c_prov];
    if (c_land >= 0 && panel.land_type[i].empty()) panel.land_type[i] = row[c_land];
  }

  panel.column_names.clear();
  for (const Column& c : spec.columns) panel.column_names.push_back(c.name);
  panel.x.resize(T);
  for (int t = 0; t < T; ++t) {
    std::map<std::string, Eigen::VectorXd> cols;
    for (const auto& [name, m] : raw) cols[name] = m.col(t);
    panel.x[t] = build_design_row_block(spec, panel.dates[t], cols, n);
  }
  panel.validate();

  if (stats) {
    stats->rows = static_cast<long>(table.rows.size());
    stats->n = n;
    stats->T = T;
    stats->observed_cells = 0;
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < n; ++i)
        if (panel.cell_complete(i, t)) ++stats->observed_cells;
    stats->missing_cells = static_cast<long>(n) * T - stats->observed_cells;
  }
  return panel;
}

PredictionGrid ingest_grid(const std::filesystem::path& path, const ModelSpec& spec) {
  spec.validate();
  const CsvTable table = read_csv(path);
  const int c_pixel = table.require_col("pixel_id");
  const int c_date = table.require_col("date");
  const int c_lat = table.require_col("latitude");
  const int c_lon = table.require_col("longitude");

  const RawNeeds needs = raw_needs(spec);
  std::map<std::string, int> raw_cols;
  for (const std::string& name : needs.required)
    raw_cols[name] = table.require_col(name);
  for (const std::string& name : needs.optional) {
    const int j = table.col(name);
    if (j >= 0) raw_cols[name] = j;
  }
  const int c_alt = table.col("altitude");
  const int c_prov = table.col("province");
  const int c_land = table.col("land_type");
  const int c_forest = table.col("forest");

  std::map<std::string, int> pixel_index;
  std::set<int> date_set;
  for (const auto& row : table.rows) {
    pixel_index.emplace(row[c_pixel], 0);
    date_set.insert(Date::from_string(row[c_date]).serial);
  }
  {
    int idx = 0;
    for (auto& [id, i] : pixel_index) i = idx++;
  }
  const int m = static_cast<int>(pixel_index.size());
  if (m == 0) throw InputError("grid file has no data rows");

  PredictionGrid grid;
  grid.pixel_ids.resize(m);
  grid.sites.sites.resize(m);
  for (const auto& [id, i] : pixel_index) grid.pixel_ids[i] = id;
  for (int serial : date_set) grid.dates.push_back(Date{serial});
  const int tg = grid.T();
  std::map<int, int> date_index;
  for (int t = 0; t < tg; ++t) date_index[grid.dates[t].serial] = t;

  grid.raw.resize(tg);
  for (int t = 0; t < tg; ++t)
    for (const auto& [name, j] : raw_cols)
      grid.raw[t][name] = Eigen::VectorXd::Constant(m, std::nan(""));

  if (c_alt >= 0) grid.altitude.assign(m, std::nan(""));
  if (c_prov >= 0) grid.province.assign(m, "");
  if (c_land >= 0) grid.land_type.assign(m, "");
  if (c_forest >= 0) grid.forest.assign(m, 0);

  std::vector<bool> site_set(m, false);
  std::map<std::pair<int, int>, std::size_t> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const int i = pixel_index[row[c_pixel]];
    const int t = date_index[Date::from_string(row[c_date]).serial];

    const auto [it, fresh] = seen.emplace(std::make_pair(i, t), r + 2);
    if (!fresh)
      throw InputError("duplicate (pixel, date) = (" + row[c_pixel] + ", " + row[c_date] +
                       ") on rows " + std::to_string(it->second) + " and " +
                       std::to_string(r + 2));

    const double lat = parse_double(row[c_lat], "latitude");
    const double lon = parse_double(row[c_lon], "longitude");
    if (!site_set[i]) {
      grid.sites.sites[i] = {lat, lon};
      site_set[i] = true;
    } else if (grid.sites.sites[i].lat != lat || grid.sites.sites[i].lon != lon) {
      throw InputError("inconsistent coordinates for pixel '" + row[c_pixel] + "' on row " +
                       std::to_string(r + 2));
    }

    for (const auto& [name, j] : raw_cols)
      grid.raw[t][name](i) = parse_double_or_nan(row[j], name);

    if (c_alt >= 0 && grid.altitude[i] != grid.altitude[i])
      grid.altitude[i] = parse_double_or_nan(row[c_alt], "altitude");
    if (c_prov >= 0 && grid.province[i].empty()) grid.province[i] = row[c_prov];
    if (c_land >= 0 && grid.land_type[i].empty()) grid.land_type[i] = row[c_land];
    if (c_forest >= 0 && !row[c_forest].empty())
      grid.forest[i] = parse_long(row[c_forest], "forest") != 0 ? 1 : 0;
  }

  grid.validate();
  return grid;
}

void write_panel_csv(const std::filesystem::path& path, const ObservationPanel& panel,
                     const ModelSpec& spec) {
  std::vector<std::string> header = {"station_id", "date", "latitude", "longitude",
                                     spec.response};
  std::vector<int> raw_j;
  for (int j = 0; j < spec.p(); ++j) {
    const Column& c = spec.columns[j];
    if (c.kind == Column::Kind::Continuous || c.kind == Column::Kind::Binary) {
      header.push_back(c.name);
      raw_j.push_back(j);
    }
  }
  if (!panel.altitude.empty()) header.push_back("altitude");
  if (!panel.province.empty()) header.push_back("province");
  if (!panel.land_type.empty()) header.push_back("land_type");

  CsvBuilder out(header);
  for (int i = 0; i < panel.n(); ++i) {
    for (int t = 0; t < panel.T(); ++t) {
      std::vector<std::string> row = {panel.station_ids[i], panel.dates[t].to_string(),
                                      format_double(panel.sites.sites[i].lat),
                                      format_double(panel.sites.sites[i].lon),
                                      format_double(panel.y(i, t))};
      for (int j : raw_j) row.push_back(format_double(panel.x[t](i, j)));
      if (!panel.altitude.empty()) row.push_back(format_double(panel.altitude[i]));
      if (!panel.province.empty()) row.push_back(panel.province[i]);
      if (!panel.land_type.empty()) row.push_back(panel.land_type[i]);
      out.row(row);
    }
  }
  out.write(path);
}

void write_latent_csv(const std::filesystem::path& path, const ObservationPanel& panel,
                      const Eigen::MatrixXd& latent) {
  CsvBuilder out({"station_id", "date", "z"});
  for (int i = 0; i < panel.n(); ++i)
    for (int t = 0; t < panel.T(); ++t)
      out.row({panel.station_ids[i], panel.dates[t].to_string(), format_double(latent(i, t))});
  out.write(path);
}

void write_prediction_csv(const std::filesystem::path& path, const PredictionGrid& grid,
                          const GridPrediction& pred) {
  std::vector<std::string> header = {"pixel_id", "latitude", "longitude", "date", "y_hat"};
  const bool has_alt = !grid.altitude.empty();
  const bool has_prov = !grid.province.empty();
  const bool has_land = !grid.land_type.empty();
  if (has_alt) header.push_back("altitude");
  if (has_prov) header.push_back("province");
  if (has_land) header.push_back("land_type");

  CsvBuilder out(header);
  for (int i = 0; i < grid.m(); ++i) {
    for (int t = 0; t < grid.T(); ++t) {
      if (!std::isfinite(pred.y_hat(i, t))) continue;  // skipped pixel-days
      std::vector<std::string> row = {grid.pixel_ids[i],
                                      format_double(grid.sites.sites[i].lat),
                                      format_double(grid.sites.sites[i].lon),
                                      grid.dates[t].to_string(),
                                      format_double(pred.y_hat(i, t))};
      if (has_alt) row.push_back(format_double(grid.altitude[i]));
      if (has_prov) row.push_back(grid.province[i]);
      if (has_land) row.push_back(grid.land_type[i]);
      out.row(row);
    }
  }
  out.write(path);
}

void write_scenario_delta_csv(const std::filesystem::path& path, const PredictionGrid& grid,
                              const std::vector<ScenarioResult>& results) {
  CsvBuilder out({"scenario", "pixel_id", "latitude", "longitude", "date", "change"});
  for (const ScenarioResult& res : results) {
    std::set<int> window;
    for (const Date& d : res.dates) window.insert(d.serial);
    for (int i : res.pixels) {
      for (int t = 0; t < grid.T(); ++t) {
        if (!window.count(grid.dates[t].serial)) continue;
        const double v = res.change(i, t);
        if (!std::isfinite(v)) continue;
        out.row({res.name, grid.pixel_ids[i], format_double(grid.sites.sites[i].lat),
                 format_double(grid.sites.sites[i].lon), grid.dates[t].to_string(),
                 format_double(v)});
      }
    }
  }
  out.write(path);
}

void write_scenario_summary_csv(const std::filesystem::path& path,
                                const std::vector<ScenarioResult>& results) {
  CsvBuilder out({"scenario", "r", "group_key", "group", "n_pixels", "n_days", "y_bar",
                  "delta_mean", "delta_std", "percent"});
  for (const ScenarioResult& res : results)
    for (const GroupSummary& g : res.groups)
      out.row({res.name, format_double(res.r), g.key, g.value, std::to_string(g.n_pixels),
               std::to_string(g.n_days), format_double(g.y_bar), format_double(g.delta_mean),
               format_double(g.delta_std), format_double(g.percent)});
  out.write(path);
}

void write_scenario_pixel_csv(const std::filesystem::path& path,
                              const std::vector<ScenarioResult>& results) {
  CsvBuilder out(
      {"scenario", "pixel_id", "latitude", "longitude", "n_days", "delta_mean", "delta_std"});
  for (const ScenarioResult& res : results)
    for (const PixelSummary& p : res.pixel_map)
      out.row({res.name, p.pixel_id, format_double(p.lat), format_double(p.lon),
               std::to_string(p.n_days), format_double(p.delta_mean),
               format_double(p.delta_std)});
  out.write(path);
}

void write_residuals_csv(const std::filesystem::path& path, const ObservationPanel& panel,
                         const Eigen::MatrixXd& residuals) {
  CsvBuilder out({"station_id", "date", "residual"});
  for (int i = 0; i < panel.n(); ++i)
    for (int t = 0; t < panel.T(); ++t) {
      if (!std::isfinite(residuals(i, t))) continue;
      out.row({panel.station_ids[i], panel.dates[t].to_string(),
               format_double(residuals(i, t))});
    }
  out.write(path);
}

void write_acf_csv(const std::filesystem::path& path, const ObservationPanel& panel,
                   const StationAcf& acf) {
  CsvBuilder out({"station_id", "lag", "acf"});
  for (std::size_t k = 0; k < acf.station.size(); ++k)
    for (int lag = 0; lag < acf.acf[k].size(); ++lag)
      out.row({panel.station_ids[acf.station[k]], std::to_string(lag),
               format_double(acf.acf[k](lag))});
  out.write(path);
}

void write_variogram_csv(const std::filesystem::path& path, const Variogram& v) {
  CsvBuilder out({"h_bin", "h_mid", "u_lag", "gamma", "count"});
  for (int b = 0; b < v.h_mid.size(); ++b)
    for (int u = 0; u < v.u_lags.size(); ++u)
      out.row({std::to_string(b), format_double(v.h_mid(b)), std::to_string(v.u_lags(u)),
               format_double(v.gamma(b, u)), format_double(v.count(b, u))});
  out.write(path);
}

void write_cv_csv(const std::filesystem::path& path, const CvReport& report) {
  CsvBuilder out({"station_id", "rmse", "n_obs"});
  for (std::size_t k = 0; k < report.station.size(); ++k)
    out.row({report.station[k], format_double(report.rmse[k]),
             std::to_string(report.n_obs[k])});
  out.row({"__pooled__", format_double(report.pooled_rmse), ""});
  out.row({"__insample__", format_double(report.insample_rmse), ""});
  out.write(path);
}

std::vector<CoefficientRow> coefficient_table(const FitResult& fit) {
  const int p = fit.spec.p();
  const Moments& m = fit.params.moments;
  const Eigen::VectorXd& beta = fit.params.beta;
  const Eigen::MatrixXd& cov = fit.report.sigma_beta;

  // linear map from standardized to original-unit coefficients
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(p, p);
  int intercept = -1;
  for (int j = 0; j < p; ++j)
    if (fit.spec.columns[j].kind == Column::Kind::Intercept) intercept = j;
  for (int j = 0; j < p; ++j) {
    if (j == intercept) continue;
    l(j, j) = m.response_std / m.std(j);
  }
  if (intercept >= 0) {
    l(intercept, intercept) = m.response_std;
    for (int j = 0; j < p; ++j) {
      if (j == intercept) continue;
      l(intercept, j) = -m.response_std * m.mean(j) / m.std(j);
    }
  }
  const Eigen::VectorXd beta_orig = l * beta;
  const Eigen::MatrixXd cov_orig = l * cov * l.transpose();

  std::vector<CoefficientRow> rows(p);
  for (int j = 0; j < p; ++j) {
    CoefficientRow& r = rows[j];
    r.name = fit.spec.columns[j].name;
    r.beta_std = beta(j);
    r.se_std = std::sqrt(std::max(cov(j, j), 0.0));
    r.t_abs = (r.se_std > 0.0) ? std::abs(r.beta_std) / r.se_std : 0.0;
    r.p_value = std::erfc(r.t_abs / std::sqrt(2.0));
    r.beta_orig = beta_orig(j);
    r.se_orig = std::sqrt(std::max(cov_orig(j, j), 0.0));
    if (intercept == j) r.beta_orig += m.response_mean;
  }
  return rows;
}

void write_coefficients_csv(const std::filesystem::path& path, const FitResult& fit) {
  CsvBuilder out({"name", "beta", "std", "t_abs", "p_value", "beta_orig", "std_orig"});
  for (const CoefficientRow& r : coefficient_table(fit))
    out.row({r.name, format_double(r.beta_std), format_double(r.se_std),
             format_double(r.t_abs), format_double(r.p_value), format_double(r.beta_orig),
             format_double(r.se_orig)});
  out.write(path);
}

void write_sigma2_csv(const std::filesystem::path& path, const FitResult& fit) {
  CsvBuilder out({"date", "sigma2"});
  for (int t = 0; t < static_cast<int>(fit.dates.size()); ++t)
    out.row({fit.dates[t].to_string(), format_double(fit.params.sigma2(t))});
  out.write(path);
}

}  // namespace hdgm::io
