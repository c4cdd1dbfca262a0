#include "hdgm/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace hdgm {

namespace {

struct AffectedColumns {
  int base = -1;
  std::vector<int> interactions;  // interaction columns whose base is the target
};

AffectedColumns affected_columns(const ModelSpec& model, const std::string& target) {
  AffectedColumns out;
  out.base = model.column_index(target);
  for (int j = 0; j < model.p(); ++j)
    if (model.columns[j].kind == Column::Kind::Interaction && model.columns[j].base == target)
      out.interactions.push_back(j);
  return out;
}

int fit_date_index(const FitResult& fit, const Date& d) {
  const auto it = std::lower_bound(fit.dates.begin(), fit.dates.end(), d);
  if (it == fit.dates.end() || !(*it == d))
    throw InputError("scenario date " + d.to_string() + " is outside the fitted period");
  return static_cast<int>(it - fit.dates.begin());
}

}  // namespace

bool ScenarioWindow::contains(const Date& d) const {
  if (from && d < *from) return false;
  if (to && *to < d) return false;
  if (season && season_of(d) != *season) return false;
  return true;
}

void ScenarioSpec::validate(const ModelSpec& model) const {
  if (name.empty()) throw InputError("scenario has no name");
  if (!(r >= 0.0 && r <= 1.0)) throw InputError("scenario reduction factor must be in [0, 1]");
  const int j = model.column_index(target);
  if (j < 0) throw InputError("scenario target column '" + target + "' is not in the model");
  if (model.columns[j].kind != Column::Kind::Continuous)
    throw InputError("scenario target '" + target + "' must be a standardized continuous column");
  for (const std::string& key : aggregate_by)
    if (key != "overall" && key != "province" && key != "land" && key != "season")
      throw InputError("unknown aggregation key '" + key + "'");
}

std::vector<int> masked_pixels(const PredictionGrid& grid, const MaskRule& mask) {
  const int m = grid.m();
  if (mask.max_altitude && static_cast<int>(grid.altitude.size()) != m)
    throw InputError("mask uses altitude but the grid has no altitude column");
  if (mask.exclude_forest && static_cast<int>(grid.forest.size()) != m)
    throw InputError("mask excludes forest but the grid has no forest column");
  if (!mask.provinces.empty() && static_cast<int>(grid.province.size()) != m)
    throw InputError("mask filters provinces but the grid has no province column");
  if (!mask.land_types.empty() && static_cast<int>(grid.land_type.size()) != m)
    throw InputError("mask filters land types but the grid has no land_type column");

  std::vector<int> out;
  for (int i = 0; i < m; ++i) {
    if (mask.max_altitude && !(grid.altitude[i] < *mask.max_altitude)) continue;
    if (mask.exclude_forest && grid.forest[i]) continue;
    if (!mask.provinces.empty() &&
        std::find(mask.provinces.begin(), mask.provinces.end(), grid.province[i]) ==
            mask.provinces.end())
      continue;
    if (!mask.land_types.empty() &&
        std::find(mask.land_types.begin(), mask.land_types.end(), grid.land_type[i]) ==
            mask.land_types.end())
      continue;
    out.push_back(i);
  }
  return out;
}

PredictionGrid apply_reduction(const PredictionGrid& grid, const ModelSpec& model,
                               const ScenarioSpec& spec) {
  grid.validate();
  spec.validate(model);
  const std::vector<int> pixels = masked_pixels(grid, spec.mask);

  PredictionGrid out = grid;
  const double factor = 1.0 - spec.r;
  for (int t = 0; t < grid.T(); ++t) {
    if (!spec.window.contains(grid.dates[t])) continue;
    auto it = out.raw[t].find(spec.target);
    if (it == out.raw[t].end())
      throw InputError("scenario target column '" + spec.target + "' is missing from the grid");
    for (int i : pixels) it->second(i) *= factor;
  }
  return out;
}

Eigen::MatrixXd daily_delta(const FitResult& fit, const PredictionGrid& grid,
                            const ScenarioSpec& spec) {
  grid.validate();
  spec.validate(fit.spec);
  const int m = grid.m();
  const int tg = grid.T();
  const AffectedColumns cols = affected_columns(fit.spec, spec.target);
  const Moments& mom = fit.params.moments;

  std::vector<std::uint8_t> in_mask(m, 0);
  for (int i : masked_pixels(grid, spec.mask)) in_mask[i] = 1;

  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(m, tg);
  for (int t = 0; t < tg; ++t) {
    const Eigen::MatrixXd x = grid.design_block(fit.spec, t);
    const bool in_window = spec.window.contains(grid.dates[t]);
    for (int i = 0; i < m; ++i) {
      bool complete = true;
      for (int j = 0; j < fit.spec.p(); ++j)
        if (!std::isfinite(x(i, j))) {
          complete = false;
          break;
        }
      if (!complete) {
        delta(i, t) = std::nan("");
        continue;
      }
      if (!in_window || !in_mask[i]) continue;  // unaffected: delta stays 0

      // Delta_x' beta over the affected columns; the intercept and latent
      // terms cancel exactly
      const double base_orig = x(i, cols.base);
      double d_std = fit.params.beta(cols.base) * spec.r * base_orig / mom.std(cols.base);
      for (int j : cols.interactions) {
        const double inter_orig = x(i, j);  // base * season indicator
        d_std += fit.params.beta(j) * spec.r * inter_orig / mom.std(j);
      }
      delta(i, t) = d_std * mom.response_std;
    }
  }
  return delta;
}

ScenarioResult aggregate(const FitResult& fit, const PredictionGrid& grid,
                         const ScenarioSpec& spec, const Eigen::MatrixXd& delta,
                         const GridPrediction& baseline) {
  spec.validate(fit.spec);
  const AffectedColumns cols = affected_columns(fit.spec, spec.target);
  const Moments& mom = fit.params.moments;

  ScenarioResult result;
  result.name = spec.name;
  result.r = spec.r;
  result.pixels = masked_pixels(grid, spec.mask);

  std::vector<int> window_t;
  for (int t = 0; t < grid.T(); ++t)
    if (spec.window.contains(grid.dates[t])) {
      window_t.push_back(t);
      result.dates.push_back(grid.dates[t]);
    }
  if (result.pixels.empty()) throw InputError("scenario mask leaves no pixels");
  if (window_t.empty()) throw InputError("scenario window leaves no dates");

  result.change = (-delta.array() + 0.0).matrix();

  // one group = a set of pixels crossed with a set of dates
  struct Group {
    std::string key, value;
    std::vector<int> pixels;
    std::vector<int> t_idx;
  };
  std::vector<Group> groups;
  for (const std::string& key : spec.aggregate_by) {
    if (key == "overall") {
      groups.push_back({key, "all", result.pixels, window_t});
    } else if (key == "province" || key == "land") {
      const std::vector<std::string>& meta =
          (key == "province") ? grid.province : grid.land_type;
      if (static_cast<int>(meta.size()) != grid.m())
        throw InputError("aggregation by " + key + " needs the matching grid metadata column");
      std::map<std::string, std::vector<int>> by;
      for (int i : result.pixels) by[meta[i]].push_back(i);
      for (auto& [value, pix] : by) groups.push_back({key, value, pix, window_t});
    } else {  // season
      std::map<std::string, std::vector<int>> by;
      for (int t : window_t) by[season_name(season_of(grid.dates[t]))].push_back(t);
      for (auto& [value, ts] : by) groups.push_back({key, value, result.pixels, ts});
    }
  }

  const auto summarize = [&](const std::string& key, const std::string& value,
                             const std::vector<int>& pixels, const std::vector<int>& t_idx,
                             GroupSummary& g) -> bool {
    double sum_delta = 0.0, sum_base = 0.0;
    long n_cells = 0;
    Eigen::VectorXd dx_sum = Eigen::VectorXd::Zero(fit.spec.p());
    std::set<int> pix_present, day_present;

    for (int t : t_idx) {
      const Eigen::MatrixXd x = grid.design_block(fit.spec, t);
      for (int i : pixels) {
        const double d = delta(i, t);
        if (!std::isfinite(d)) continue;
        sum_delta += d;
        sum_base += baseline.y_hat(i, t);
        ++n_cells;
        pix_present.insert(i);
        day_present.insert(t);
        dx_sum(cols.base) += spec.r * x(i, cols.base) / mom.std(cols.base);
        for (int j : cols.interactions) dx_sum(j) += spec.r * x(i, j) / mom.std(j);
      }
    }
    if (n_cells == 0) return false;

    g.key = key;
    g.value = value;
    g.n_pixels = static_cast<long>(pix_present.size());
    g.n_days = static_cast<long>(day_present.size());
    g.n_cells = n_cells;
    g.y_bar = sum_base / static_cast<double>(n_cells);
    g.delta_mean = -sum_delta / static_cast<double>(n_cells);

    if (n_cells != g.n_pixels * g.n_days)
      result.warnings.push_back("group " + key + "=" + value +
                                " is ragged; the analytic uncertainty assumes a complete grid");

    const Eigen::VectorXd dx_bar = dx_sum / static_cast<double>(n_cells);
    double sig_sum = 0.0;
    for (int t : day_present) sig_sum += fit.params.sigma2(fit_date_index(fit, grid.dates[t]));
    const double i_star = static_cast<double>(g.n_days);
    const double d_star = static_cast<double>(g.n_pixels);
    const double var_std = dx_bar.dot(fit.report.sigma_beta * dx_bar) +
                           2.0 / (i_star * i_star * d_star) * sig_sum;
    g.delta_std = mom.response_std * std::sqrt(std::max(var_std, 0.0));
    g.percent = (std::abs(g.y_bar) > 1e-12) ? 100.0 * g.delta_mean / g.y_bar : 0.0;
    return true;
  };

  for (const Group& grp : groups) {
    GroupSummary g;
    if (summarize(grp.key, grp.value, grp.pixels, grp.t_idx, g)) {
      result.groups.push_back(g);
    } else {
      result.warnings.push_back("group " + grp.key + "=" + grp.value +
                                " has no pixel-days and was skipped");
    }
  }
  if (result.groups.empty())
    throw InputError("no scenario group has any pixel-days after masking");

  for (int i : result.pixels) {
    GroupSummary g;
    if (!summarize("pixel", grid.pixel_ids[i], {i}, window_t, g)) {
      result.warnings.push_back("pixel " + grid.pixel_ids[i] +
                                " has no data in the window and was skipped");
      continue;
    }
    PixelSummary ps;
    ps.pixel_id = grid.pixel_ids[i];
    ps.lat = grid.sites.sites[i].lat;
    ps.lon = grid.sites.sites[i].lon;
    ps.n_days = g.n_days;
    ps.delta_mean = g.delta_mean;
    ps.delta_std = g.delta_std;
    result.pixel_map.push_back(ps);
  }

  return result;
}

ScenarioResult run_scenario(const FitResult& fit, const PredictionGrid& grid,
                            const ScenarioSpec& spec) {
  const GridPrediction baseline = predict_response(fit, grid);
  const Eigen::MatrixXd delta = daily_delta(fit, grid, spec);
  return aggregate(fit, grid, spec, delta, baseline);
}

}  // namespace hdgm
