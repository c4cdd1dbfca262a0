#include "hdgm/panel.hpp"

#include <cmath>
#include <cstdio>

#include "hdgm/kernels/kernels.hpp"

namespace hdgm {

namespace {

// civil <-> serial day conversions (Gregorian, days since 1970-01-01)
int days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return era * 146097 + static_cast<int>(doe) - 719468;
}

void civil_from_days(int z, int& y, int& m, int& d) {
  z += 719468;
  const int era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<int>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y += m <= 2;
}

}  // namespace

Date Date::from_ymd(int y, int m, int d) {
  if (m < 1 || m > 12 || d < 1 || d > 31)
    throw InputError("invalid date " + std::to_string(y) + "-" + std::to_string(m) + "-" +
                     std::to_string(d));
  return Date{days_from_civil(y, m, d)};
}

Date Date::from_string(const std::string& iso) {
  int y = 0, m = 0, d = 0;
  char extra = 0;
  if (std::sscanf(iso.c_str(), "%d-%d-%d%c", &y, &m, &d, &extra) != 3)
    throw InputError("date '" + iso + "' is not YYYY-MM-DD");
  return from_ymd(y, m, d);
}

std::string Date::to_string() const {
  int y, m, d;
  civil_from_days(serial, y, m, d);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
  return buf;
}

int Date::year() const {
  int y, m, d;
  civil_from_days(serial, y, m, d);
  return y;
}
int Date::month() const {
  int y, m, d;
  civil_from_days(serial, y, m, d);
  return m;
}
int Date::day() const {
  int y, m, d;
  civil_from_days(serial, y, m, d);
  return d;
}

Season season_of(const Date& date) {
  switch (date.month()) {
    case 12: case 1: case 2: return Season::Winter;
    case 3: case 4: case 5: return Season::Spring;
    case 6: case 7: case 8: return Season::Summer;
    default: return Season::Autumn;
  }
}

std::string season_name(Season s) {
  switch (s) {
    case Season::Winter: return "Winter";
    case Season::Spring: return "Spring";
    case Season::Summer: return "Summer";
    case Season::Autumn: return "Autumn";
  }
  return "?";
}

std::optional<Season> season_from_string(const std::string& name) {
  for (Season s : {Season::Winter, Season::Spring, Season::Summer, Season::Autumn})
    if (season_name(s) == name) return s;
  return std::nullopt;
}

int ModelSpec::column_index(const std::string& name) const {
  for (int j = 0; j < p(); ++j)
    if (columns[j].name == name) return j;
  return -1;
}

void ModelSpec::validate() const {
  if (response.empty()) throw InputError("model spec: response column is not set");
  int intercepts = 0;
  for (const Column& c : columns) {
    if (c.kind == Column::Kind::Intercept) ++intercepts;
    if (c.kind == Column::Kind::Interaction && column_index(c.base) < 0)
      throw InputError("interaction column '" + c.name + "' references unknown base '" +
                       c.base + "'");
  }
  if (intercepts != 1)
    throw InputError("model spec must contain exactly one intercept column");
  for (std::size_t i = 0; i < columns.size(); ++i)
    for (std::size_t j = i + 1; j < columns.size(); ++j)
      if (columns[i].name == columns[j].name)
        throw InputError("duplicate design column '" + columns[i].name + "'");
}

ModelSpec ModelSpec::build(const std::string& response,
                           const std::vector<std::string>& continuous,
                           const std::vector<std::string>& binary,
                           const std::vector<std::string>& interaction_bases,
                           KernelFamily kernel, std::optional<RainRule> rain) {
  ModelSpec spec;
  spec.response = response;
  spec.kernel = kernel;
  spec.rain = std::move(rain);
  spec.columns.push_back({"(Intercept)", Column::Kind::Intercept, "", Season::Winter});
  for (const std::string& name : continuous)
    spec.columns.push_back({name, Column::Kind::Continuous, "", Season::Winter});
  for (const std::string& name : binary)
    spec.columns.push_back({name, Column::Kind::Binary, "", Season::Winter});
  // Autumn is the baseline level, so only the other three get columns.
  for (const std::string& base : interaction_bases)
    for (Season s : {Season::Winter, Season::Summer, Season::Spring})
      spec.columns.push_back({base + ":" + season_name(s), Column::Kind::Interaction, base, s});
  spec.validate();
  return spec;
}

bool ObservationPanel::cell_complete(int i, int t) const {
  if (!std::isfinite(y(i, t))) return false;
  for (int j = 0; j < p(); ++j)
    if (!std::isfinite(x[t](i, j))) return false;
  return true;
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> ObservationPanel::complete_mask() const {
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask(n(), T());
  for (int t = 0; t < T(); ++t)
    for (int i = 0; i < n(); ++i) mask(i, t) = cell_complete(i, t);
  return mask;
}

void ObservationPanel::validate() const {
  const int n_ = n(), T_ = T(), p_ = p();
  if (n_ < 1) throw InputError("panel has no stations");
  if (T_ < 1) throw InputError("panel has no dates");
  sites.validate();
  if (sites.size() != n_) throw InputError("panel sites do not match station count");
  if (y.rows() != n_ || y.cols() != T_) throw InputError("panel response has wrong shape");
  if (static_cast<int>(x.size()) != T_) throw InputError("panel design has wrong length");
  for (const Eigen::MatrixXd& xt : x)
    if (xt.rows() != n_ || xt.cols() != p_) throw InputError("panel design block has wrong shape");
  for (int t = 1; t < T_; ++t)
    if (dates[t].serial != dates[t - 1].serial + 1)
      throw InputError("panel dates are not contiguous at " + dates[t].to_string());
}

Eigen::MatrixXd build_design_row_block(
    const ModelSpec& spec, const Date& date,
    const std::map<std::string, Eigen::VectorXd>& raw_columns, int rows) {
  const Season season = season_of(date);
  Eigen::MatrixXd block(rows, spec.p());

  auto raw = [&](const std::string& name) -> const Eigen::VectorXd& {
    auto it = raw_columns.find(name);
    if (it == raw_columns.end())
      throw InputError("column '" + name + "' referenced by the model is missing from the input");
    return it->second;
  };

  for (int j = 0; j < spec.p(); ++j) {
    const Column& c = spec.columns[j];
    switch (c.kind) {
      case Column::Kind::Intercept:
        block.col(j).setOnes();
        break;
      case Column::Kind::Continuous:
        block.col(j) = raw(c.name);
        break;
      case Column::Kind::Binary: {
        if (spec.rain && c.name == spec.rain->name &&
            raw_columns.find(c.name) == raw_columns.end()) {
          const Eigen::VectorXd& prec = raw(spec.rain->source);
          for (int i = 0; i < rows; ++i)
            block(i, j) = std::isfinite(prec(i))
                              ? (prec(i) > spec.rain->threshold_mm ? 1.0 : 0.0)
                              : std::nan("");
        } else {
          block.col(j) = raw(c.name);
        }
        break;
      }
      case Column::Kind::Interaction: {
        const Eigen::VectorXd& base = raw(c.base);
        const double on = (season == c.level) ? 1.0 : 0.0;
        for (int i = 0; i < rows; ++i)
          block(i, j) = std::isfinite(base(i)) ? base(i) * on : std::nan("");
        break;
      }
    }
  }
  return block;
}

StandardizedPanel standardize(const ObservationPanel& panel, const ModelSpec& spec) {
  panel.validate();
  const int n = panel.n(), T = panel.T(), p = panel.p();
  if (p != spec.p()) throw InputError("panel design does not match the model spec");

  StandardizedPanel out;
  out.moments.mean = Eigen::VectorXd::Zero(p);
  out.moments.std = Eigen::VectorXd::Ones(p);

  for (int j = 0; j < p; ++j) {
    if (!spec.columns[j].standardized()) continue;
    double s = 0.0, ss = 0.0;
    long cnt = 0;
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < n; ++i) {
        const double v = panel.x[t](i, j);
        if (std::isfinite(v)) {
          s += v;
          ss += v * v;
          ++cnt;
        }
      }
    if (cnt == 0)
      throw InputError("column '" + spec.columns[j].name + "' has no observed entries");
    const double mean = s / static_cast<double>(cnt);
    const double var = ss / static_cast<double>(cnt) - mean * mean;
    if (!(var > 0.0))
      throw InputError("column '" + spec.columns[j].name +
                       "' has zero variance and cannot be standardized");
    out.moments.mean(j) = mean;
    out.moments.std(j) = std::sqrt(var);
  }

  {
    double s = 0.0, ss = 0.0;
    long cnt = 0;
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < n; ++i) {
        const double v = panel.y(i, t);
        if (std::isfinite(v)) {
          s += v;
          ss += v * v;
          ++cnt;
        }
      }
    if (cnt == 0) throw InputError("response has no observed entries");
    const double mean = s / static_cast<double>(cnt);
    const double var = ss / static_cast<double>(cnt) - mean * mean;
    if (!(var > 0.0)) throw InputError("response has zero variance");
    out.moments.response_mean = mean;
    out.moments.response_std = std::sqrt(var);
  }

  out.y = (panel.y.array() - out.moments.response_mean) / out.moments.response_std;
  out.x.resize(T);
  for (int t = 0; t < T; ++t) {
    out.x[t] = panel.x[t];
    for (int j = 0; j < p; ++j) {
      if (!spec.columns[j].standardized()) continue;
      out.x[t].col(j) =
          (panel.x[t].col(j).array() - out.moments.mean(j)) / out.moments.std(j);
    }
  }
  return out;
}

Eigen::MatrixXd destandardize_response(const Eigen::MatrixXd& y_std, const Moments& m) {
  Eigen::MatrixXd out(y_std.rows(), y_std.cols());
  kernels::scale_shift(out.data(), y_std.data(), static_cast<std::size_t>(y_std.size()),
                       m.response_std, m.response_mean);
  return out;
}

Eigen::MatrixXd apply_moments_design(const Eigen::MatrixXd& x_block, const ModelSpec& spec,
                                     const Moments& m) {
  if (x_block.cols() != spec.p() || m.mean.size() != spec.p())
    throw InputError("design block does not match the model spec");
  Eigen::MatrixXd out = x_block;
  const std::size_t rows = static_cast<std::size_t>(x_block.rows());
  for (int j = 0; j < spec.p(); ++j) {
    if (!spec.columns[j].standardized()) continue;
    kernels::shift_scale(out.col(j).data(), x_block.col(j).data(), rows, m.mean(j),
                         1.0 / m.std(j));
  }
  return out;
}

}  // namespace hdgm
