#include "hdgm/io/artifact.hpp"

#include <fstream>
#include <json.hpp>

#include "hdgm/io/csv.hpp"

namespace hdgm::io {

namespace {

using nlohmann::json;

constexpr int kMajorVersion = 1;
constexpr int kMinorVersion = 0;

json vec_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vec_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = j[i].get<double>();
  return v;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::MatrixXd mat_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  return m;
}

std::string kind_name(Column::Kind k) {
  switch (k) {
    case Column::Kind::Intercept: return "intercept";
    case Column::Kind::Continuous: return "continuous";
    case Column::Kind::Binary: return "binary";
    case Column::Kind::Interaction: return "interaction";
  }
  return "continuous";
}

Column::Kind kind_from_name(const std::string& s) {
  if (s == "intercept") return Column::Kind::Intercept;
  if (s == "continuous") return Column::Kind::Continuous;
  if (s == "binary") return Column::Kind::Binary;
  if (s == "interaction") return Column::Kind::Interaction;
  throw InputError("unknown column kind '" + s + "' in fit artifact");
}

}  // namespace

void save_fit(const std::filesystem::path& path, const FitResult& fit) {
  json j;
  j["format"] = "hdgm-fit";
  j["version"] = {{"major", kMajorVersion}, {"minor", kMinorVersion}};

  json spec;
  spec["response"] = fit.spec.response;
  spec["kernel"] = kernel_family_to_string(fit.spec.kernel);
  if (fit.spec.rain) {
    spec["rain"] = {{"source", fit.spec.rain->source},
                    {"name", fit.spec.rain->name},
                    {"threshold_mm", fit.spec.rain->threshold_mm}};
  }
  json cols = json::array();
  for (const Column& c : fit.spec.columns) {
    json jc;
    jc["name"] = c.name;
    jc["kind"] = kind_name(c.kind);
    if (c.kind == Column::Kind::Interaction) {
      jc["base"] = c.base;
      jc["level"] = season_name(c.level);
    }
    cols.push_back(std::move(jc));
  }
  spec["columns"] = std::move(cols);
  j["spec"] = std::move(spec);

  json stations;
  stations["ids"] = fit.station_ids;
  json lat = json::array(), lon = json::array();
  for (const Site& s : fit.sites.sites) {
    lat.push_back(s.lat);
    lon.push_back(s.lon);
  }
  stations["lat"] = std::move(lat);
  stations["lon"] = std::move(lon);
  j["stations"] = std::move(stations);

  j["dates"] = {{"start", fit.dates.front().to_string()},
                {"count", static_cast<int>(fit.dates.size())}};

  json params;
  params["beta"] = vec_to_json(fit.params.beta);
  params["alpha"] = fit.params.alpha;
  params["g"] = fit.params.g;
  params["theta"] = fit.params.theta;
  params["sigma2"] = vec_to_json(fit.params.sigma2);
  params["mu0"] = vec_to_json(fit.params.mu0);
  params["sigma0"] = mat_to_json(fit.params.sigma0);
  params["moments"] = {{"mean", vec_to_json(fit.params.moments.mean)},
                       {"std", vec_to_json(fit.params.moments.std)},
                       {"response_mean", fit.params.moments.response_mean},
                       {"response_std", fit.params.moments.response_std}};
  j["params"] = std::move(params);

  json report;
  report["iterations"] = fit.report.iterations;
  report["converged"] = fit.report.converged;
  report["criterion"] = fit.report.criterion;
  report["loglik_trace"] = fit.report.loglik_trace;
  report["sigma_beta"] = mat_to_json(fit.report.sigma_beta);
  report["rmse_insample"] = fit.report.rmse_insample;
  report["safeguard_activations"] = fit.report.safeguard_activations;
  j["report"] = std::move(report);

  j["z_smooth"] = mat_to_json(fit.z_smooth);

  atomic_write(path, j.dump(1));
}

FitResult load_fit(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open fit artifact '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("fit artifact '" + path.string() + "' is not valid JSON: " + e.what());
  }

  try {
    if (j.value("format", "") != "hdgm-fit")
      throw InputError("'" + path.string() + "' is not a fit artifact");
    const int major = j.at("version").at("major").get<int>();
    if (major != kMajorVersion)
      throw InputError("fit artifact major version " + std::to_string(major) +
                       " is not supported (expected " + std::to_string(kMajorVersion) + ")");

    FitResult fit;
    const json& spec = j.at("spec");
    fit.spec.response = spec.at("response").get<std::string>();
    fit.spec.kernel = kernel_family_from_string(spec.at("kernel").get<std::string>());
    if (spec.contains("rain")) {
      RainRule rule;
      rule.source = spec["rain"].at("source").get<std::string>();
      rule.name = spec["rain"].at("name").get<std::string>();
      rule.threshold_mm = spec["rain"].at("threshold_mm").get<double>();
      fit.spec.rain = rule;
    }
    for (const json& jc : spec.at("columns")) {
      Column c;
      c.name = jc.at("name").get<std::string>();
      c.kind = kind_from_name(jc.at("kind").get<std::string>());
      if (c.kind == Column::Kind::Interaction) {
        c.base = jc.at("base").get<std::string>();
        const auto lvl = season_from_string(jc.at("level").get<std::string>());
        if (!lvl) throw InputError("bad interaction level in fit artifact");
        c.level = *lvl;
      }
      fit.spec.columns.push_back(std::move(c));
    }
    fit.spec.validate();

    const json& st = j.at("stations");
    fit.station_ids = st.at("ids").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < fit.station_ids.size(); ++i) {
      fit.sites.sites.push_back(
          {st.at("lat")[i].get<double>(), st.at("lon")[i].get<double>()});
      fit.sites.labels.push_back(fit.station_ids[i]);
    }

    const Date start = Date::from_string(j.at("dates").at("start").get<std::string>());
    const int count = j.at("dates").at("count").get<int>();
    for (int t = 0; t < count; ++t) fit.dates.push_back(start + t);

    const json& params = j.at("params");
    fit.params.beta = vec_from_json(params.at("beta"));
    fit.params.alpha = params.at("alpha").get<double>();
    fit.params.g = params.at("g").get<double>();
    fit.params.theta = params.at("theta").get<double>();
    fit.params.sigma2 = vec_from_json(params.at("sigma2"));
    fit.params.mu0 = vec_from_json(params.at("mu0"));
    fit.params.sigma0 = mat_from_json(params.at("sigma0"));
    fit.params.moments.mean = vec_from_json(params.at("moments").at("mean"));
    fit.params.moments.std = vec_from_json(params.at("moments").at("std"));
    fit.params.moments.response_mean = params.at("moments").at("response_mean").get<double>();
    fit.params.moments.response_std = params.at("moments").at("response_std").get<double>();

    const json& report = j.at("report");
    fit.report.iterations = report.at("iterations").get<int>();
    fit.report.converged = report.at("converged").get<bool>();
    fit.report.criterion = report.at("criterion").get<double>();
    fit.report.loglik_trace = report.at("loglik_trace").get<std::vector<double>>();
    fit.report.sigma_beta = mat_from_json(report.at("sigma_beta"));
    fit.report.rmse_insample = report.at("rmse_insample").get<double>();
    fit.report.safeguard_activations = report.at("safeguard_activations").get<int>();

    fit.z_smooth = mat_from_json(j.at("z_smooth"));
    return fit;
  } catch (const json::exception& e) {
    throw InputError("fit artifact '" + path.string() + "' is malformed: " + e.what());
  }
}

}  // namespace hdgm::io
