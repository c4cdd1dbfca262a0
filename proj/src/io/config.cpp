#include "hdgm/io/config.hpp"

#include <fstream>
#include <json.hpp>

namespace hdgm::io {

namespace {

using nlohmann::json;

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path.string() + "'");
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw InputError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

ScenarioWindow parse_window(const json& j) {
  ScenarioWindow w;
  if (j.contains("season")) {
    const auto s = season_from_string(j["season"].get<std::string>());
    if (!s) throw InputError("unknown season '" + j["season"].get<std::string>() + "'");
    w.season = s;
  }
  if (j.contains("from")) w.from = Date::from_string(j["from"].get<std::string>());
  if (j.contains("to")) w.to = Date::from_string(j["to"].get<std::string>());
  return w;
}

MaskRule parse_mask(const json& j) {
  MaskRule m;
  if (j.contains("max_altitude")) m.max_altitude = j["max_altitude"].get<double>();
  m.exclude_forest = j.value("exclude_forest", false);
  if (j.contains("provinces")) m.provinces = j["provinces"].get<std::vector<std::string>>();
  if (j.contains("land_types")) m.land_types = j["land_types"].get<std::vector<std::string>>();
  return m;
}

}  // namespace

ModelSpec RunConfig::model_spec() const {
  return ModelSpec::build(response, continuous, binary, interactions,
                          kernel_family_from_string(kernel), rain);
}

std::vector<ScenarioSpec> RunConfig::scenario_specs() const {
  std::vector<ScenarioSpec> out;
  for (const ScenarioEntry& e : scenarios) {
    ScenarioSpec s;
    s.name = e.name;
    s.target = e.target;
    s.r = e.reduction;
    s.window = window;
    s.mask = mask;
    s.aggregate_by = aggregate_by;
    out.push_back(std::move(s));
  }
  return out;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const json j = read_json(path);
  RunConfig cfg;
  try {
    cfg.response = j.value("response", cfg.response);
    if (j.contains("model")) {
      const json& m = j["model"];
      if (m.contains("covariates"))
        cfg.continuous = m["covariates"].get<std::vector<std::string>>();
      if (m.contains("binary")) cfg.binary = m["binary"].get<std::vector<std::string>>();
      if (m.contains("interactions"))
        cfg.interactions = m["interactions"].get<std::vector<std::string>>();
      cfg.kernel = m.value("kernel", cfg.kernel);
    }
    if (j.contains("rain")) {
      RainRule rule;
      rule.source = j["rain"].at("from").get<std::string>();
      rule.name = j["rain"].value("name", rule.name);
      rule.threshold_mm = j["rain"].value("threshold_mm", rule.threshold_mm);
      if (rule.threshold_mm < 0.0) throw InputError("rain threshold must be >= 0");
      cfg.rain = rule;
    }
    if (j.contains("em")) {
      const json& em = j["em"];
      cfg.em.max_iter = em.value("max_iter", cfg.em.max_iter);
      cfg.em.tol = em.value("tol", cfg.em.tol);
      cfg.em.seed = em.value("seed", cfg.em.seed);
      if (cfg.em.max_iter < 1) throw InputError("em.max_iter must be >= 1");
      if (!(cfg.em.tol > 0.0)) throw InputError("em.tol must be > 0");
    }
    if (j.contains("scenarios")) {
      for (const json& s : j["scenarios"]) {
        RunConfig::ScenarioEntry e;
        e.name = s.at("name").get<std::string>();
        e.target = s.at("target").get<std::string>();
        e.reduction = s.at("reduction").get<double>();
        if (!(e.reduction >= 0.0 && e.reduction <= 1.0))
          throw InputError("scenario '" + e.name + "' reduction must be in [0, 1]");
        cfg.scenarios.push_back(std::move(e));
      }
    }
    if (j.contains("window")) cfg.window = parse_window(j["window"]);
    if (j.contains("mask")) cfg.mask = parse_mask(j["mask"]);
    if (j.contains("aggregate_by"))
      cfg.aggregate_by = j["aggregate_by"].get<std::vector<std::string>>();
    if (j.contains("diagnostics")) {
      const json& d = j["diagnostics"];
      cfg.acf_max_lag = d.value("acf_max_lag", cfg.acf_max_lag);
      cfg.vario_bins = d.value("vario_bins", cfg.vario_bins);
      cfg.vario_lags = d.value("vario_lags", cfg.vario_lags);
    }
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
  } catch (const json::exception& e) {
    throw InputError("config '" + path.string() + "' is malformed: " + e.what());
  }
  return cfg;
}

SimSpec load_sim_config(const std::filesystem::path& path) {
  const json j = read_json(path);
  SimSpec spec;
  try {
    if (j.contains("sites")) {
      const json& s = j["sites"];
      if (s.contains("list")) {
        SiteSet set;
        for (const json& site : s["list"]) {
          set.sites.push_back({site.at("lat").get<double>(), site.at("lon").get<double>()});
          if (site.contains("id")) set.labels.push_back(site["id"].get<std::string>());
        }
        spec.sites = set;
      } else {
        SiteBox box;
        box.count = s.value("count", box.count);
        if (s.contains("lat_range")) {
          box.lat_min = s["lat_range"][0].get<double>();
          box.lat_max = s["lat_range"][1].get<double>();
        }
        if (s.contains("lon_range")) {
          box.lon_min = s["lon_range"][0].get<double>();
          box.lon_max = s["lon_range"][1].get<double>();
        }
        spec.sites = box;
      }
    }
    spec.T = j.value("T", spec.T);
    if (j.contains("start_date"))
      spec.start_date = Date::from_string(j["start_date"].get<std::string>());
    if (j.contains("beta")) {
      const auto v = j["beta"].get<std::vector<double>>();
      spec.beta = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<int>(v.size()));
    }
    spec.alpha = j.value("alpha", spec.alpha);
    spec.g = j.value("g", spec.g);
    spec.theta = j.value("theta", spec.theta);
    if (j.contains("sigma2")) {
      const json& s = j["sigma2"];
      const std::string type = s.value("type", "constant");
      if (type == "constant") {
        spec.sigma2 = SkedasticConstant{s.value("value", 1.0)};
      } else if (type == "sinusoidal") {
        SkedasticSinusoidal sk;
        sk.base = s.value("base", sk.base);
        sk.amplitude = s.value("amplitude", sk.amplitude);
        sk.period = s.value("period", sk.period);
        spec.sigma2 = sk;
      } else if (type == "explicit") {
        const auto v = s.at("values").get<std::vector<double>>();
        SkedasticExplicit sk;
        sk.values = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<int>(v.size()));
        spec.sigma2 = sk;
      } else {
        throw InputError("unknown sigma2 profile type '" + type + "'");
      }
    }
    if (j.contains("missing")) {
      const json& s = j["missing"];
      const std::string type = s.value("type", "none");
      if (type == "none") {
        spec.missing = MissingNone{};
      } else if (type == "uniform") {
        spec.missing = MissingUniform{s.value("rate", 0.1)};
      } else if (type == "blocks") {
        spec.missing = MissingBlocks{s.value("length", 10)};
      } else {
        throw InputError("unknown missing mechanism '" + type + "'");
      }
    }
    spec.stationary_init = j.value("stationary_init", true);
    spec.seed = j.value("seed", spec.seed);
    if (j.contains("covariate_names"))
      spec.covariate_names = j["covariate_names"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw InputError("sim config '" + path.string() + "' is malformed: " + e.what());
  }
  spec.validate();
  return spec;
}

}  // namespace hdgm::io
