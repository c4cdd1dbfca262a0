#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hdgm/errors.hpp"
#include "hdgm/geo.hpp"

namespace hdgm {

// Calendar date handled as days since 1970-01-01; panels use a contiguous
// daily axis.
struct Date {
  int serial = 0;

  static Date from_string(const std::string& iso);  // "YYYY-MM-DD"
  static Date from_ymd(int y, int m, int d);
  std::string to_string() const;
  int year() const;
  int month() const;
  int day() const;

  auto operator<=>(const Date&) const = default;
  Date operator+(int days) const { return Date{serial + days}; }
  int operator-(const Date& o) const { return serial - o.serial; }
};

enum class Season { Winter, Spring, Summer, Autumn };
Season season_of(const Date& d);  // meteorological mapping, Dec-Feb = Winter
std::string season_name(Season s);
std::optional<Season> season_from_string(const std::string& name);

// One column of the model design matrix.
struct Column {
  enum class Kind : std::uint8_t {
    Intercept,    // all ones, never standardized
    Continuous,   // standardized
    Binary,       // passed through unchanged
    Interaction,  // base * season indicator, standardized
  };
  std::string name;
  Kind kind = Kind::Continuous;
  std::string base;    // interaction only: base column name
  Season level = Season::Winter;  // interaction only

  bool standardized() const {
    return kind == Kind::Continuous || kind == Kind::Interaction;
  }
};

struct RainRule {
  std::string source;  // precipitation column in the input file
  std::string name = "Rain";
  double threshold_mm = 1.0;  // Rain = 1 iff precipitation strictly exceeds it
};

// The model formula: which columns enter the regression and how grid or panel
// files are turned into the design matrix. Self-contained so that a saved fit
// can ingest new grids without the original config.
struct ModelSpec {
  std::string response;
  std::vector<Column> columns;  // Intercept first
  KernelFamily kernel = KernelFamily::Exponential;
  std::optional<RainRule> rain;

  int p() const { return static_cast<int>(columns.size()); }
  int column_index(const std::string& name) const;  // -1 when absent
  void validate() const;

  // Builds the full column list from base declarations. `interactions` pairs
  // each base covariate with the season indicator levels (Autumn baseline).
  static ModelSpec build(const std::string& response,
                         const std::vector<std::string>& continuous,
                         const std::vector<std::string>& binary,
                         const std::vector<std::string>& interaction_bases,
                         KernelFamily kernel, std::optional<RainRule> rain);
};

// Per-column standardization moments plus the response moments.
struct Moments {
  Eigen::VectorXd mean;  // p, zero for pass-through columns
  Eigen::VectorXd std;   // p, one for pass-through columns
  double response_mean = 0.0;
  double response_std = 1.0;
};

// Station x time panel in original units. NaN marks a missing value; a cell
// participates in the likelihood only when the response and every design
// column are present.
struct ObservationPanel {
  std::vector<std::string> station_ids;
  SiteSet sites;
  std::vector<Date> dates;            // contiguous, ascending
  Eigen::MatrixXd y;                  // n x T
  std::vector<Eigen::MatrixXd> x;     // T matrices, n x p
  std::vector<std::string> column_names;

  // optional station metadata
  std::vector<double> altitude;
  std::vector<std::string> province;
  std::vector<std::string> land_type;

  int n() const { return static_cast<int>(station_ids.size()); }
  int T() const { return static_cast<int>(dates.size()); }
  int p() const { return static_cast<int>(column_names.size()); }

  bool cell_complete(int i, int t) const;  // response and design row finite
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> complete_mask() const;
  void validate() const;
};

// Derives the design columns demanded by `spec` (intercept, rain indicator,
// season interactions) from raw input columns. Shared by panel and grid
// ingestion.
Eigen::MatrixXd build_design_row_block(
    const ModelSpec& spec, const Date& date,
    const std::map<std::string, Eigen::VectorXd>& raw_columns, int rows);

// standardize: returns a copy of the panel design/response transformed to
// zero mean, unit variance per flagged column, plus the moments used.
// Throws InputError naming any flagged column with zero variance.
struct StandardizedPanel {
  Eigen::MatrixXd y;               // n x T, standardized response
  std::vector<Eigen::MatrixXd> x;  // standardized design
  Moments moments;
};
StandardizedPanel standardize(const ObservationPanel& panel, const ModelSpec& spec);

// Inverse of the response transform: y_original = y_std * std + mean.
Eigen::MatrixXd destandardize_response(const Eigen::MatrixXd& y_std, const Moments& m);

// Applies previously computed moments to a design block (used for grids and
// for re-standardizing counterfactual covariates with training moments).
Eigen::MatrixXd apply_moments_design(const Eigen::MatrixXd& x_block, const ModelSpec& spec,
                                     const Moments& m);

}  // namespace hdgm
