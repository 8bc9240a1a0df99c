#pragma once

#include <optional>
#include <string>
#include <vector>

#include "compadre/core.hpp"
#include "compadre/types.hpp"

namespace compadre {

/// Numeric table with a header row; no missing cells allowed.
struct Table {
  std::vector<std::string> names;
  Matrix values;

  Index n_rows() const { return values.rows(); }
  std::optional<Index> column(const std::string& name) const;
};

Table read_csv(const std::string& path);
void write_csv(const std::string& path, const Table& table);

/// Full-precision decimal text for a double (round-trips exactly).
std::string format_double(double v);

/// Flat key=value run configuration ('#' starts a comment).
struct RunConfig {
  FitConfig fit;
  std::vector<std::string> response_columns;
  std::vector<std::string> covariate_columns;
  bool center_responses = true;
  bool scale_responses = false;
};

RunConfig parse_config(const std::string& path);

/// Everything needed to reproduce predictions from a fit.
struct ModelArchive {
  int format_version = 1;
  FitMode mode = FitMode::CoMPAdRe;
  std::vector<std::string> response_names;
  std::vector<std::string> covariate_names;
  Vector response_centers;  // applied before fitting
  Vector response_scales;
  FitReport report;
};

void save_archive(const std::string& path, const ModelArchive& archive);
ModelArchive load_archive(const std::string& path);

/// Predictions mapped back to the original response scale.
Matrix archive_predict(const ModelArchive& archive, const Matrix& X_new);

struct NetworkEdge {
  Index a = 0, b = 0;
  double weight = 0.0;  // partial correlation -sigma_ab / sqrt(sigma_aa sigma_bb)
};

struct NetworkExport {
  std::vector<std::string> nodes;
  std::vector<NetworkEdge> edges;
};

NetworkExport precision_network(const Matrix& precision,
                                const std::vector<std::string>& names);
std::string network_dot(const NetworkExport& net);
std::string network_json(const NetworkExport& net);

}  // namespace compadre
