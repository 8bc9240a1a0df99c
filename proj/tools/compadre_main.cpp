#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "compadre/core.hpp"
#include "compadre/io.hpp"
#include "compadre/simulation.hpp"

namespace {

using namespace compadre;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

Matrix select_columns(const Table& table, const std::vector<std::string>& names) {
  Matrix out(table.n_rows(), static_cast<Index>(names.size()));
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto col = table.column(names[i]);
    if (!col) throw ParseError("column '" + names[i] + "' not found in the data");
    out.col(static_cast<Index>(i)) = table.values.col(*col);
  }
  return out;
}

const char* label_text(EffectType e) {
  switch (e) {
    case EffectType::Null: return "N";
    case EffectType::Linear: return "L";
    case EffectType::Nonlinear: return "NL";
  }
  return "?";
}

void print_selection_table(const FitReport& report,
                           const std::vector<std::string>& responses,
                           const std::vector<std::string>& covariates) {
  std::size_t width = 8;
  for (const auto& c : covariates) width = std::max(width, c.size() + 1);
  std::printf("%-16s", "response");
  for (const auto& c : covariates) std::printf("%*s", static_cast<int>(width), c.c_str());
  std::printf("\n");
  for (Index q = 0; q < report.labels.Q; ++q) {
    std::printf("%-16s", responses[q].c_str());
    for (Index j = 0; j < report.labels.p; ++j) {
      std::printf("%*s", static_cast<int>(width), label_text(report.labels.at(j, q)));
    }
    std::printf("\n");
  }
}

int cmd_fit(const std::string& data_path, const std::string& config_path,
            const std::string& out_path) {
  const Table table = read_csv(data_path);
  RunConfig rc = parse_config(config_path);
  if (rc.response_columns.empty() || rc.covariate_columns.empty()) {
    throw ParseError("config must list response and covariate columns");
  }
  const Matrix y_raw = select_columns(table, rc.response_columns);
  const Matrix x = select_columns(table, rc.covariate_columns);
  const auto q = static_cast<Index>(rc.response_columns.size());

  ModelArchive archive;
  archive.response_names = rc.response_columns;
  archive.covariate_names = rc.covariate_columns;
  archive.response_centers = Vector::Zero(q);
  archive.response_scales = Vector::Ones(q);
  Matrix y = y_raw;
  for (Index c = 0; c < q; ++c) {
    if (rc.center_responses) archive.response_centers[c] = y.col(c).mean();
    if (rc.scale_responses) {
      const double sd = std::sqrt(
          (y.col(c).array() - y.col(c).mean()).square().sum() /
          static_cast<double>(std::max<Index>(y.rows() - 1, 1)));
      if (sd > 0) archive.response_scales[c] = sd;
    }
    y.col(c) = (y.col(c).array() - archive.response_centers[c]) /
               archive.response_scales[c];
  }

  // broadcast scalar lambda overrides across responses
  if (rc.fit.lambda1 && rc.fit.lambda1->size() == 1) {
    rc.fit.lambda1 = Vector::Constant(q, (*rc.fit.lambda1)[0]);
  }
  if (rc.fit.lambda2 && rc.fit.lambda2->size() == 1) {
    rc.fit.lambda2 = Vector::Constant(q, (*rc.fit.lambda2)[0]);
  }

  archive.report = fit(y, x, rc.fit);
  archive.mode = archive.report.mode;
  save_archive(out_path, archive);

  print_selection_table(archive.report, rc.response_columns, rc.covariate_columns);
  std::printf("mode=%s iterations=%d converged=%s final_mse=%s\n",
              archive.mode == FitMode::CoMPAdRe ? "CoMPAdRe" : "PAdRe",
              archive.report.iterations,
              archive.report.converged ? "yes" : "no",
              format_double(archive.report.mse_trace.back()).c_str());
  std::printf("archive written to %s\n", out_path.c_str());
  return kExitOk;
}

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out_path) {
  const ModelArchive archive = load_archive(model_path);
  const Table table = read_csv(data_path);
  const Matrix x = select_columns(table, archive.covariate_names);
  const Matrix pred = archive_predict(archive, x);

  Table out;
  for (const auto& name : archive.response_names) out.names.push_back("pred_" + name);
  out.values = pred;
  write_csv(out_path, out);
  return kExitOk;
}

int cmd_simulate(const SimSetting& setting, int reps,
                 const std::vector<std::string>& method_names,
                 const std::string& out_dir, int threads,
                 const FitConfig& fit_config) {
  std::vector<Method> methods;
  for (const auto& name : method_names) {
    if (name == "compadre") {
      methods.push_back(Method::CoMPAdRe);
    } else if (name == "padre") {
      methods.push_back(Method::PAdRe);
    } else if (name == "lasso") {
      methods.push_back(Method::Lasso);
    } else {
      throw ParseError("unknown method '" + name + "'");
    }
  }
  if (methods.empty()) throw ParseError("no methods requested");
  if (reps < 1) throw ParseError("reps must be >= 1");

  const auto cells = run_cell(setting, reps, methods, fit_config, threads);
  std::filesystem::create_directories(out_dir);

  const std::string design_name =
      setting.design == SimDesign::Sparse ? "sparse" : "shape";
  const std::string shape_name = "f" + std::to_string(static_cast<int>(setting.shape));
  const auto setting_prefix = [&]() {
    std::string s;
    s += std::to_string(setting.n) + "," + std::to_string(setting.p) + "," +
         std::to_string(setting.Q) + "," + format_double(setting.rho) + "," +
         format_double(setting.delta) + "," + design_name + "," + shape_name +
         "," + std::to_string(setting.seed);
    return s;
  }();

  {
    std::ofstream out(out_dir + "/replicates.csv");
    if (!out) throw Error("cannot write " + out_dir + "/replicates.csv");
    out << "n,p,q,rho,delta,design,shape,seed,rep,method,tpr,fpr,mad\n";
    for (int r = 0; r < reps; ++r) {
      for (const auto& cell : cells) {
        const Scores& sc = cell.replicates[r];
        out << setting_prefix << ',' << r << ',' << method_name(cell.method)
            << ',' << (sc.tpr_defined ? format_double(sc.tpr) : "") << ','
            << format_double(sc.fpr) << ',' << format_double(sc.mad) << '\n';
      }
    }
  }
  {
    std::ofstream out(out_dir + "/aggregate.csv");
    if (!out) throw Error("cannot write " + out_dir + "/aggregate.csv");
    out << "n,p,q,rho,delta,design,shape,seed,method,reps,median_tpr,iqr_tpr,"
           "median_fpr,iqr_fpr,median_mad,iqr_mad,mad_ratio_vs_padre\n";
    const CellResult* padre = nullptr;
    for (const auto& cell : cells) {
      if (cell.method == Method::PAdRe) padre = &cell;
    }
    for (const auto& cell : cells) {
      out << setting_prefix << ',' << method_name(cell.method) << ',' << reps
          << ',' << format_double(cell.median_tpr) << ','
          << format_double(cell.iqr_tpr) << ',' << format_double(cell.median_fpr)
          << ',' << format_double(cell.iqr_fpr) << ','
          << format_double(cell.median_mad) << ',' << format_double(cell.iqr_mad)
          << ','
          << (padre != nullptr ? format_double(mad_ratio(cell, *padre)) : "")
          << '\n';
    }
  }

  for (const auto& cell : cells) {
    std::printf(
        "%-9s median TPR %.3f (IQR %.3f)  median FPR %.3f (IQR %.3f)  "
        "median MAD %.4f\n",
        method_name(cell.method).c_str(), cell.median_tpr, cell.iqr_tpr,
        cell.median_fpr, cell.iqr_fpr, cell.median_mad);
  }
  std::printf("wrote %s/replicates.csv and %s/aggregate.csv\n", out_dir.c_str(),
              out_dir.c_str());
  return kExitOk;
}

int cmd_export_network(const std::string& model_path, const std::string& format,
                       const std::string& out_path) {
  const ModelArchive archive = load_archive(model_path);
  const NetworkExport net = precision_network(
      archive.report.state.precision.precision, archive.response_names);
  std::string payload;
  if (format == "dot") {
    payload = network_dot(net);
  } else if (format == "json") {
    payload = network_json(net);
  } else {
    throw ParseError("unknown network format '" + format + "'");
  }
  std::ofstream out(out_path);
  if (!out) throw Error("cannot write " + out_path);
  out << payload;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Multivariate penalized additive regression: joint selection of "
      "null/linear/nonlinear covariate effects with a sparse response "
      "precision matrix"};
  app.require_subcommand(1);

  std::string data_path, config_path, model_path, out_path, format = "dot";
  std::string out_dir = ".";
  int reps = 50, threads = 1;
  std::vector<std::string> methods = {"compadre", "padre"};
  SimSetting setting;
  double shape_id = 1;
  std::string design = "sparse";
  FitConfig sim_fit;

  auto* fit_cmd = app.add_subcommand("fit", "fit a model to a CSV dataset");
  fit_cmd->add_option("--data", data_path, "input CSV")->required();
  fit_cmd->add_option("--config", config_path, "key=value run configuration")->required();
  fit_cmd->add_option("--out", out_path, "output model archive (JSON)")->required();

  auto* pred_cmd = app.add_subcommand("predict", "predict responses for new rows");
  pred_cmd->add_option("--model", model_path, "model archive")->required();
  pred_cmd->add_option("--data", data_path, "input CSV")->required();
  pred_cmd->add_option("--out", out_path, "output CSV of predictions")->required();

  auto* sim_cmd = app.add_subcommand("simulate", "benchmark methods on synthetic data");
  sim_cmd->add_option("--n", setting.n, "sample size");
  sim_cmd->add_option("--p", setting.p, "covariates");
  sim_cmd->add_option("--q", setting.Q, "responses");
  sim_cmd->add_option("--rho", setting.rho, "residual dependence in [0,1)");
  sim_cmd->add_option("--delta", setting.delta, "signal-to-noise");
  sim_cmd->add_option("--seed", setting.seed, "base seed (replicate r adds r)");
  sim_cmd->add_option("--reps", reps, "replicates");
  sim_cmd->add_option("--methods", methods, "subset of compadre,padre,lasso")
      ->delimiter(',');
  sim_cmd->add_option("--design", design, "sparse | shape");
  sim_cmd->add_option("--shape", shape_id, "true function id 1..5 for --design shape");
  sim_cmd->add_option("--threads", threads, "worker threads over replicates");
  sim_cmd->add_option("--max-iters", sim_fit.max_iters, "algorithm iterations");
  sim_cmd->add_option("--folds", sim_fit.folds, "cross-validation folds");
  sim_cmd->add_option("--out-dir", out_dir, "output directory");

  auto* net_cmd = app.add_subcommand("export-network",
                                     "write the response precision network");
  net_cmd->add_option("--model", model_path, "model archive")->required();
  net_cmd->add_option("--format", format, "dot | json");
  net_cmd->add_option("--out", out_path, "output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(data_path, config_path, out_path);
    if (pred_cmd->parsed()) return cmd_predict(model_path, data_path, out_path);
    if (sim_cmd->parsed()) {
      if (setting.rho < 0.0 || setting.rho >= 1.0 || setting.delta < 0.0 ||
          setting.n < 10 || setting.p < 1 || setting.Q < 1) {
        throw ParseError("invalid simulation grid values");
      }
      if (design == "shape") {
        setting.design = SimDesign::TwoPairShape;
        if (shape_id < 1 || shape_id > 5) throw ParseError("shape must be 1..5");
        setting.shape = static_cast<TrueFunction>(static_cast<int>(shape_id));
      } else if (design != "sparse") {
        throw ParseError("unknown design '" + design + "'");
      }
      sim_fit.seed = setting.seed;
      return cmd_simulate(setting, reps, methods, out_dir, threads, sim_fit);
    }
    if (net_cmd->parsed()) {
      return cmd_export_network(model_path, format, out_path);
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DimensionMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitOk;
}
