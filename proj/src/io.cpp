#include "compadre/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace compadre {

using nlohmann::json;

std::optional<Index> Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<Index>(i);
  }
  return std::nullopt;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw ParseError("unterminated quote in CSV line");
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';  // doubled quote
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Table read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty CSV file: " + path);

  Table table;
  table.names = split_csv_line(line);
  const std::size_t n_cols = table.names.size();
  if (n_cols == 0) throw ParseError("CSV header has no columns");
  for (std::size_t a = 0; a < n_cols; ++a) {
    for (std::size_t b = a + 1; b < n_cols; ++b) {
      if (table.names[a] == table.names[b]) {
        throw ParseError("duplicate CSV column name: " + table.names[a]);
      }
    }
  }

  std::vector<double> data;
  Index n_rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != n_cols) {
      throw ParseError("CSV row has " + std::to_string(fields.size()) +
                       " fields, expected " + std::to_string(n_cols));
    }
    for (const auto& f : fields) {
      if (f.empty()) throw ParseError("missing cell in CSV row");
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(f, &pos);
      } catch (const std::exception&) {
        throw ParseError("non-numeric CSV cell: '" + f + "'");
      }
      while (pos < f.size() && (f[pos] == ' ' || f[pos] == '\t')) ++pos;
      if (pos != f.size()) throw ParseError("non-numeric CSV cell: '" + f + "'");
      data.push_back(v);
    }
    ++n_rows;
  }
  if (n_rows == 0) throw ParseError("CSV has a header but no data rows");

  table.values.resize(n_rows, static_cast<Index>(n_cols));
  for (Index i = 0; i < n_rows; ++i) {
    for (Index j = 0; j < static_cast<Index>(n_cols); ++j) {
      table.values(i, j) = data[i * n_cols + j];
    }
  }
  return table;
}

void write_csv(const std::string& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (std::size_t j = 0; j < table.names.size(); ++j) {
    if (j) out << ',';
    out << csv_escape(table.names[j]);
  }
  out << '\n';
  for (Index i = 0; i < table.values.rows(); ++i) {
    for (Index j = 0; j < table.values.cols(); ++j) {
      if (j) out << ',';
      out << format_double(table.values(i, j));
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError("config key '" + key + "' expects a boolean, got '" + v + "'");
}

double parse_num(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ParseError("config key '" + key + "' expects a number, got '" + v + "'");
  }
}

}  // namespace

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path);
  RunConfig rc;
  std::optional<double> l1, l2, l4;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config line missing '=': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    if (key == "mode") {
      if (val == "compadre" || val == "CoMPAdRe") {
        rc.fit.mode = FitMode::CoMPAdRe;
      } else if (val == "padre" || val == "PAdRe") {
        rc.fit.mode = FitMode::PAdRe;
      } else {
        throw ParseError("unknown mode '" + val + "'");
      }
    } else if (key == "responses") {
      rc.response_columns = split_list(val);
    } else if (key == "covariates") {
      rc.covariate_columns = split_list(val);
    } else if (key == "folds") {
      rc.fit.folds = static_cast<int>(parse_num(val, key));
    } else if (key == "max_iters") {
      rc.fit.max_iters = static_cast<int>(parse_num(val, key));
    } else if (key == "tol") {
      rc.fit.tol = parse_num(val, key);
    } else if (key == "knots") {
      rc.fit.n_interior_knots = static_cast<int>(parse_num(val, key));
    } else if (key == "seed") {
      rc.fit.seed = static_cast<std::uint64_t>(parse_num(val, key));
    } else if (key == "path_length") {
      rc.fit.path_length = static_cast<int>(parse_num(val, key));
    } else if (key == "path_min_ratio") {
      rc.fit.path_min_ratio = parse_num(val, key);
    } else if (key == "reselect_each_iter") {
      rc.fit.reselect_each_iter = parse_bool(val, key);
    } else if (key == "center_responses") {
      rc.center_responses = parse_bool(val, key);
    } else if (key == "scale_responses") {
      rc.scale_responses = parse_bool(val, key);
    } else if (key == "lambda1") {
      if (val != "cv") l1 = parse_num(val, key);
    } else if (key == "lambda2") {
      if (val != "cv") l2 = parse_num(val, key);
    } else if (key == "lambda4") {
      if (val != "cv") l4 = parse_num(val, key);
    } else {
      throw ParseError("unknown config key '" + key + "'");
    }
  }
  if (rc.fit.max_iters < 1) throw ParseError("max_iters must be >= 1");
  if (rc.fit.tol <= 0) throw ParseError("tol must be positive");
  // scalar overrides broadcast to every response once Q is known
  if (l1) rc.fit.lambda1 = Vector::Constant(1, *l1);
  if (l2) rc.fit.lambda2 = Vector::Constant(1, *l2);
  if (l4) rc.fit.lambda4 = *l4;
  return rc;
}

// ---------------------------------------------------------------------------
// Model archive
// ---------------------------------------------------------------------------

namespace {

json matrix_to_json(const Matrix& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(m.size());
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  j["data"] = data;
  return j;
}

Matrix matrix_from_json(const json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Index>(data.size()) != rows * cols) {
    throw ParseError("archive matrix shape mismatch");
  }
  Matrix m(rows, cols);
  std::size_t i = 0;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = data[i++];
  }
  return m;
}

std::vector<double> vec_to_std(const Vector& v) {
  return {v.data(), v.data() + v.size()};
}

Vector vec_from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

json cv_to_json(const CVRecord& rec) {
  json j;
  j["lambdas"] = rec.lambdas;
  j["mean_error"] = rec.mean_error;
  j["std_error"] = rec.std_error;
  j["min_index"] = rec.min_index;
  j["chosen"] = rec.chosen;
  return j;
}

CVRecord cv_from_json(const json& j) {
  CVRecord rec;
  rec.lambdas = j.at("lambdas").get<std::vector<double>>();
  rec.mean_error = j.at("mean_error").get<std::vector<double>>();
  rec.std_error = j.at("std_error").get<std::vector<double>>();
  rec.min_index = j.at("min_index").get<int>();
  rec.chosen = j.at("chosen").get<int>();
  return rec;
}

}  // namespace

void save_archive(const std::string& path, const ModelArchive& archive) {
  const FitReport& rep = archive.report;
  const ModelState& st = rep.state;
  json j;
  j["format_version"] = archive.format_version;
  j["mode"] = rep.mode == FitMode::CoMPAdRe ? "compadre" : "padre";
  j["responses"] = archive.response_names;
  j["covariates"] = archive.covariate_names;
  j["response_centers"] = vec_to_std(archive.response_centers);
  j["response_scales"] = vec_to_std(archive.response_scales);
  j["intercepts"] = vec_to_std(st.intercepts);
  j["beta_lin"] = matrix_to_json(st.beta_lin);
  json beta_nl = json::array();
  for (Index jx = 0; jx < st.p(); ++jx) {
    json per_response = json::array();
    for (Index q = 0; q < st.Q(); ++q) {
      per_response.push_back(vec_to_std(st.beta_nl[jx][q]));
    }
    beta_nl.push_back(std::move(per_response));
  }
  j["beta_nl"] = std::move(beta_nl);
  j["lambda3"] = matrix_to_json(st.lambda3);
  j["precision"] = matrix_to_json(st.precision.precision);
  j["precision_lambda4"] = st.precision.lambda4;

  json bases = json::array();
  for (const auto& dr : rep.bases) {
    json b;
    b["center"] = dr.center();
    b["scale"] = dr.scale();
    b["boundary"] = {dr.knots().lo, dr.knots().hi};
    b["interior_knots"] = vec_to_std(dr.knots().interior);
    b["gamma"] = vec_to_std(dr.gamma_nl());
    b["transform"] = matrix_to_json(dr.nonlinear_transform());
    bases.push_back(std::move(b));
  }
  j["bases"] = std::move(bases);

  std::string labels;
  labels.reserve(rep.labels.cells.size());
  for (const EffectType e : rep.labels.cells) {
    labels += (e == EffectType::Null ? 'N' : (e == EffectType::Linear ? 'L' : 'X'));
  }
  j["labels"] = labels;

  json tuning;
  tuning["lambda1_used"] = rep.lambda1_used;
  tuning["lambda2_used"] = rep.lambda2_used;
  tuning["lambda4_by_iter"] = rep.lambda4_by_iter;
  json per_resp = json::array();
  for (const auto& tr : rep.tuning) {
    json t;
    t["lambda1_by_iter"] = tr.lambda1_by_iter;
    t["lambda2_by_iter"] = tr.lambda2_by_iter;
    t["cv_lambda1"] = cv_to_json(tr.cv_lambda1);
    t["cv_lambda2"] = cv_to_json(tr.cv_lambda2);
    per_resp.push_back(std::move(t));
  }
  tuning["responses"] = std::move(per_resp);
  j["tuning"] = std::move(tuning);

  j["mse_trace"] = rep.mse_trace;
  j["objective_trace"] = rep.objective_trace;
  j["converged"] = rep.converged;
  j["iterations"] = rep.iterations;

  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << j.dump(1) << '\n';
}

ModelArchive load_archive(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open archive " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("archive is not valid JSON: ") + e.what());
  }

  ModelArchive archive;
  try {
    archive.format_version = j.at("format_version").get<int>();
    if (archive.format_version != 1) {
      throw ParseError("unsupported archive format version");
    }
    archive.mode = j.at("mode").get<std::string>() == "padre"
                       ? FitMode::PAdRe
                       : FitMode::CoMPAdRe;
    archive.response_names = j.at("responses").get<std::vector<std::string>>();
    archive.covariate_names = j.at("covariates").get<std::vector<std::string>>();
    archive.response_centers =
        vec_from_std(j.at("response_centers").get<std::vector<double>>());
    archive.response_scales =
        vec_from_std(j.at("response_scales").get<std::vector<double>>());

    FitReport& rep = archive.report;
    rep.mode = archive.mode;
    ModelState& st = rep.state;
    st.intercepts = vec_from_std(j.at("intercepts").get<std::vector<double>>());
    st.beta_lin = matrix_from_json(j.at("beta_lin"));
    const Index p = st.beta_lin.rows();
    const Index q = st.beta_lin.cols();
    st.beta_nl.resize(p);
    for (Index jx = 0; jx < p; ++jx) {
      st.beta_nl[jx].resize(q);
      for (Index qq = 0; qq < q; ++qq) {
        st.beta_nl[jx][qq] =
            vec_from_std(j.at("beta_nl")[jx][qq].get<std::vector<double>>());
      }
    }
    st.lambda3 = matrix_from_json(j.at("lambda3"));
    st.precision.precision = matrix_from_json(j.at("precision"));
    st.precision.lambda4 = j.at("precision_lambda4").get<double>();

    for (const auto& b : j.at("bases")) {
      KnotSet ks;
      ks.lo = b.at("boundary")[0].get<double>();
      ks.hi = b.at("boundary")[1].get<double>();
      ks.interior = vec_from_std(b.at("interior_knots").get<std::vector<double>>());
      rep.bases.push_back(make_drbasis_from_parts(
          Vector(), b.at("center").get<double>(), b.at("scale").get<double>(),
          std::move(ks), vec_from_std(b.at("gamma").get<std::vector<double>>()),
          matrix_from_json(b.at("transform"))));
    }

    const auto labels = j.at("labels").get<std::string>();
    rep.labels = EffectLabels(p, q);
    if (static_cast<Index>(labels.size()) != p * q) {
      throw ParseError("archive labels shape mismatch");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      rep.labels.cells[i] = labels[i] == 'N'
                                ? EffectType::Null
                                : (labels[i] == 'L' ? EffectType::Linear
                                                    : EffectType::Nonlinear);
    }

    const json& tuning = j.at("tuning");
    rep.lambda1_used = tuning.at("lambda1_used").get<std::vector<double>>();
    rep.lambda2_used = tuning.at("lambda2_used").get<std::vector<double>>();
    rep.lambda4_by_iter = tuning.at("lambda4_by_iter").get<std::vector<double>>();
    for (const auto& t : tuning.at("responses")) {
      ResponseTuning tr;
      tr.lambda1_by_iter = t.at("lambda1_by_iter").get<std::vector<double>>();
      tr.lambda2_by_iter = t.at("lambda2_by_iter").get<std::vector<double>>();
      tr.cv_lambda1 = cv_from_json(t.at("cv_lambda1"));
      tr.cv_lambda2 = cv_from_json(t.at("cv_lambda2"));
      rep.tuning.push_back(std::move(tr));
    }

    rep.mse_trace = j.at("mse_trace").get<std::vector<double>>();
    rep.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    rep.converged = j.at("converged").get<bool>();
    rep.iterations = j.at("iterations").get<int>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed archive: ") + e.what());
  }
  return archive;
}

Matrix archive_predict(const ModelArchive& archive, const Matrix& X_new) {
  Matrix pred = predict(archive.report, X_new);
  for (Index q = 0; q < pred.cols(); ++q) {
    pred.col(q) =
        pred.col(q).array() * archive.response_scales[q] + archive.response_centers[q];
  }
  return pred;
}

// ---------------------------------------------------------------------------
// Precision network
// ---------------------------------------------------------------------------

NetworkExport precision_network(const Matrix& precision,
                                const std::vector<std::string>& names) {
  const Index q = precision.rows();
  if (static_cast<Index>(names.size()) != q) {
    throw DimensionMismatch("precision_network: name count mismatch");
  }
  NetworkExport net;
  net.nodes = names;
  for (Index a = 0; a < q; ++a) {
    for (Index b = a + 1; b < q; ++b) {
      if (precision(a, b) != 0.0) {
        net.edges.push_back(
            {a, b,
             -precision(a, b) / std::sqrt(precision(a, a) * precision(b, b))});
      }
    }
  }
  return net;
}

std::string network_dot(const NetworkExport& net) {
  std::ostringstream out;
  out << "graph precision_network {\n";
  for (const auto& name : net.nodes) {
    out << "  \"" << name << "\";\n";
  }
  for (const auto& e : net.edges) {
    out << "  \"" << net.nodes[e.a] << "\" -- \"" << net.nodes[e.b]
        << "\" [weight=" << format_double(e.weight)
        << ", color=" << (e.weight >= 0 ? "red" : "blue") << "];\n";
  }
  out << "}\n";
  return out.str();
}

std::string network_json(const NetworkExport& net) {
  json j;
  j["nodes"] = net.nodes;
  json edges = json::array();
  for (const auto& e : net.edges) {
    json je;
    je["source"] = net.nodes[e.a];
    je["target"] = net.nodes[e.b];
    je["weight"] = e.weight;
    je["sign"] = e.weight >= 0 ? "positive" : "negative";
    edges.push_back(std::move(je));
  }
  j["edges"] = std::move(edges);
  return j.dump(1) + "\n";
}

}  // namespace compadre
