#pragma once

// On-disk artifacts: JSON model/threshold files with lossless doubles, the
// reference score bank and score/ROC tables as CSV.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcaids/dataset.hpp"
#include "pcaids/detectors.hpp"
#include "pcaids/error.hpp"
#include "pcaids/evaluation.hpp"
#include "pcaids/pca_core.hpp"
#include "pcaids/training.hpp"

namespace pcaids {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kSignConvention = "largest-abs-entry-positive";

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {
inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

inline Vector to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

inline void check_header(const Json& j, const std::string& format, const std::string& where) {
  if (!j.is_object() || j.value("format", std::string()) != format) {
    throw DataError(where + ": not a " + format + " file");
  }
  const int version = j.value("version", 0);
  if (version != kFormatVersion) {
    throw DataError(where + ": unsupported " + format + " version " + std::to_string(version));
  }
}

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}
}  // namespace detail

inline Json model_to_json(const PcaModel& m, const Json& metadata = Json::object()) {
  const Index p = m.dim();
  std::vector<double> v_rows;
  v_rows.reserve(static_cast<std::size_t>(p * p));
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) v_rows.push_back(m.v(i, j));
  }
  Json j;
  j["format"] = "pcaids-model";
  j["version"] = kFormatVersion;
  j["n"] = m.train_n;
  j["p"] = p;
  j["feature_names"] = m.feature_names;
  j["means"] = detail::to_std(m.standardizer.means);
  j["sds"] = detail::to_std(m.standardizer.sds);
  j["gamma"] = detail::to_std(m.gamma);
  j["lambda"] = detail::to_std(m.lambda);
  j["v_row_major"] = v_rows;
  j["active"] = m.active;
  j["sign_convention"] = kSignConvention;
  j["metadata"] = metadata;
  return j;
}

inline PcaModel model_from_json(const Json& j, const std::string& where = "model") {
  detail::check_header(j, "pcaids-model", where);
  try {
    PcaModel m;
    const auto p = j.at("p").get<Index>();
    m.train_n = j.at("n").get<Index>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.standardizer.means = detail::to_eigen(j.at("means").get<std::vector<double>>());
    m.standardizer.sds = detail::to_eigen(j.at("sds").get<std::vector<double>>());
    m.gamma = detail::to_eigen(j.at("gamma").get<std::vector<double>>());
    m.lambda = detail::to_eigen(j.at("lambda").get<std::vector<double>>());
    const auto v_rows = j.at("v_row_major").get<std::vector<double>>();
    m.active = j.at("active").get<std::vector<bool>>();
    if (j.value("sign_convention", std::string()) != kSignConvention) {
      throw DataError(where + ": unknown sign convention");
    }
    const auto pz = static_cast<std::size_t>(p);
    if (p < 1 || m.train_n < 2 || m.feature_names.size() != pz || m.standardizer.means.size() != p ||
        m.standardizer.sds.size() != p || m.gamma.size() != p || m.lambda.size() != p ||
        v_rows.size() != pz * pz || m.active.size() != pz) {
      throw DataError(where + ": inconsistent dimensions");
    }
    m.v = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(v_rows.data(), p, p);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
}

inline Json thresholds_to_json(const ComponentThresholds& t) {
  Json j;
  j["format"] = "pcaids-thresholds";
  j["version"] = kFormatVersion;
  j["p"] = t.dim();
  j["alpha"] = t.alpha;
  j["boot_count"] = t.config.count;
  j["boot_size"] = t.config.size;
  j["seed"] = t.config.seed;
  j["delta"] = detail::to_std(t.delta);
  Json samples = Json::array();
  for (const auto& d : t.boot) samples.push_back(std::vector<double>(d.samples().begin(), d.samples().end()));
  j["samples"] = std::move(samples);
  return j;
}

inline ComponentThresholds thresholds_from_json(const Json& j, const std::string& where = "thresholds") {
  detail::check_header(j, "pcaids-thresholds", where);
  try {
    BootstrapConfig cfg;
    cfg.count = j.at("boot_count").get<Index>();
    cfg.size = j.at("boot_size").get<Index>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    std::vector<EmpiricalDistribution> boot;
    for (const auto& s : j.at("samples")) boot.emplace_back(s.get<std::vector<double>>());
    if (static_cast<Index>(boot.size()) != j.at("p").get<Index>()) throw DataError(where + ": inconsistent dimensions");
    auto t = component_thresholds(std::move(boot), j.at("alpha").get<double>(), cfg);
    const auto stored = j.at("delta").get<std::vector<double>>();
    if (stored != detail::to_std(t.delta)) throw DataError(where + ": stored delta disagrees with samples");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
}

inline std::string dump_json(const Json& j) { return j.dump(1) + "\n"; }

inline void save_model(const std::filesystem::path& path, const PcaModel& m, const Json& metadata = Json::object()) {
  detail::write_text(path, dump_json(model_to_json(m, metadata)));
}
inline PcaModel load_model(const std::filesystem::path& path) {
  return model_from_json(detail::read_json(path), path.string());
}
inline void save_thresholds(const std::filesystem::path& path, const ComponentThresholds& t) {
  detail::write_text(path, dump_json(thresholds_to_json(t)));
}
inline ComponentThresholds load_thresholds(const std::filesystem::path& path) {
  return thresholds_from_json(detail::read_json(path), path.string());
}

// ---- CSV helpers ----

/// Minimal numeric table: header names plus rows of doubles (labels kept as text).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;  ///< "# ..." lines, without the marker

  Index column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<Index>(i);
    }
    return -1;
  }
};

inline CsvTable read_csv_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  std::vector<std::string_view> fields;
  Index line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      t.comments.push_back(std::string(detail::trim(std::string_view(line).substr(1))));
      continue;
    }
    detail::split_fields(line, fields);
    std::vector<std::string> row(fields.begin(), fields.end());
    if (t.header.empty()) {
      t.header = std::move(row);
    } else {
      if (row.size() != t.header.size()) {
        throw DataError(path.string() + ": line " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                        " fields, expected " + std::to_string(t.header.size()));
      }
      t.rows.push_back(std::move(row));
    }
  }
  if (t.header.empty()) throw DataError(path.string() + ": empty file");
  return t;
}

inline double parse_cell(const std::string& s, const std::string& where) {
  double v = 0.0;
  if (!detail::parse_double(s, v)) throw DataError(where + ": not a finite number: '" + s + "'");
  return v;
}

/// Label cell -> attack flag: 1/true/attack/anomaly are positive, 0/false/normal negative.
inline bool parse_label(const std::string& s, const std::string& where) {
  if (s == "1" || s == "true" || s == "attack" || s == "anomaly") return true;
  if (s == "0" || s == "false" || s == "normal") return false;
  throw DataError(where + ": unrecognised label '" + s + "'");
}

inline void save_reference(const std::filesystem::path& path, const ReferenceScores& r) {
  std::ostringstream os;
  os << "# format=pcaids-reference version=" << kFormatVersion << " rows=" << r.w.rows() << " p=" << r.w.cols()
     << " source_rows=" << r.source_rows << "\n";
  for (Index j = 0; j < r.w.cols(); ++j) os << (j ? "," : "") << "w" << (j + 1);
  os << "\n";
  for (Index i = 0; i < r.w.rows(); ++i) {
    for (Index j = 0; j < r.w.cols(); ++j) os << (j ? "," : "") << format_double(r.w(i, j));
    os << "\n";
  }
  detail::write_text(path, os.str());
}

inline ReferenceScores load_reference(const std::filesystem::path& path) {
  const auto t = read_csv_table(path);
  if (t.comments.empty() || t.comments.front().rfind("format=pcaids-reference version=1", 0) != 0) {
    throw DataError(path.string() + ": not a pcaids-reference file");
  }
  ReferenceScores r;
  const auto pos = t.comments.front().find("source_rows=");
  r.source_rows = pos == std::string::npos ? 0 : std::stoll(t.comments.front().substr(pos + 12));
  r.w.resize(static_cast<Index>(t.rows.size()), static_cast<Index>(t.header.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (std::size_t j = 0; j < t.header.size(); ++j) {
      r.w(static_cast<Index>(i), static_cast<Index>(j)) =
          parse_cell(t.rows[i][j], path.string() + " row " + std::to_string(i + 1));
    }
  }
  return r;
}

inline std::string roc_csv(const RocCurve& c) {
  std::ostringstream os;
  os << "# auc=" << format_double(c.auc) << "\nfpr,tpr\n";
  for (const auto& pt : c.points) os << format_double(pt.fpr) << "," << format_double(pt.tpr) << "\n";
  return os.str();
}

/// Averaged curves side by side: fpr, then one tpr column per method.
inline std::string averaged_roc_csv(const std::vector<std::pair<std::string, RocCurve>>& curves) {
  std::ostringstream os;
  for (const auto& [name, c] : curves) os << "# auc_" << name << "=" << format_double(c.auc) << "\n";
  os << "fpr";
  for (const auto& [name, c] : curves) os << ",tpr_" << name;
  os << "\n";
  if (curves.empty()) return os.str();
  const auto& ref = curves.front().second.points;
  for (std::size_t k = 0; k < ref.size(); ++k) {
    os << format_double(ref[k].fpr);
    for (const auto& [name, c] : curves) {
      if (c.points.size() != ref.size()) throw InvalidArgument("averaged_roc_csv: curves on different grids");
      os << "," << format_double(c.points[k].tpr);
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace pcaids
