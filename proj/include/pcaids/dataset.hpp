#pragma once

// CSV ingestion driven by feature presets, the UNSW-NB15 clean-region split,
// and clean/attack contamination batches.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcaids/error.hpp"
#include "pcaids/pca_core.hpp"
#include "pcaids/simulation.hpp"

namespace pcaids {

/// Which columns of a connection-record CSV become features and how rows are labelled.
struct FeaturePreset {
  std::string name = "generic";
  bool has_header = true;
  std::vector<std::string> schema;            ///< column names in file order for headerless files
  std::vector<std::string> included_columns;  ///< empty: every column except label/category
  std::string label_column = "label";
  bool label_required = false;                ///< false: a missing label column means "unlabelled"
  std::set<std::string> positive_labels;      ///< non-empty: attack iff label is listed
  std::set<std::string> normal_labels;        ///< used when positive_labels is empty; both empty: zero, false, normal or benign is clean
  std::string category_column;                ///< attack type; defaults to the label text
  std::string strip_label_suffix;             ///< e.g. "." on KDD'99 labels
  Index expected_components = 0;              ///< informational; 0 when not pinned
  Index expected_total_rows = 0;
  std::pair<Index, Index> clean_rows{0, 0};   ///< 1-based inclusive file-row range of clean traffic
  std::pair<Index, Index> train_rows{0, 0};   ///< 1-based inclusive training range inside it

  void validate() const {
    for (const auto& c : included_columns) {
      if (c == label_column || (!category_column.empty() && c == category_column)) {
        throw DataError("preset '" + name + "': feature column '" + c + "' is also a label column");
      }
    }
    std::set<std::string> seen;
    for (const auto& c : included_columns) {
      if (!seen.insert(c).second) throw DataError("preset '" + name + "': duplicate column '" + c + "'");
    }
    if (!has_header && schema.empty()) {
      throw DataError("preset '" + name + "': headerless files need an explicit schema");
    }
  }

  bool is_attack(const std::string& label) const {
    if (!positive_labels.empty()) return positive_labels.count(label) > 0;
    if (!normal_labels.empty()) return normal_labels.count(label) == 0;
    double v = 0;
    const auto [end, ec] = std::from_chars(label.data(), label.data() + label.size(), v);
    if (ec == std::errc() && end == label.data() + label.size()) return v != 0.0;
    std::string l = label;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return !(l == "0" || l == "false" || l == "normal" || l == "benign");
  }
};

inline FeaturePreset preset_from_json(const nlohmann::json& j) {
  FeaturePreset p;
  p.name = j.value("name", std::string("generic"));
  p.has_header = j.value("has_header", true);
  p.schema = j.value("schema", std::vector<std::string>{});
  p.included_columns = j.value("included_columns", std::vector<std::string>{});
  p.label_column = j.value("label_column", std::string("label"));
  p.label_required = j.value("label_required", false);
  for (const auto& s : j.value("positive_labels", std::vector<std::string>{})) p.positive_labels.insert(s);
  for (const auto& s : j.value("normal_labels", std::vector<std::string>{})) p.normal_labels.insert(s);
  p.category_column = j.value("category_column", std::string());
  p.strip_label_suffix = j.value("strip_label_suffix", std::string());
  p.expected_components = j.value("expected_components", Index{0});
  p.expected_total_rows = j.value("expected_total_rows", Index{0});
  if (j.contains("clean_rows")) p.clean_rows = {j["clean_rows"].at(0).get<Index>(), j["clean_rows"].at(1).get<Index>()};
  if (j.contains("train_rows")) p.train_rows = {j["train_rows"].at(0).get<Index>(), j["train_rows"].at(1).get<Index>()};
  p.validate();
  return p;
}

inline FeaturePreset load_preset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open preset " + path.string());
  try {
    return preset_from_json(nlohmann::json::parse(in, nullptr, true, true));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("preset " + path.string() + ": " + e.what());
  }
}

struct LabeledDataset {
  Matrix y;
  std::vector<bool> labels;              ///< true = attack
  std::vector<std::string> categories;   ///< attack type, "normal" for clean rows
  std::vector<Index> row_ids;            ///< 1-based data-row number across the input files
  std::vector<std::string> feature_names;
  bool has_labels = false;
  Index skipped_rows = 0;

  Index rows() const noexcept { return y.rows(); }
};

struct LoadOptions {
  bool skip_malformed = false;
  std::optional<bool> has_header;  ///< overrides the preset
};

namespace detail {
inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  return s;
}

inline void split_fields(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

inline Index column_index(const std::vector<std::string>& names, const std::string& col) {
  const auto it = std::find(names.begin(), names.end(), col);
  return it == names.end() ? -1 : static_cast<Index>(it - names.begin());
}
}  // namespace detail

/// Reads one or more CSV files (concatenated in the given order) through a preset.
inline LabeledDataset load_csv(const std::vector<std::filesystem::path>& paths, const FeaturePreset& preset,
                               const LoadOptions& opt = {}) {
  preset.validate();
  if (paths.empty()) throw InvalidArgument("load_csv: no input files");
  const bool header = opt.has_header.value_or(preset.has_header);
  LabeledDataset ds;
  std::vector<double> values;
  std::vector<Index> feature_idx;
  Index label_idx = -1;
  Index category_idx = -1;
  std::vector<std::string> names;
  std::vector<std::string_view> fields;
  std::vector<Index> bad_rows;
  std::string line;
  Index row_no = 0;

  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    bool first = true;
    while (std::getline(in, line)) {
      if (first) {
        first = false;
        std::vector<std::string> file_names;
        if (header) {
          detail::split_fields(line, fields);
          for (auto f : fields) file_names.emplace_back(f);
        } else {
          file_names = preset.schema;
        }
        if (names.empty()) {
          names = file_names;
          label_idx = detail::column_index(names, preset.label_column);
          if (label_idx < 0 && preset.label_required) {
            throw DataError(path.string() + ": missing label column '" + preset.label_column + "'");
          }
          if (!preset.category_column.empty()) category_idx = detail::column_index(names, preset.category_column);
          if (preset.included_columns.empty()) {
            for (Index c = 0; c < static_cast<Index>(names.size()); ++c) {
              if (c != label_idx && c != category_idx) {
                feature_idx.push_back(c);
                ds.feature_names.push_back(names[static_cast<std::size_t>(c)]);
              }
            }
          } else {
            std::vector<std::string> missing;
            for (const auto& col : preset.included_columns) {
              const Index c = detail::column_index(names, col);
              if (c < 0) missing.push_back(col);
              feature_idx.push_back(c);
            }
            if (!missing.empty()) {
              std::string msg = path.string() + ": missing column(s):";
              for (const auto& m : missing) msg += " " + m;
              throw DataError(msg);
            }
            ds.feature_names = preset.included_columns;
          }
          ds.has_labels = label_idx >= 0;
        } else if (file_names != names) {
          throw DataError(path.string() + ": header differs from the first input file");
        }
        if (header) continue;
      }
      if (detail::trim(line).empty()) continue;
      ++row_no;
      detail::split_fields(line, fields);
      bool ok = fields.size() == names.size();
      const std::size_t base = values.size();
      if (ok) {
        for (Index c : feature_idx) {
          double v = 0.0;
          if (!detail::parse_double(fields[static_cast<std::size_t>(c)], v)) {
            ok = false;
            break;
          }
          values.push_back(v);
        }
      }
      if (!ok) {
        values.resize(base);
        if (opt.skip_malformed) {
          ++ds.skipped_rows;
          continue;
        }
        if (bad_rows.size() < 20) bad_rows.push_back(row_no);
        continue;
      }
      ds.row_ids.push_back(row_no);
      if (label_idx >= 0) {
        std::string label(fields[static_cast<std::size_t>(label_idx)]);
        ds.labels.push_back(preset.is_attack(label));
        std::string cat = category_idx >= 0 ? std::string(fields[static_cast<std::size_t>(category_idx)]) : label;
        if (!preset.strip_label_suffix.empty() && cat.size() >= preset.strip_label_suffix.size() &&
            cat.compare(cat.size() - preset.strip_label_suffix.size(), std::string::npos, preset.strip_label_suffix) == 0) {
          cat.resize(cat.size() - preset.strip_label_suffix.size());
        }
        if (!ds.labels.back()) cat = "normal";
        ds.categories.push_back(std::move(cat));
      } else {
        ds.labels.push_back(false);
        ds.categories.emplace_back("unlabelled");
      }
    }
  }
  if (!bad_rows.empty()) {
    std::ostringstream os;
    os << "malformed or non-numeric row(s):";
    for (Index r : bad_rows) os << ' ' << r;
    if (bad_rows.size() == 20) os << " ...";
    os << " (use skip mode to count and drop them)";
    throw DataError(os.str());
  }
  if (ds.row_ids.empty()) throw DataError("no data rows in input");
  const auto n = static_cast<Index>(ds.row_ids.size());
  const auto p = static_cast<Index>(feature_idx.size());
  ds.y = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(values.data(), n, p);
  return ds;
}

inline LabeledDataset load_csv(const std::filesystem::path& path, const FeaturePreset& preset, const LoadOptions& opt = {}) {
  return load_csv(std::vector<std::filesystem::path>{path}, preset, opt);
}

inline LabeledDataset subset(const LabeledDataset& ds, std::span<const Index> rows) {
  LabeledDataset out;
  out.y = select_rows(ds.y, rows);
  out.feature_names = ds.feature_names;
  out.has_labels = ds.has_labels;
  for (Index r : rows) {
    out.labels.push_back(ds.labels[static_cast<std::size_t>(r)]);
    out.categories.push_back(ds.categories[static_cast<std::size_t>(r)]);
    out.row_ids.push_back(ds.row_ids[static_cast<std::size_t>(r)]);
  }
  return out;
}

inline std::vector<Index> rows_where(const LabeledDataset& ds, bool attack) {
  std::vector<Index> out;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    if (ds.labels[i] == attack) out.push_back(static_cast<Index>(i));
  }
  return out;
}

/// Removes feature columns (0-based), e.g. constant ones.
inline LabeledDataset drop_columns(LabeledDataset ds, std::vector<Index> cols) {
  std::sort(cols.begin(), cols.end());
  std::vector<Index> keep;
  std::vector<std::string> names;
  for (Index j = 0; j < ds.y.cols(); ++j) {
    if (!std::binary_search(cols.begin(), cols.end(), j)) {
      keep.push_back(j);
      names.push_back(ds.feature_names[static_cast<std::size_t>(j)]);
    }
  }
  Matrix y(ds.y.rows(), static_cast<Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) y.col(static_cast<Index>(k)) = ds.y.col(keep[k]);
  ds.y = std::move(y);
  ds.feature_names = std::move(names);
  return ds;
}

inline std::map<std::string, Index> category_counts(const LabeledDataset& ds) {
  std::map<std::string, Index> out;
  for (const auto& c : ds.categories) ++out[c];
  return out;
}

/// Attack categories occurring fewer than `max_count` times.
inline std::vector<std::string> rare_categories(const LabeledDataset& ds, Index max_count = 1000) {
  std::map<std::string, Index> counts;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    if (ds.labels[i]) ++counts[ds.categories[i]];
  }
  std::vector<std::string> out;
  for (const auto& [name, count] : counts) {
    if (count < max_count) out.push_back(name);
  }
  return out;
}

struct DatasetSplit {
  LabeledDataset train;
  LabeledDataset test;
  Index train_attack_rows = 0;  ///< attack-labelled rows inside the training range
};

/// Training rows are the 1-based file rows [first, last]; every other row is test data.
inline DatasetSplit split_by_row_range(const LabeledDataset& ds, Index first, Index last, Index min_rows) {
  if (ds.row_ids.empty() || ds.row_ids.back() < min_rows) {
    throw DataError("dataset has " + std::to_string(ds.row_ids.empty() ? 0 : ds.row_ids.back()) +
                    " rows, the split needs at least " + std::to_string(min_rows));
  }
  std::vector<Index> tr;
  std::vector<Index> te;
  for (std::size_t i = 0; i < ds.row_ids.size(); ++i) {
    const Index id = ds.row_ids[i];
    (id >= first && id <= last ? tr : te).push_back(static_cast<Index>(i));
  }
  DatasetSplit s{subset(ds, tr), subset(ds, te), 0};
  s.train_attack_rows = std::count(s.train.labels.begin(), s.train.labels.end(), true);
  return s;
}

/// UNSW-NB15: train on rows 300,001-900,000 of the clean region 186,789-1,087,248,
/// test on all other rows (defaults; a preset may pin other ranges).
inline DatasetSplit split_unsw_clean(const LabeledDataset& ds, const FeaturePreset* preset = nullptr) {
  std::pair<Index, Index> clean{186789, 1087248};
  std::pair<Index, Index> train{300001, 900000};
  if (preset != nullptr && preset->train_rows.second > 0) {
    clean = preset->clean_rows;
    train = preset->train_rows;
  }
  return split_by_row_range(ds, train.first, train.second, clean.second);
}

/// clean_count normal rows from `clean` and attack_count attack rows from
/// `attacks` (optionally restricted to some categories), drawn without
/// replacement and shuffled together.
inline LabeledDataset contaminate(const LabeledDataset& clean, const LabeledDataset& attacks, Index clean_count,
                                  Index attack_count, const std::vector<std::string>& category_filter,
                                  std::uint64_t seed) {
  const auto clean_pool = rows_where(clean, false);
  std::vector<Index> attack_pool;
  for (Index i : rows_where(attacks, true)) {
    const auto& cat = attacks.categories[static_cast<std::size_t>(i)];
    if (category_filter.empty() || std::find(category_filter.begin(), category_filter.end(), cat) != category_filter.end()) {
      attack_pool.push_back(i);
    }
  }
  if (static_cast<Index>(clean_pool.size()) < clean_count) {
    throw DataError("contaminate: clean pool has " + std::to_string(clean_pool.size()) + " rows, need " +
                    std::to_string(clean_count));
  }
  if (static_cast<Index>(attack_pool.size()) < attack_count) {
    throw DataError("contaminate: attack pool has " + std::to_string(attack_pool.size()) + " rows, need " +
                    std::to_string(attack_count));
  }
  const auto ci = sample_without_replacement(static_cast<Index>(clean_pool.size()), clean_count, derive_seed(seed, 1));
  const auto ai = sample_without_replacement(static_cast<Index>(attack_pool.size()), attack_count, derive_seed(seed, 2));
  std::vector<std::pair<const LabeledDataset*, Index>> picks;
  for (Index i : ci) picks.emplace_back(&clean, clean_pool[static_cast<std::size_t>(i)]);
  for (Index i : ai) picks.emplace_back(&attacks, attack_pool[static_cast<std::size_t>(i)]);
  Rng rng(derive_seed(seed, 3));
  std::shuffle(picks.begin(), picks.end(), rng);
  LabeledDataset out;
  out.feature_names = clean.feature_names;
  out.has_labels = true;
  out.y.resize(static_cast<Index>(picks.size()), clean.y.cols());
  for (std::size_t k = 0; k < picks.size(); ++k) {
    const auto& [src, r] = picks[k];
    out.y.row(static_cast<Index>(k)) = src->y.row(r);
    out.labels.push_back(src->labels[static_cast<std::size_t>(r)]);
    out.categories.push_back(src->categories[static_cast<std::size_t>(r)]);
    out.row_ids.push_back(src->row_ids[static_cast<std::size_t>(r)]);
  }
  return out;
}

}  // namespace pcaids
