#pragma once

// Command-line front end: train, diagnose, score, simulate, evaluate.
// Every subcommand writes manifest.json with its effective arguments and
// SHA-256 checksums of inputs and outputs; `--replay manifest.json` reruns it.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "pcaids/dataset.hpp"
#include "pcaids/detectors.hpp"
#include "pcaids/evaluation.hpp"
#include "pcaids/io.hpp"
#include "pcaids/parallel.hpp"
#include "pcaids/simulation.hpp"
#include "pcaids/training.hpp"

#ifndef PCAIDS_PRESET_DIR
#define PCAIDS_PRESET_DIR "presets"
#endif

namespace pcaids::cli {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "1.0.0";

inline std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

/// Preset by file path, or by name from the shipped presets directory.
inline FeaturePreset resolve_preset(const std::string& name) {
  if (name.empty() || name == "generic") return {};
  if (fs::exists(name)) return load_preset(name);
  const fs::path shipped = fs::path(PCAIDS_PRESET_DIR) / (name + ".preset");
  if (fs::exists(shipped)) return load_preset(shipped);
  throw InvalidArgument("unknown preset '" + name + "'");
}

inline std::vector<Index> parse_index_list(const std::string& s, const std::string& what) {
  std::vector<Index> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto t = detail::trim(tok);
    if (t.empty()) continue;
    Index v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size() || v < 1) {
      throw InvalidArgument(what + ": expected positive 1-based integers, got '" + std::string(t) + "'");
    }
    out.push_back(v - 1);
  }
  if (out.empty()) throw InvalidArgument(what + ": empty list");
  return out;
}

/// Options shared by every subcommand that reads connection records.
struct InputOptions {
  std::vector<std::string> files;
  std::string preset = "generic";
  bool skip_malformed = false;
  std::string rows;  ///< "first-last", 1-based inclusive
  std::string split = "none";

  void add_to(CLI::App* app, bool required = true) {
    auto* o = app->add_option("--input", files, "CSV file(s), concatenated in order");
    if (required) o->required();
    app->add_option("--preset", preset, "preset name or path (default: generic CSV with header)");
    app->add_flag("--skip-malformed", skip_malformed, "count and drop malformed rows instead of failing");
    app->add_option("--rows", rows, "keep only file rows first-last (1-based, inclusive)");
    app->add_option("--split", split, "none | train | test: UNSW clean-region split")
        ->check(CLI::IsMember({"none", "train", "test"}));
  }
};

struct Loaded {
  LabeledDataset data;
  FeaturePreset preset;
};

inline Loaded load_inputs(const InputOptions& in) {
  Loaded l;
  l.preset = resolve_preset(in.preset);
  std::vector<fs::path> paths(in.files.begin(), in.files.end());
  LoadOptions lo;
  lo.skip_malformed = in.skip_malformed;
  l.data = load_csv(paths, l.preset, lo);
  if (l.preset.expected_total_rows > 0 && in.split != "none" &&
      l.data.row_ids.back() != l.preset.expected_total_rows) {
    std::cerr << "warning: " << l.data.row_ids.back() << " rows loaded, preset expects "
              << l.preset.expected_total_rows << "\n";
  }
  if (in.split != "none") {
    auto s = split_unsw_clean(l.data, &l.preset);
    l.data = in.split == "train" ? std::move(s.train) : std::move(s.test);
  }
  if (!in.rows.empty()) {
    const auto dash = in.rows.find('-');
    if (dash == std::string::npos) throw InvalidArgument("--rows expects first-last");
    const Index first = std::stoll(in.rows.substr(0, dash));
    const Index last = std::stoll(in.rows.substr(dash + 1));
    std::vector<Index> keep;
    for (std::size_t i = 0; i < l.data.row_ids.size(); ++i) {
      if (l.data.row_ids[i] >= first && l.data.row_ids[i] <= last) keep.push_back(static_cast<Index>(i));
    }
    if (keep.empty()) throw DataError("--rows " + in.rows + " selects no rows");
    l.data = subset(l.data, keep);
  }
  return l;
}

/// Columns of `ds` reordered to the model's feature names.
inline Matrix align_features(const LabeledDataset& ds, const std::vector<std::string>& names) {
  Matrix y(ds.rows(), static_cast<Index>(names.size()));
  for (std::size_t k = 0; k < names.size(); ++k) {
    const Index c = detail::column_index(ds.feature_names, names[k]);
    if (c < 0) throw DataError("input lacks model feature '" + names[k] + "'");
    y.col(static_cast<Index>(k)) = ds.y.col(c);
  }
  return y;
}

/// Records arguments and checksums, then writes manifest.json into the output dir.
class Manifest {
 public:
  Manifest(std::string subcommand, std::vector<std::string> args)
      : subcommand_(std::move(subcommand)), args_(std::move(args)) {}

  void param(const std::string& key, Json value) { params_[key] = std::move(value); }
  void input(const fs::path& p) { inputs_[p.string()] = sha256_file(p); }
  void artifact(const fs::path& p) { artifacts_[p.filename().string()] = sha256_file(p); }

  void write(const fs::path& dir) const {
    Json j;
    j["format"] = "pcaids-manifest";
    j["version"] = kFormatVersion;
    j["tool_version"] = kToolVersion;
    j["subcommand"] = subcommand_;
    j["args"] = args_;
    j["parameters"] = params_;
    j["inputs"] = inputs_;
    j["artifacts"] = artifacts_;
    pcaids::detail::write_text(dir / "manifest.json", dump_json(j));
  }

 private:
  std::string subcommand_;
  std::vector<std::string> args_;
  Json params_ = Json::object();
  Json inputs_ = Json::object();
  Json artifacts_ = Json::object();
};

inline fs::path default_out_dir(const std::string& sub) {
  const char* env = std::getenv("PCAIDS_OUT_DIR");
  return fs::path(env != nullptr && *env != '\0' ? env : "pcaids_out") / sub;
}

inline std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << 100.0 * v << "%";
  return os.str();
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  InputOptions in;
  std::string out;
  Index boot_count = 5000;
  Index boot_size = 10000;
  double alpha = 1e-4;
  std::uint64_t seed = 1;
  Index reference_size = 100000;
  bool drop_constant = false;
};

inline std::string training_report(const TrainingResult& tr, const Loaded& l, const std::vector<std::string>& dropped,
                                   Index attack_rows) {
  const auto& m = tr.model;
  std::ostringstream os;
  os << "training rows: " << m.train_n << "\nfeatures: " << m.dim() << "\n";
  if (!dropped.empty()) {
    os << "dropped constant columns:";
    for (const auto& d : dropped) os << ' ' << d;
    os << "\n";
  }
  if (l.data.skipped_rows > 0) os << "skipped malformed rows: " << l.data.skipped_rows << "\n";
  if (attack_rows > 0) os << "WARNING: " << attack_rows << " training rows are labelled as attacks\n";
  if (l.preset.expected_components > 0 && l.preset.expected_components != m.dim()) {
    os << "WARNING: preset '" << l.preset.name << "' expects " << l.preset.expected_components
       << " components, model has " << m.dim() << "\n";
  }
  os << "rank: " << m.rank() << " of " << m.dim() << "\nKaiser q: " << kaiser_rank(m.lambda) << "\n";
  os << "bootstrap: B=" << tr.thresholds.config.count << " size=" << tr.thresholds.config.size
     << " seed=" << tr.thresholds.config.seed << " alpha=" << tr.thresholds.alpha << "\n\n";
  os << "component  gamma  lambda  cum_var  r_min  r_median  delta  r_max\n";
  const double total = m.lambda.sum();
  double cum = 0.0;
  for (Index j = 0; j < m.dim(); ++j) {
    cum += m.lambda(j);
    const auto& b = tr.thresholds.boot[static_cast<std::size_t>(j)];
    os << (j + 1) << "  " << format_double(m.gamma(j)) << "  " << format_double(m.lambda(j)) << "  "
       << std::fixed << std::setprecision(4) << cum / total << "  " << b.min() << "  " << b.median() << "  "
       << tr.thresholds.delta(j) << "  " << b.max() << std::defaultfloat
       << (m.active[static_cast<std::size_t>(j)] ? "" : "  (inactive)") << "\n";
  }
  return os.str();
}

inline void write_training(const fs::path& out, const TrainingResult& tr, const Json& metadata, Manifest& man) {
  fs::create_directories(out);
  save_model(out / "model.json", tr.model, metadata);
  save_thresholds(out / "thresholds.json", tr.thresholds);
  save_reference(out / "reference.csv", tr.reference);
  for (const char* f : {"model.json", "thresholds.json", "reference.csv"}) man.artifact(out / f);
}

inline int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  const fs::path out = a.out.empty() ? default_out_dir("train") : fs::path(a.out);
  Loaded l = load_inputs(a.in);
  std::vector<std::string> dropped;
  if (a.drop_constant) {
    std::vector<Index> cols;
    for (Index j = 0; j < l.data.y.cols(); ++j) {
      if (l.data.y.col(j).maxCoeff() == l.data.y.col(j).minCoeff()) {
        cols.push_back(j);
        dropped.push_back(l.data.feature_names[static_cast<std::size_t>(j)]);
      }
    }
    l.data = drop_columns(std::move(l.data), cols);
  }
  TrainingConfig cfg;
  cfg.boot = {a.boot_count, a.boot_size, a.seed};
  cfg.alpha = a.alpha;
  cfg.reference_size = a.reference_size;
  const TrainingResult tr = train(l.data.y, l.data.feature_names, cfg);
  const Index attack_rows = std::count(l.data.labels.begin(), l.data.labels.end(), true);

  Manifest man("train", argv);
  for (const auto& f : a.in.files) man.input(f);
  Json meta;
  meta["tool_version"] = kToolVersion;
  meta["preset"] = l.preset.name;
  meta["inputs"] = a.in.files;
  meta["split"] = a.in.split;
  meta["rows"] = a.in.rows;
  meta["dropped_columns"] = dropped;
  meta["reference_size"] = a.reference_size;
  meta["skipped_rows"] = l.data.skipped_rows;
  write_training(out, tr, meta, man);
  pcaids::detail::write_text(out / "training_report.txt", training_report(tr, l, dropped, attack_rows));
  man.artifact(out / "training_report.txt");
  man.param("boot_count", a.boot_count);
  man.param("boot_size", a.boot_size);
  man.param("alpha", a.alpha);
  man.param("seed", a.seed);
  man.param("reference_size", a.reference_size);
  man.param("threads", thread_count());
  man.write(out);
  std::cout << "trained on " << tr.model.train_n << " rows x " << tr.model.dim() << " features -> " << out.string()
            << "\n";
  return 0;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
  InputOptions in;
  std::string model_dir;
  std::string out;
  DiagnosisConfig cfg;
  bool remove_and_retrain = false;
  bool yes = false;
};

inline std::string diagnosis_text(const OutlierDiagnosis& d, const PcaModel& m, const LabeledDataset& ds) {
  std::ostringstream os;
  os << "bootstrap medians of r_j:\n";
  for (Index j = 0; j < m.dim(); ++j) os << "  r_" << (j + 1) << "  " << format_double(d.medians(j)) << "\n";
  if (d.empty()) {
    os << "no suspicious components\n";
    return os.str();
  }
  os << "suspicious components:";
  for (Index j : d.suspicious_components) os << ' ' << (j + 1);
  os << "\n";
  for (std::size_t k = 0; k < d.suspicious_components.size(); ++k) {
    os << "component " << (d.suspicious_components[k] + 1) << " heavy loadings:";
    for (const auto& f : d.heavy_loading_features[k]) {
      os << ' ' << m.feature_names[static_cast<std::size_t>(f.feature)] << '(' << format_double(f.loading) << ')';
    }
    os << "\n";
  }
  os << "row cutoff |x| > " << format_double(d.row_cutoff) << "\nflagged rows: " << d.flagged_rows.size() << "\n";
  for (const auto& f : d.flagged_rows) {
    os << "  row " << ds.row_ids[static_cast<std::size_t>(f.row)] << "  "
       << m.feature_names[static_cast<std::size_t>(f.feature)] << " = " << format_double(f.value) << " (component "
       << (f.component + 1) << ")\n";
  }
  return os.str();
}

inline int cmd_diagnose(const DiagnoseArgs& a, const std::vector<std::string>& argv) {
  const fs::path mdir(a.model_dir);
  const fs::path out = a.out.empty() ? default_out_dir("diagnose") : fs::path(a.out);
  if (a.remove_and_retrain && fs::exists(out) && fs::equivalent(out, mdir)) {
    throw InvalidArgument("--out must differ from --model-dir; retraining never overwrites the input model");
  }
  const PcaModel model = load_model(mdir / "model.json");
  const ComponentThresholds th = load_thresholds(mdir / "thresholds.json");
  const Loaded l = load_inputs(a.in);
  const Matrix y = align_features(l.data, model.feature_names);
  const Matrix x = standardize(model.standardizer, y);
  const OutlierDiagnosis d = diagnose_training_outliers(model, x, th.boot, a.cfg);

  Manifest man("diagnose", argv);
  man.input(mdir / "model.json");
  man.input(mdir / "thresholds.json");
  for (const auto& f : a.in.files) man.input(f);
  fs::create_directories(out);
  const std::string text = diagnosis_text(d, model, l.data);
  pcaids::detail::write_text(out / "diagnosis.txt", text);
  std::ostringstream csv;
  csv << "row,feature,component,value\n";
  for (const auto& f : d.flagged_rows) {
    csv << l.data.row_ids[static_cast<std::size_t>(f.row)] << ',' << model.feature_names[static_cast<std::size_t>(f.feature)]
        << ',' << (f.component + 1) << ',' << format_double(f.value) << "\n";
  }
  pcaids::detail::write_text(out / "flagged_rows.csv", csv.str());
  man.artifact(out / "diagnosis.txt");
  man.artifact(out / "flagged_rows.csv");
  man.param("center_band", a.cfg.center_band);
  man.param("loading_cutoff", a.cfg.loading_cutoff);
  man.param("row_quantile", a.cfg.row_quantile);
  std::cout << text;

  if (a.remove_and_retrain && !d.flagged_rows.empty()) {
    bool go = a.yes;
    if (!go) {
      std::cout << "remove " << d.flagged_rows.size() << " rows and retrain? [y/N] " << std::flush;
      std::string answer;
      std::getline(std::cin, answer);
      go = answer == "y" || answer == "Y" || answer == "yes";
    }
    if (!go) {
      std::cout << "retraining skipped\n";
    } else {
      const Json mj = pcaids::detail::read_json(mdir / "model.json");
      TrainingConfig cfg;
      cfg.boot = th.config;
      cfg.alpha = th.alpha;
      cfg.reference_size = mj["metadata"].value("reference_size", Index{100000});
      const TrainingResult tr = retrain_after_removal(y, d.flagged_row_indices(), model.feature_names, cfg);
      Json meta = mj["metadata"];
      std::vector<Index> removed;
      for (const auto& f : d.flagged_rows) removed.push_back(l.data.row_ids[static_cast<std::size_t>(f.row)]);
      std::sort(removed.begin(), removed.end());
      meta["removed_rows"] = removed;
      write_training(out, tr, meta, man);
      std::ostringstream os;
      os << "retrained without " << removed.size() << " rows; bootstrap medians of r_j:\n";
      for (Index j = 0; j < tr.model.dim(); ++j) {
        os << "  r_" << (j + 1) << "  " << format_double(tr.thresholds.boot[static_cast<std::size_t>(j)].median()) << "\n";
      }
      pcaids::detail::write_text(out / "retrain_report.txt", os.str());
      man.artifact(out / "retrain_report.txt");
      std::cout << os.str();
    }
  }
  man.write(out);
  return 0;
}

// ---------------------------------------------------------------- score

struct ScoreArgs {
  InputOptions in;
  std::string model_dir;
  std::string out;
  std::string method = "all";
  std::optional<double> alpha;
  std::string threshold_source = "bootstrap";
  std::optional<double> threshold;
  std::string components;
  std::string affected_from;
  Index wbpca_q = 0;
  Index theta_boot_count = 1000;
  Index theta_boot_size = 10000;
  std::uint64_t seed = 1;
};

inline int cmd_score(const ScoreArgs& a, const std::vector<std::string>& argv) {
  const fs::path mdir(a.model_dir);
  const fs::path out = a.out.empty() ? default_out_dir("score") : fs::path(a.out);
  const PcaModel model = load_model(mdir / "model.json");
  ComponentThresholds th = load_thresholds(mdir / "thresholds.json");
  const double alpha = a.alpha.value_or(th.alpha);
  if (alpha != th.alpha) th = requantile(th, alpha);
  const ThresholdSource src = parse_threshold_source(a.threshold_source);
  if (src == ThresholdSource::fixed && !a.threshold) throw InvalidArgument("--threshold-source fixed needs --threshold");

  std::vector<Method> methods;
  if (a.method == "all") methods = {Method::aad, Method::waad, Method::wbpca};
  else if (a.method == "aad") methods = {Method::aad};
  else if (a.method == "waad") methods = {Method::waad};
  else if (a.method == "wbpca") methods = {Method::wbpca};
  else throw InvalidArgument("--method must be aad, waad, wbpca or all");
  if (src == ThresholdSource::chi_square && (methods.size() != 1 || methods[0] != Method::aad)) {
    throw InvalidArgument("the chi-square threshold applies to AAD only; use --method aad");
  }

  std::optional<ReferenceScores> reference;
  if (src == ThresholdSource::bootstrap || src == ThresholdSource::empirical) {
    const fs::path rp = mdir / "reference.csv";
    if (!fs::exists(rp)) throw DataError("missing bootstrap artifact: " + rp.string());
    reference = load_reference(rp);
  }
  const Loaded l = load_inputs(a.in);
  const Matrix x = standardize(model.standardizer, align_features(l.data, model.feature_names));

  ScoreThresholdOptions opt;
  opt.source = src;
  opt.alpha = alpha;
  opt.reference = reference ? &*reference : nullptr;
  opt.boot = {a.theta_boot_count, a.theta_boot_size, a.seed};
  opt.fixed_threshold = a.threshold.value_or(0.0);

  Manifest man("score", argv);
  man.input(mdir / "model.json");
  man.input(mdir / "thresholds.json");
  if (reference) man.input(mdir / "reference.csv");
  for (const auto& f : a.in.files) man.input(f);

  std::vector<std::pair<std::string, ScoreReport>> reports;
  Json summary;
  summary["rows"] = x.rows();
  summary["alpha"] = alpha;
  std::ostringstream text;
  for (Method m : methods) {
    std::string name(to_string(m));
    std::transform(name.begin(), name.end(), name.begin(), ::tolower);
    Json js;
    ScoreReport r;
    if (m == Method::aad) {
      AffectedComponents aff;
      if (!a.components.empty()) {
        aff = fixed_affected(model, parse_index_list(a.components, "--components"), x);
      } else if (!a.affected_from.empty()) {
        const Json prev = pcaids::detail::read_json(a.affected_from);
        std::vector<Index> comps;
        for (Index c : prev.at("methods").at("aad").at("affected").get<std::vector<Index>>()) comps.push_back(c - 1);
        aff = comps.empty() ? AffectedComponents{} : fixed_affected(model, comps, x);
      } else {
        aff = detect_affected(model, th, x);
      }
      try {
        r = aad_score(model, aff, x, opt);
      } catch (const EmptyAffectedSet& e) {
        std::cout << e.what() << "\n";
        r.method = Method::aad;
        r.scores = Vector::Zero(x.rows());
        r.flags.assign(static_cast<std::size_t>(x.rows()), false);
        r.threshold_source = src;
        r.alpha = alpha;
        r.affected = aff;
        js["note"] = e.what();
      }
    } else if (m == Method::waad) {
      r = waad_score(model, th, x, opt);
    } else {
      const Index q = a.wbpca_q > 0 ? a.wbpca_q : kaiser_rank(model.lambda);
      if (src == ThresholdSource::fixed) r = wbpca_score(model, q, x, opt.fixed_threshold);
      else r = wbpca_score(model, q, x, opt);
    }
    js["threshold"] = r.threshold;
    js["threshold_source"] = std::string(to_string(r.threshold_source));
    js["q"] = r.q;
    js["flagged"] = r.flagged_count();
    js["flag_rate"] = static_cast<double>(r.flagged_count()) / static_cast<double>(x.rows());
    if (r.affected) {
      std::vector<Index> one;
      for (Index j : r.affected->affected) one.push_back(j + 1);
      js["affected"] = one;
      if (r.affected->s_u.size() > 0) js["s_u"] = pcaids::detail::to_std(r.affected->s_u);
    }
    if (r.weights.size() > 0) js["weights"] = pcaids::detail::to_std(r.weights);
    text << to_string(m) << ": threshold " << format_double(r.threshold) << " (" << to_string(r.threshold_source)
         << "), flagged " << r.flagged_count() << " of " << x.rows();
    if (l.data.has_labels) {
      const auto pos = std::count(l.data.labels.begin(), l.data.labels.end(), true);
      if (pos > 0 && pos < x.rows()) {
        const Rates rt = rates_at_threshold(std::span<const double>(r.scores.data(), static_cast<std::size_t>(x.rows())),
                                            l.data.labels, r.threshold);
        js["detection_rate"] = rt.detection_rate;
        js["false_alarm_rate"] = rt.false_alarm_rate;
        text << ", detection " << pct(rt.detection_rate) << ", false alarm " << pct(rt.false_alarm_rate);
      } else if (pos == x.rows()) {
        js["detection_rate"] = static_cast<double>(r.flagged_count()) / static_cast<double>(x.rows());
        text << ", detection " << pct(js["detection_rate"].get<double>());
      }
    }
    text << "\n";
    summary["methods"][name] = js;
    reports.emplace_back(name, std::move(r));
  }

  fs::create_directories(out);
  std::ostringstream csv;
  for (const auto& [name, r] : reports) {
    csv << "# method=" << name << " threshold=" << format_double(r.threshold)
        << " source=" << to_string(r.threshold_source) << " alpha=" << format_double(r.alpha) << " q=" << r.q;
    if (r.affected) {
      csv << " affected=";
      for (std::size_t k = 0; k < r.affected->affected.size(); ++k) csv << (k ? ";" : "") << r.affected->affected[k] + 1;
    }
    csv << "\n";
  }
  csv << "row";
  if (l.data.has_labels) csv << ",label,category";
  for (const auto& [name, r] : reports) csv << ',' << name << "_score," << name << "_threshold," << name << "_flag";
  csv << "\n";
  for (Index i = 0; i < x.rows(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    csv << l.data.row_ids[ui];
    if (l.data.has_labels) csv << ',' << (l.data.labels[ui] ? 1 : 0) << ',' << l.data.categories[ui];
    for (const auto& [name, r] : reports) {
      csv << ',' << format_double(r.scores(i)) << ',' << format_double(r.threshold) << ',' << (r.flags[ui] ? 1 : 0);
    }
    csv << "\n";
  }
  pcaids::detail::write_text(out / "scores.csv", csv.str());
  pcaids::detail::write_text(out / "score_summary.json", dump_json(summary));
  pcaids::detail::write_text(out / "score_report.txt", text.str());
  for (const char* f : {"scores.csv", "score_summary.json", "score_report.txt"}) man.artifact(out / f);
  man.param("alpha", alpha);
  man.param("threshold_source", a.threshold_source);
  man.param("theta_boot_count", a.theta_boot_count);
  man.param("theta_boot_size", a.theta_boot_size);
  man.param("seed", a.seed);
  man.write(out);
  std::cout << text.str();
  return 0;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config;
  std::string out;
  std::string mode = "synthetic";
  std::vector<double> c_values;
  std::optional<double> rho;
  std::optional<std::string> shift_policy;
  std::optional<Index> replicates;
  std::optional<Index> n;
  std::optional<Index> m;
  std::optional<Index> p;
  std::optional<Index> k;
  std::optional<Index> anomaly_count;
  std::optional<double> alpha;
  std::optional<std::uint64_t> seed;
  std::optional<Index> boot_count;
  std::optional<Index> boot_size;
  // contamination mode
  std::string model_dir;
  InputOptions clean;
  std::vector<std::string> attack_files;
  std::vector<std::string> categories;
  bool rare = false;
  Index rare_below = 1000;
};

/// Experiment settings from a JSON config; command-line overrides win.
inline std::pair<ExperimentConfig, std::vector<double>> experiment_config(const SimulateArgs& a) {
  ExperimentConfig cfg;
  std::vector<double> cs{cfg.c};
  if (!a.config.empty()) {
    const Json j = pcaids::detail::read_json(a.config);
    try {
      cfg.n = j.value("n", cfg.n);
      cfg.m = j.value("m", cfg.m);
      cfg.p = j.value("p", cfg.p);
      cfg.rho = j.value("rho", cfg.rho);
      cfg.anomaly_count = j.value("anomaly_count", cfg.anomaly_count);
      cfg.k = j.value("k", cfg.k);
      cfg.replicates = j.value("replicates", cfg.replicates);
      cfg.alpha = j.value("alpha", cfg.alpha);
      cfg.seed = j.value("seed", cfg.seed);
      cfg.boot_count = j.value("boot_count", cfg.boot_count);
      cfg.boot_size = j.value("boot_size", cfg.boot_size);
      cfg.theta_boot_count = j.value("theta_boot_count", cfg.theta_boot_count);
      cfg.grid = j.value("grid", cfg.grid);
      if (j.contains("shift_policy")) cfg.policy = parse_shift_policy(j["shift_policy"].get<std::string>());
      if (j.contains("aad_threshold_source")) {
        cfg.aad_source = parse_threshold_source(j["aad_threshold_source"].get<std::string>());
      }
      if (j.contains("c")) cs = j["c"].is_array() ? j["c"].get<std::vector<double>>() : std::vector<double>{j["c"].get<double>()};
    } catch (const nlohmann::json::exception& e) {
      throw DataError(a.config + ": " + e.what());
    }
  }
  if (!a.c_values.empty()) cs = a.c_values;
  if (a.rho) cfg.rho = *a.rho;
  if (a.shift_policy) cfg.policy = parse_shift_policy(*a.shift_policy);
  if (a.replicates) cfg.replicates = *a.replicates;
  if (a.n) cfg.n = *a.n;
  if (a.m) cfg.m = *a.m;
  if (a.p) cfg.p = *a.p;
  if (a.k) cfg.k = *a.k;
  if (a.anomaly_count) cfg.anomaly_count = *a.anomaly_count;
  if (a.alpha) cfg.alpha = *a.alpha;
  if (a.seed) cfg.seed = *a.seed;
  if (a.boot_count) cfg.boot_count = *a.boot_count;
  if (a.boot_size) cfg.boot_size = *a.boot_size;
  cfg.validate();
  return {cfg, cs};
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), ::tolower);
  return out;
}

inline std::string summary_table(const ExperimentSummary& s, const std::string& title) {
  std::ostringstream os;
  os << title << "\nmethod  mean_auc  sd_auc  se_auc";
  for (double f : s.report_fprs) os << "  tpr@" << f;
  os << "  mean_flag_rate\n";
  for (const auto& ms : s.methods) {
    os << to_string(ms.method) << std::fixed << std::setprecision(4) << "  " << ms.mean_auc() << "  " << ms.sd_auc()
       << "  " << ms.se_auc();
    for (std::size_t k = 0; k < s.report_fprs.size(); ++k) os << "  " << s.tpr_stats(ms.method, k).first;
    os << "  " << (ms.flag_rate.empty() ? 0.0 : mean(ms.flag_rate)) << std::defaultfloat << "\n";
  }
  return os.str();
}

inline Json summary_json(const ExperimentSummary& s) {
  Json j = Json::object();
  for (const auto& ms : s.methods) {
    Json m;
    m["mean_auc"] = ms.mean_auc();
    m["sd_auc"] = ms.sd_auc();
    m["se_auc"] = ms.se_auc();
    Json tpr = Json::object();
    for (std::size_t k = 0; k < s.report_fprs.size(); ++k) {
      const auto [mu, se] = s.tpr_stats(ms.method, k);
      tpr[format_double(s.report_fprs[k])] = {{"mean", mu}, {"se", se}};
    }
    m["tpr_at_fpr"] = tpr;
    m["mean_flag_rate"] = ms.flag_rate.empty() ? 0.0 : mean(ms.flag_rate);
    m["mean_detection_rate"] = ms.detection_rate.empty() ? 0.0 : mean(ms.detection_rate);
    m["mean_false_alarm_rate"] = ms.false_alarm_rate.empty() ? 0.0 : mean(ms.false_alarm_rate);
    j[lower(to_string(ms.method))] = m;
  }
  return j;
}

inline std::string averaged_csv(const ExperimentSummary& s) {
  std::vector<std::pair<std::string, RocCurve>> curves;
  for (const auto& ms : s.methods) {
    curves.emplace_back(ms.method == Method::mahalanobis ? "true" : lower(to_string(ms.method)), ms.mean_curve);
  }
  return averaged_roc_csv(curves);
}

inline int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv) {
  const fs::path out = a.out.empty() ? default_out_dir("simulate") : fs::path(a.out);
  fs::create_directories(out);
  Manifest man("simulate", argv);
  if (!a.config.empty()) man.input(a.config);
  std::string text;
  Json summary;

  if (a.mode == "synthetic") {
    auto [cfg, cs] = experiment_config(a);
    man.param("n", cfg.n);
    man.param("m", cfg.m);
    man.param("p", cfg.p);
    man.param("rho", cfg.rho);
    man.param("k", cfg.k);
    man.param("shift_policy", std::string(to_string(cfg.policy)));
    man.param("replicates", cfg.replicates);
    man.param("alpha", cfg.alpha);
    man.param("seed", cfg.seed);
    man.param("boot_count", cfg.boot_count);
    man.param("boot_size", cfg.effective_boot_size());
    man.param("c", cs);
    for (double c : cs) {
      cfg.c = c;
      const ExperimentSummary s = replicate_experiments(cfg);
      const std::string tag = "c" + format_double(c);
      pcaids::detail::write_text(out / ("roc_" + tag + ".csv"), averaged_csv(s));
      man.artifact(out / ("roc_" + tag + ".csv"));
      text += summary_table(s, "c = " + format_double(c) + ", shift " + std::string(to_string(cfg.policy)) + ", " +
                                   std::to_string(cfg.replicates) + " replicates") + "\n";
      summary[tag] = summary_json(s);
    }
  } else if (a.mode == "contamination") {
    if (a.model_dir.empty()) throw InvalidArgument("contamination mode needs --model-dir");
    const fs::path mdir(a.model_dir);
    TrainingResult tr;
    tr.model = load_model(mdir / "model.json");
    tr.thresholds = load_thresholds(mdir / "thresholds.json");
    const fs::path rp = mdir / "reference.csv";
    if (!fs::exists(rp)) throw DataError("missing bootstrap artifact: " + rp.string());
    tr.reference = load_reference(rp);
    ContaminationConfig cc;
    cc.alpha = a.alpha.value_or(tr.thresholds.alpha);
    if (cc.alpha != tr.thresholds.alpha) tr.thresholds = requantile(tr.thresholds, cc.alpha);
    if (a.replicates) cc.replicates = *a.replicates;
    if (a.seed) cc.seed = *a.seed;
    const Loaded clean = load_inputs(a.clean);
    InputOptions atk = a.clean;
    atk.files = a.attack_files.empty() ? a.clean.files : a.attack_files;
    atk.split = "none";
    atk.rows.clear();
    const Loaded attacks = load_inputs(atk);
    std::vector<std::string> cats = a.categories;
    if (a.rare) cats = rare_categories(attacks.data, a.rare_below);
    std::vector<Index> ci = rows_where(clean.data, false);
    std::vector<Index> ai;
    for (Index i : rows_where(attacks.data, true)) {
      const auto& cat = attacks.data.categories[static_cast<std::size_t>(i)];
      if (cats.empty() || std::find(cats.begin(), cats.end(), cat) != cats.end()) ai.push_back(i);
    }
    const Matrix clean_pool = align_features(subset(clean.data, ci), tr.model.feature_names);
    const Matrix attack_pool = align_features(subset(attacks.data, ai), tr.model.feature_names);
    for (const auto& f : a.clean.files) man.input(f);
    for (const auto& f : a.attack_files) man.input(f);
    man.param("alpha", cc.alpha);
    man.param("replicates", cc.replicates);
    man.param("seed", cc.seed);
    man.param("categories", cats);
    const ExperimentSummary s = contamination_experiments(tr, clean_pool, attack_pool, cc);
    pcaids::detail::write_text(out / "roc_contamination.csv", averaged_csv(s));
    man.artifact(out / "roc_contamination.csv");
    std::string title = std::to_string(cc.clean_count) + " clean + " + std::to_string(cc.attack_count) + " attack rows";
    if (!cats.empty()) {
      title += ", categories:";
      for (const auto& c : cats) title += " " + c;
    }
    text = summary_table(s, title);
    summary["contamination"] = summary_json(s);
  } else {
    throw InvalidArgument("--mode must be synthetic or contamination");
  }
  pcaids::detail::write_text(out / "summary.txt", text);
  pcaids::detail::write_text(out / "summary.json", dump_json(summary));
  man.artifact(out / "summary.txt");
  man.artifact(out / "summary.json");
  man.write(out);
  std::cout << text;
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string scores;
  std::vector<std::string> columns;
  std::string label_column = "label";
  std::optional<double> threshold;
  std::string out;
};

inline int cmd_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv) {
  const fs::path out = a.out.empty() ? default_out_dir("evaluate") : fs::path(a.out);
  const CsvTable t = read_csv_table(a.scores);
  const Index lc = t.column(a.label_column);
  if (lc < 0) throw DataError(a.scores + ": no label column '" + a.label_column + "'");
  std::vector<bool> labels;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    labels.push_back(parse_label(t.rows[i][static_cast<std::size_t>(lc)], a.scores + " row " + std::to_string(i + 1)));
  }
  std::vector<std::string> cols = a.columns;
  if (cols.empty()) {
    for (const auto& h : t.header) {
      if (h.size() > 6 && h.compare(h.size() - 6, 6, "_score") == 0) cols.push_back(h);
    }
    if (cols.empty() && t.column("score") >= 0) cols.push_back("score");
  }
  if (cols.empty()) throw DataError(a.scores + ": no score columns");
  Manifest man("evaluate", argv);
  man.input(a.scores);
  fs::create_directories(out);
  std::ostringstream text;
  for (const auto& col : cols) {
    const Index sc = t.column(col);
    if (sc < 0) throw DataError(a.scores + ": no column '" + col + "'");
    std::vector<double> s;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      s.push_back(parse_cell(t.rows[i][static_cast<std::size_t>(sc)], a.scores + " row " + std::to_string(i + 1)));
    }
    const RocCurve roc = roc_curve(s, labels);
    const std::string stem = col.size() > 6 && col.compare(col.size() - 6, 6, "_score") == 0 ? col.substr(0, col.size() - 6) : col;
    pcaids::detail::write_text(out / ("roc_" + stem + ".csv"), roc_csv(roc));
    man.artifact(out / ("roc_" + stem + ".csv"));
    text << stem << ": auc " << format_double(roc.auc);
    std::optional<Rates> rt;
    if (a.threshold) {
      rt = rates_at_threshold(s, labels, *a.threshold);
    } else if (const Index fc = t.column(stem + "_flag"); fc >= 0) {
      std::size_t tp = 0, fp = 0, pos = 0;
      for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const bool f = t.rows[i][static_cast<std::size_t>(fc)] == "1";
        pos += labels[i] ? 1 : 0;
        tp += f && labels[i] ? 1 : 0;
        fp += f && !labels[i] ? 1 : 0;
      }
      rt = Rates{static_cast<double>(tp) / static_cast<double>(pos),
                 static_cast<double>(fp) / static_cast<double>(labels.size() - pos)};
    }
    if (rt) text << ", detection " << pct(rt->detection_rate) << ", false alarm " << pct(rt->false_alarm_rate);
    text << "\n";
  }
  pcaids::detail::write_text(out / "rates.txt", text.str());
  man.artifact(out / "rates.txt");
  man.write(out);
  std::cout << text.str();
  return 0;
}

// ---------------------------------------------------------------- entry point

/// Runs the tool; returns the process exit code.
inline int run(std::vector<std::string> args) {
  if (args.empty()) args.emplace_back("pcaids");
  // --replay: take the recorded arguments, keeping any later --out / --threads.
  for (std::size_t i = 1; i + 1 < args.size(); ++i) {
    if (args[i] != "--replay") continue;
    try {
      const Json j = pcaids::detail::read_json(args[i + 1]);
      if (j.value("format", std::string()) != "pcaids-manifest") throw DataError(args[i + 1] + ": not a manifest");
      std::vector<std::string> rest(args.begin() + static_cast<std::ptrdiff_t>(i) + 2, args.end());
      std::vector<std::string> prefix(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(i));
      args = prefix;
      for (const auto& s : j.at("args")) args.push_back(s.get<std::string>());
      args.insert(args.end(), rest.begin(), rest.end());
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return static_cast<int>(e.exit_code());
    }
    break;
  }

  CLI::App app{"PCA-based unsupervised network intrusion detection", "pcaids"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = all cores)")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "fit model, component thresholds and reference scores");
  ta.in.add_to(train_cmd);
  train_cmd->add_option("--out", ta.out, "output directory")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  train_cmd->add_option("--boot-count", ta.boot_count, "bootstrap replicates B")->capture_default_str();
  train_cmd->add_option("--boot-size", ta.boot_size, "rows per bootstrap replicate")->capture_default_str();
  train_cmd->add_option("--alpha", ta.alpha, "significance level")->capture_default_str();
  train_cmd->add_option("--seed", ta.seed, "root random seed")->capture_default_str();
  train_cmd->add_option("--reference-size", ta.reference_size, "training rows kept for score thresholds (0 = all)")
      ->capture_default_str();
  train_cmd->add_flag("--drop-constant-columns", ta.drop_constant, "drop zero-variance columns instead of failing");

  DiagnoseArgs da;
  auto* diag_cmd = app.add_subcommand("diagnose", "look for outliers in the training data");
  da.in.add_to(diag_cmd);
  diag_cmd->add_option("--model-dir", da.model_dir, "directory written by train")->required();
  diag_cmd->add_option("--out", da.out, "output directory")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  diag_cmd->add_option("--center-band", da.cfg.center_band, "tolerated |median r_j - 1|")->capture_default_str();
  diag_cmd->add_option("--loading-cutoff", da.cfg.loading_cutoff, "heavy loading threshold")->capture_default_str();
  diag_cmd->add_option("--row-quantile", da.cfg.row_quantile, "normal quantile for extreme values")->capture_default_str();
  diag_cmd->add_flag("--remove-and-retrain", da.remove_and_retrain, "drop flagged rows and retrain into --out");
  diag_cmd->add_flag("--yes", da.yes, "do not ask for confirmation");

  ScoreArgs sa;
  auto* score_cmd = app.add_subcommand("score", "score monitoring data");
  sa.in.add_to(score_cmd);
  score_cmd->add_option("--model-dir", sa.model_dir, "directory written by train")->required();
  score_cmd->add_option("--out", sa.out, "output directory")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  score_cmd->add_option("--method", sa.method, "aad | waad | wbpca | all")->capture_default_str();
  score_cmd->add_option("--alpha", sa.alpha, "significance level (default: the thresholds file)");
  score_cmd->add_option("--threshold-source", sa.threshold_source, "bootstrap | empirical | chi-square | fixed")
      ->capture_default_str();
  score_cmd->add_option("--threshold", sa.threshold, "score threshold for --threshold-source fixed");
  score_cmd->add_option("--components", sa.components, "AAD component set, 1-based, e.g. 6,11,21,26");
  score_cmd->add_option("--affected-from", sa.affected_from, "reuse the AAD set of an earlier score_summary.json");
  score_cmd->add_option("--wbpca-q", sa.wbpca_q, "WBPCA retained components (0 = Kaiser rule)")->capture_default_str();
  score_cmd->add_option("--theta-boot-count", sa.theta_boot_count, "bootstrap replicates for the score threshold")
      ->capture_default_str();
  score_cmd->add_option("--theta-boot-size", sa.theta_boot_size, "rows per score-threshold replicate")
      ->capture_default_str();
  score_cmd->add_option("--seed", sa.seed, "seed for the score-threshold bootstrap")->capture_default_str();

  SimulateArgs ma;
  auto* sim_cmd = app.add_subcommand("simulate", "simulation or contamination experiments");
  sim_cmd->add_option("--config", ma.config, "experiment config (JSON)");
  sim_cmd->add_option("--out", ma.out, "output directory")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  sim_cmd->add_option("--mode", ma.mode, "synthetic | contamination")->capture_default_str();
  sim_cmd->add_option("--c", ma.c_values, "shift sizes")->delimiter(',');
  sim_cmd->add_option("--rho", ma.rho, "AR(1) correlation");
  sim_cmd->add_option("--shift-policy", ma.shift_policy, "random | first | last");
  sim_cmd->add_option("--replicates", ma.replicates, "independent experiments");
  sim_cmd->add_option("--n", ma.n, "training rows");
  sim_cmd->add_option("--m", ma.m, "test batch rows");
  sim_cmd->add_option("--p", ma.p, "features");
  sim_cmd->add_option("--k", ma.k, "shifted eigenvectors");
  sim_cmd->add_option("--anomaly-count", ma.anomaly_count, "shifted rows per test batch");
  sim_cmd->add_option("--alpha", ma.alpha, "significance level");
  sim_cmd->add_option("--seed", ma.seed, "root seed");
  sim_cmd->add_option("--boot-count", ma.boot_count, "bootstrap replicates");
  sim_cmd->add_option("--boot-size", ma.boot_size, "rows per bootstrap replicate (0 = m)");
  sim_cmd->add_option("--model-dir", ma.model_dir, "contamination: trained model directory");
  ma.clean.add_to(sim_cmd, false);
  sim_cmd->add_option("--attack-input", ma.attack_files, "contamination: files holding attack rows");
  sim_cmd->add_option("--category", ma.categories, "contamination: restrict attacks to these categories");
  sim_cmd->add_flag("--rare", ma.rare, "contamination: pool all attack categories with < --rare-below rows");
  sim_cmd->add_option("--rare-below", ma.rare_below, "rare-category cutoff")->capture_default_str();

  EvaluateArgs ea;
  auto* eval_cmd = app.add_subcommand("evaluate", "ROC and rates from a score CSV");
  eval_cmd->add_option("--scores", ea.scores, "score CSV with a label column")->required();
  eval_cmd->add_option("--column", ea.columns, "score column(s) (default: every *_score column)");
  eval_cmd->add_option("--label-column", ea.label_column, "label column")->capture_default_str();
  eval_cmd->add_option("--threshold", ea.threshold, "rates at this threshold (default: the *_flag column)");
  eval_cmd->add_option("--out", ea.out, "output directory")->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  // Recorded arguments exclude the program name and --threads, which never change results.
  std::vector<std::string> recorded;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--threads" && i + 1 < args.size()) {
      ++i;
      continue;
    }
    if (args[i].rfind("--threads=", 0) == 0) continue;
    recorded.push_back(args[i]);
  }

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::usage);
  }

  try {
    set_thread_count(threads);
    if (train_cmd->parsed()) return cmd_train(ta, recorded);
    if (diag_cmd->parsed()) return cmd_diagnose(da, recorded);
    if (score_cmd->parsed()) return cmd_score(sa, recorded);
    if (sim_cmd->parsed()) return cmd_simulate(ma, recorded);
    if (eval_cmd->parsed()) return cmd_evaluate(ea, recorded);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::numerical);
  }
  return static_cast<int>(ExitCode::usage);
}

inline int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace pcaids::cli
