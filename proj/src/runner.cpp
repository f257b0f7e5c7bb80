#include "arn/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace arn {

LogLevel log_level() {
  const char* env = std::getenv("ARN_LOG");
  if (!env) return LogLevel::Info;
  const std::string v(env);
  if (v == "quiet") return LogLevel::Quiet;
  if (v == "debug") return LogLevel::Debug;
  if (v == "info") return LogLevel::Info;
  return LogLevel::Info;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::Info) std::cerr << "[arn] " << msg << '\n';
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::Debug) std::cerr << "[arn:debug] " << msg << '\n';
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

using IniData = std::map<std::string, std::map<std::string, std::string>>;

IniData parse_ini(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open config file: " + path);
  IniData data;
  std::string line, section;
  int line_no = 0;
  while (std::getline(file, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    std::string value = trim(t.substr(eq + 1));
    const auto hash = value.find(" #");
    if (hash != std::string::npos) value = trim(value.substr(0, hash));
    data[section][trim(t.substr(0, eq))] = value;
  }
  return data;
}

struct IniView {
  const IniData& data;

  std::string get(const std::string& sec, const std::string& key, const std::string& dflt) const {
    auto s = data.find(sec);
    if (s == data.end()) return dflt;
    auto k = s->second.find(key);
    return k == s->second.end() ? dflt : k->second;
  }
  int get_int(const std::string& sec, const std::string& key, int dflt) const {
    const auto v = get(sec, key, "");
    return v.empty() ? dflt : std::stoi(v);
  }
  double get_double(const std::string& sec, const std::string& key, double dflt) const {
    const auto v = get(sec, key, "");
    return v.empty() ? dflt : std::stod(v);
  }
  std::uint64_t get_u64(const std::string& sec, const std::string& key,
                        std::uint64_t dflt) const {
    const auto v = get(sec, key, "");
    return v.empty() ? dflt : std::stoull(v);
  }
  bool get_bool(const std::string& sec, const std::string& key, bool dflt) const {
    const auto v = get(sec, key, "");
    if (v.empty()) return dflt;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("bad boolean value '" + v + "' for " + sec + "." + key);
  }
};

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    const std::string t = trim(tok);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

}  // namespace

void parse_method(const std::string& name, ModelKind* kind, FeatureKind* feature) {
  *feature = FeatureKind::None;
  if (name == "hc") {
    *kind = ModelKind::FeatureHead;
    *feature = FeatureKind::Hc;
  } else if (name == "cbh") {
    *kind = ModelKind::FeatureHead;
    *feature = FeatureKind::Cbh;
  } else if (name == "cbs") {
    *kind = ModelKind::FeatureHead;
    *feature = FeatureKind::Cbs;
  } else {
    *kind = model_kind_from_string(name);
    if (*kind == ModelKind::FeatureHead) *feature = FeatureKind::Hc;
  }
}

std::string method_name(ModelKind kind, FeatureKind feature) {
  switch (feature) {
    case FeatureKind::Hc: return "hc";
    case FeatureKind::Cbh: return "cbh";
    case FeatureKind::Cbs: return "cbs";
    case FeatureKind::None: break;
  }
  return model_kind_name(kind);
}

RunConfig RunConfig::load(const std::string& path) {
  const IniData data = parse_ini(path);
  const IniView ini{data};
  RunConfig cfg;

  cfg.source = ini.get("dataset", "source", cfg.source);
  cfg.synth_classes = ini.get_int("dataset", "classes", cfg.synth_classes);
  cfg.synth_channels = ini.get_int("dataset", "channels", cfg.synth_channels);
  cfg.synth_segments_per_class =
      ini.get_int("dataset", "segments_per_class", cfg.synth_segments_per_class);
  cfg.synth_noise_sigma = ini.get_double("dataset", "noise_sigma", cfg.synth_noise_sigma);
  cfg.dataset_seed = ini.get_u64("dataset", "seed", cfg.dataset_seed);
  cfg.test_fraction = ini.get_double("dataset", "test_fraction", cfg.test_fraction);
  cfg.normalize = ini.get_bool("dataset", "normalize", cfg.normalize);

  cfg.window.t_narrow = ini.get_int("window", "narrow", cfg.window.t_narrow);
  cfg.window.t_wide = ini.get_int("window", "wide", cfg.window.t_wide);
  cfg.window.stride = ini.get_int("window", "stride", cfg.window.stride);
  cfg.t_single = ini.get_int("window", "single", cfg.t_single);

  parse_method(ini.get("model", "kind", "arn"), &cfg.kind, &cfg.feature);
  cfg.model.arn.base_width = ini.get_int("model", "base_width", cfg.model.arn.base_width);
  cfg.model.arn.resnet50_order =
      ini.get_bool("model", "resnet50_order", cfg.model.arn.resnet50_order);
  cfg.model.arn.bn_epsilon = ini.get_double("model", "bn_epsilon", cfg.model.arn.bn_epsilon);
  cfg.model.dropout_rate = ini.get_double("model", "dropout", cfg.model.dropout_rate);
  const auto units = ini.get("model", "mlp_units", "");
  if (!units.empty()) {
    cfg.model.mlp_units.clear();
    for (const auto& u : split_csv(units)) cfg.model.mlp_units.push_back(std::stoi(u));
  }
  cfg.model.cnn_dense = ini.get_int("model", "cnn_dense", cfg.model.cnn_dense);
  cfg.model.lstm_hidden = ini.get_int("model", "lstm_hidden", cfg.model.lstm_hidden);
  cfg.model.lstm_proj = ini.get_int("model", "lstm_proj", cfg.model.lstm_proj);
  cfg.model.lstm_layers = ini.get_int("model", "lstm_layers", cfg.model.lstm_layers);
  cfg.model.hybrid_hidden = ini.get_int("model", "hybrid_hidden", cfg.model.hybrid_hidden);
  cfg.model.ae_hidden = ini.get_int("model", "ae_hidden", cfg.model.ae_hidden);
  cfg.model.ae_bottleneck = ini.get_int("model", "ae_bottleneck", cfg.model.ae_bottleneck);
  cfg.model.head_dense = ini.get_int("model", "head_dense", cfg.model.head_dense);

  cfg.train_cfg.epochs = ini.get_int("train", "epochs", cfg.train_cfg.epochs);
  cfg.train_cfg.batch_size = ini.get_int("train", "batch_size", cfg.train_cfg.batch_size);
  cfg.train_cfg.lr = ini.get_double("train", "lr", cfg.train_cfg.lr);
  cfg.train_cfg.rho = ini.get_double("train", "rho", cfg.train_cfg.rho);
  cfg.train_cfg.adadelta_epsilon =
      ini.get_double("train", "epsilon", cfg.train_cfg.adadelta_epsilon);
  cfg.train_cfg.seed = ini.get_u64("train", "seed", cfg.train_cfg.seed);
  cfg.train_cfg.pretrain_epochs =
      ini.get_int("train", "pretrain_epochs", cfg.train_cfg.pretrain_epochs);

  cfg.codebook_words = ini.get_int("codebook", "words", cfg.codebook_words);
  cfg.codebook_window = ini.get_int("codebook", "window", cfg.codebook_window);
  cfg.codebook_stride = ini.get_int("codebook", "stride", cfg.codebook_stride);

  const auto methods = ini.get("bench", "methods", "");
  if (!methods.empty()) cfg.bench_methods = split_csv(methods);
  cfg.bench_sweep = ini.get_bool("bench", "sweep", cfg.bench_sweep);
  cfg.bench_seeds = ini.get_int("bench", "seeds", cfg.bench_seeds);

  cfg.out_dir = ini.get("output", "dir", cfg.out_dir);
  return cfg;
}

void RunConfig::validate() const {
  if (source != "synthetic" && !fs::exists(source))
    throw ConfigError("dataset file does not exist: " + source);
  if (source == "synthetic") {
    if (synth_classes < 2) throw ConfigError("synthetic dataset needs at least 2 classes");
    if (synth_channels < 1) throw ConfigError("synthetic dataset needs at least 1 channel");
    if (synth_segments_per_class < 1)
      throw ConfigError("synthetic dataset needs at least 1 segment per class");
    if (synth_noise_sigma < 0.0) throw ConfigError("noise sigma must be non-negative");
  }
  if (test_fraction <= 0.0 || test_fraction >= 1.0)
    throw ConfigError("test fraction must be in (0,1)");
  if (kind == ModelKind::Arn) window.validate();
  if (kind != ModelKind::Arn && single_window_length() < 1)
    throw ConfigError("single-window length must be positive");
  train_cfg.validate();
  if (codebook_words < 2 || codebook_window < 1 || codebook_stride < 1)
    throw ConfigError("bad codebook parameters");
  if (bench_seeds < 1) throw ConfigError("bench seeds must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (model.dropout_rate < 0.0 || model.dropout_rate >= 1.0)
    throw ConfigError("dropout rate must be in [0,1)");
}

SensorSequence load_run_dataset(const RunConfig& cfg) {
  if (cfg.source == "synthetic") {
    log_debug("generating synthetic dataset (K=" + std::to_string(cfg.synth_classes) +
              ", D=" + std::to_string(cfg.synth_channels) + ")");
    return synth_generate(cfg.synth_classes, cfg.synth_channels, cfg.synth_segments_per_class,
                          cfg.synth_noise_sigma, cfg.dataset_seed);
  }
  log_debug("loading dataset from " + cfg.source);
  return load_csv(cfg.source);
}

DatasetSplit build_window_split(const RunConfig& cfg, const SensorSequence& seq) {
  const std::uint64_t split_seed = cfg.dataset_seed + 1;
  if (cfg.kind == ModelKind::Arn) {
    auto paired = paired_windows(seq, cfg.window);
    if (paired.input_too_short)
      throw ConfigError("sequence shorter than the wide window, no pairs produced");
    return stratified_split(std::move(paired.pairs), cfg.window.t_narrow, cfg.window.t_wide,
                            seq.channels, seq.classes, cfg.test_fraction, split_seed);
  }
  const int t = cfg.single_window_length();
  auto slid = sliding_windows(seq, t, cfg.window.stride);
  if (slid.input_too_short)
    throw ConfigError("sequence shorter than the window, no windows produced");
  std::vector<WindowPair> pairs;
  pairs.reserve(slid.windows.size());
  for (auto& w : slid.windows) {
    WindowPair p;
    p.wide = std::move(w.values);
    p.label = w.label;
    p.end_index = w.end_index;
    pairs.push_back(std::move(p));
  }
  return stratified_split(std::move(pairs), 0, t, seq.channels, seq.classes, cfg.test_fraction,
                          split_seed);
}

std::vector<double> FeaturePipeline::extract(const WindowPair& pair) const {
  switch (kind) {
    case FeatureKind::Hc: return hc_features(pair.wide, window_rows, channels);
    case FeatureKind::Cbh: return codebook_assign_hard(pair.wide, window_rows, channels, codebook);
    case FeatureKind::Cbs: return codebook_assign_soft(pair.wide, window_rows, channels, codebook);
    case FeatureKind::None: break;
  }
  throw ConfigError("feature pipeline has no extractor kind");
}

namespace {

DatasetSplit extract_feature_rows(const FeaturePipeline& p, const DatasetSplit& windows) {
  DatasetSplit out;
  out.classes = windows.classes;
  out.t_narrow = 0;
  out.t_wide = 0;
  auto convert = [&](const std::vector<WindowPair>& src, std::vector<WindowPair>& dst) {
    dst.reserve(src.size());
    for (const auto& w : src) {
      WindowPair f;
      f.wide = p.extract(w);
      f.label = w.label;
      f.end_index = w.end_index;
      dst.push_back(std::move(f));
    }
  };
  convert(windows.train, out.train);
  convert(windows.test, out.test);
  out.channels = out.train.empty() ? 0 : static_cast<int>(out.train[0].wide.size());
  out.class_proportions = windows.class_proportions;
  return out;
}

void apply_feature_stats(const ChannelStats& stats, DatasetSplit& split) {
  for (auto* part : {&split.train, &split.test})
    for (auto& p : *part)
      for (std::size_t i = 0; i < p.wide.size(); ++i)
        p.wide[i] = (p.wide[i] - stats.mean[i]) / stats.stddev[i];
}

}  // namespace

DatasetSplit build_feature_split(const RunConfig& cfg, const DatasetSplit& windows,
                                 FeaturePipeline* pipeline) {
  pipeline->kind = cfg.feature == FeatureKind::None ? FeatureKind::Hc : cfg.feature;
  pipeline->window_rows = windows.t_wide;
  pipeline->channels = windows.channels;
  if (pipeline->kind == FeatureKind::Cbh || pipeline->kind == FeatureKind::Cbs) {
    std::vector<std::vector<double>> train_windows;
    train_windows.reserve(windows.train.size());
    for (const auto& p : windows.train) train_windows.push_back(p.wide);
    log_debug("fitting codebook on " + std::to_string(train_windows.size()) + " windows");
    pipeline->codebook =
        codebook_fit(train_windows, windows.t_wide, windows.channels, cfg.codebook_window,
                     cfg.codebook_stride, cfg.codebook_words, cfg.dataset_seed + 101);
  }
  DatasetSplit features = extract_feature_rows(*pipeline, windows);
  pipeline->stats = zscore_normalize(features);
  return features;
}

void save_feature_pipeline(const FeaturePipeline& p, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write feature pipeline: " + path);
  file << kCheckpointVersion << '\n';
  file << "feature=" << method_name(ModelKind::FeatureHead, p.kind) << '\n';
  file << "window_rows=" << p.window_rows << '\n';
  file << "channels=" << p.channels << '\n';
  file << std::setprecision(17);
  file << "cb.window=" << p.codebook.window << '\n';
  file << "cb.stride=" << p.codebook.stride_h << '\n';
  file << "cb.codewords=" << p.codebook.codewords << '\n';
  file << "cb.sigma=" << p.codebook.sigma << '\n';
  file << "cb.channels=" << p.codebook.per_channel.size() << '\n';
  auto write_vec = [&](const std::string& name, const std::vector<double>& v) {
    file << name << '=';
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) file << ' ';
      file << v[i];
    }
    file << '\n';
  };
  write_vec("stats.mean", p.stats.mean);
  write_vec("stats.std", p.stats.stddev);
  for (std::size_t c = 0; c < p.codebook.per_channel.size(); ++c)
    write_vec("cb.ch" + std::to_string(c), p.codebook.per_channel[c]);
  if (!file) throw IoError("feature pipeline write failed: " + path);
}

FeaturePipeline load_feature_pipeline(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open feature pipeline: " + path);
  std::string line;
  if (!std::getline(file, line) || line != kCheckpointVersion)
    throw IoError(path + ": feature pipeline version mismatch");
  FeaturePipeline p;
  int cb_channels = 0;
  std::map<std::string, std::vector<double>> vecs;
  while (std::getline(file, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "feature") {
      ModelKind mk;
      parse_method(value, &mk, &p.kind);
    } else if (key == "window_rows") {
      p.window_rows = std::stoi(value);
    } else if (key == "channels") {
      p.channels = std::stoi(value);
    } else if (key == "cb.window") {
      p.codebook.window = std::stoi(value);
    } else if (key == "cb.stride") {
      p.codebook.stride_h = std::stoi(value);
    } else if (key == "cb.codewords") {
      p.codebook.codewords = std::stoi(value);
    } else if (key == "cb.sigma") {
      p.codebook.sigma = std::stod(value);
    } else if (key == "cb.channels") {
      cb_channels = std::stoi(value);
    } else {
      std::vector<double> v;
      std::istringstream is(value);
      double x;
      while (is >> x) v.push_back(x);
      vecs[key] = std::move(v);
    }
  }
  p.stats.mean = vecs.at("stats.mean");
  p.stats.stddev = vecs.at("stats.std");
  for (int c = 0; c < cb_channels; ++c)
    p.codebook.per_channel.push_back(vecs.at("cb.ch" + std::to_string(c)));
  return p;
}

namespace {

ModelSpec make_model_spec(const RunConfig& cfg, const DatasetSplit& split) {
  ModelSpec spec = cfg.model;
  spec.kind = cfg.kind;
  spec.classes = split.classes;
  if (cfg.kind == ModelKind::FeatureHead) {
    spec.channels = split.channels;
    spec.input_t = 1;
  } else {
    spec.channels = split.channels;
    if (cfg.kind == ModelKind::Arn) {
      spec.arn.t_narrow = split.t_narrow;
      spec.arn.t_wide = split.t_wide;
      spec.input_t = split.t_narrow;
    } else {
      spec.input_t = split.t_wide;
      spec.arn.t_narrow = split.t_wide;
      spec.arn.t_wide = split.t_wide;
    }
  }
  return spec;
}

std::string f1_str(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

void write_history(const std::string& path, const TrainHistory& hist) {
  std::ofstream file(path);
  if (!file) throw IoError("cannot write history file: " + path);
  file << std::setprecision(17);
  for (std::size_t i = 0; i < hist.pretrain_loss.size(); ++i)
    file << "# pretrain " << i << ' ' << hist.pretrain_loss[i] << '\n';
  file << "# epoch loss train_fw test_fw\n";
  for (const auto& e : hist.epochs)
    file << e.epoch << ' ' << e.loss << ' ' << e.train_f1 << ' ' << e.test_f1 << '\n';
  if (!file) throw IoError("history write failed: " + path);
}

}  // namespace

std::string cmd_synth(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.source != "synthetic")
    throw ConfigError("synth command requires [dataset] source = synthetic");
  const SensorSequence seq = load_run_dataset(cfg);
  fs::create_directories(cfg.out_dir);
  const std::string path = (fs::path(cfg.out_dir) / "synth.csv").string();
  save_csv(path, seq);

  std::vector<std::int64_t> counts(static_cast<std::size_t>(seq.classes), 0);
  for (int l : seq.labels) ++counts[static_cast<std::size_t>(l)];
  std::ostringstream table;
  table << "class  proportion\n";
  for (int k = 0; k < seq.classes; ++k)
    table << k << "      "
          << f1_str(static_cast<double>(counts[static_cast<std::size_t>(k)]) /
                    static_cast<double>(seq.labels.size()))
          << '\n';
  std::cout << table.str();
  log_info("wrote " + std::to_string(seq.sample_count()) + " samples to " + path);
  return path;
}

TrainOutcome cmd_train(const RunConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const SensorSequence seq = load_run_dataset(cfg);
  DatasetSplit split = build_window_split(cfg, seq);
  log_info("split: " + std::to_string(split.train.size()) + " train / " +
           std::to_string(split.test.size()) + " test pairs");

  FeaturePipeline pipeline;
  std::string features_path;
  if (cfg.kind == ModelKind::FeatureHead) {
    split = build_feature_split(cfg, split, &pipeline);
    features_path = (fs::path(cfg.out_dir) / "features.ckpt").string();
    save_feature_pipeline(pipeline, features_path);
  } else if (cfg.normalize) {
    zscore_normalize(split);
  }

  const ModelSpec spec = make_model_spec(cfg, split);
  auto model = build_model(spec, cfg.train_cfg.seed);
  TrainOutcome out;
  out.history = train(*model, split, cfg.train_cfg);

  out.checkpoint_path = (fs::path(cfg.out_dir) / "model.ckpt").string();
  checkpoint_save(*model, out.checkpoint_path);
  out.history_path = (fs::path(cfg.out_dir) / "history.txt").string();
  write_history(out.history_path, out.history);

  // report what the checkpoint reproduces, not the in-memory model
  auto reloaded = checkpoint_load(out.checkpoint_path);
  out.test_report = evaluate(*reloaded, split.test, split);
  out.report_path = (fs::path(cfg.out_dir) / "report.txt").string();
  std::ofstream rep(out.report_path);
  if (!rep) throw IoError("cannot write report: " + out.report_path);
  write_report(rep, out.test_report);
  log_info("test weighted_f1 = " + f1_str(out.test_report.weighted_f1));
  return out;
}

MetricsReport cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path,
                       const std::string& split_name) {
  cfg.validate();
  auto model = checkpoint_load(checkpoint_path);
  const ModelSpec& spec = model->spec();

  const SensorSequence seq = load_run_dataset(cfg);
  if (spec.kind != ModelKind::FeatureHead && seq.channels != spec.channels)
    throw ConfigError("checkpoint expects D=" + std::to_string(spec.channels) +
                      " channels but dataset '" + cfg.source + "' has D=" +
                      std::to_string(seq.channels));
  if (spec.kind == ModelKind::Arn &&
      (cfg.window.t_narrow != spec.arn.t_narrow || cfg.window.t_wide != spec.arn.t_wide))
    throw ConfigError("window config " + std::to_string(cfg.window.t_narrow) + "-" +
                      std::to_string(cfg.window.t_wide) + " does not match checkpoint " +
                      std::to_string(spec.arn.t_narrow) + "-" + std::to_string(spec.arn.t_wide));
  if (spec.kind != ModelKind::Arn && spec.kind != ModelKind::FeatureHead &&
      cfg.single_window_length() != spec.input_t)
    throw ConfigError("window length " + std::to_string(cfg.single_window_length()) +
                      " does not match checkpoint input length " + std::to_string(spec.input_t));

  DatasetSplit split = build_window_split(cfg, seq);
  if (spec.kind == ModelKind::FeatureHead) {
    const std::string fpath =
        (fs::path(checkpoint_path).parent_path() / "features.ckpt").string();
    const FeaturePipeline pipeline = load_feature_pipeline(fpath);
    DatasetSplit features = extract_feature_rows(pipeline, split);
    apply_feature_stats(pipeline.stats, features);
    split = std::move(features);
  } else if (cfg.normalize) {
    zscore_normalize(split);
  }

  std::span<const WindowPair> part;
  std::vector<WindowPair> all;
  if (split_name == "test") {
    part = split.test;
  } else if (split_name == "train") {
    part = split.train;
  } else if (split_name == "all") {
    all.reserve(split.size());
    all.insert(all.end(), split.train.begin(), split.train.end());
    all.insert(all.end(), split.test.begin(), split.test.end());
    part = all;
  } else {
    throw ConfigError("unknown eval split: " + split_name);
  }
  if (part.empty()) throw ConfigError("eval split '" + split_name + "' is empty");

  const MetricsReport report = evaluate(*model, part, split);
  fs::create_directories(cfg.out_dir);
  const std::string rpath = (fs::path(cfg.out_dir) / "eval_report.txt").string();
  std::ofstream rep(rpath);
  if (!rep) throw IoError("cannot write report: " + rpath);
  write_report(rep, report);
  if (log_level() >= LogLevel::Info) write_report(std::cout, report);
  return report;
}

namespace {

// In-memory train+test used by the bench rows; no files written.
double run_method_f1(RunConfig cfg) {
  cfg.validate();
  const SensorSequence seq = load_run_dataset(cfg);
  DatasetSplit split = build_window_split(cfg, seq);
  if (cfg.kind == ModelKind::FeatureHead) {
    FeaturePipeline pipeline;
    split = build_feature_split(cfg, split, &pipeline);
  } else if (cfg.normalize) {
    zscore_normalize(split);
  }
  const ModelSpec spec = make_model_spec(cfg, split);
  auto model = build_model(spec, cfg.train_cfg.seed);
  train(*model, split, cfg.train_cfg);
  return evaluate(*model, split.test, split).weighted_f1;
}

double averaged_f1(const RunConfig& base, int seeds) {
  double acc = 0.0;
  for (int s = 0; s < seeds; ++s) {
    RunConfig cfg = base;
    cfg.train_cfg.seed = base.train_cfg.seed + static_cast<std::uint64_t>(s);
    acc += run_method_f1(cfg);
  }
  return acc / seeds;
}

}  // namespace

BenchOutcome cmd_bench(const RunConfig& cfg) {
  if (cfg.bench_methods.empty()) throw ConfigError("bench needs at least one method");
  BenchOutcome out;

  struct Job {
    RunConfig cfg;
    BenchRow* row;
  };
  std::vector<Job> jobs;

  for (const auto& name : cfg.bench_methods) {
    BenchRow row;
    row.method = name;
    RunConfig sub = cfg;
    try {
      parse_method(name, &sub.kind, &sub.feature);
      sub.validate();
      row.window_label = sub.kind == ModelKind::Arn
                             ? std::to_string(sub.window.t_narrow) + "-" +
                                   std::to_string(sub.window.t_wide)
                             : std::to_string(sub.single_window_length());
      out.rows.push_back(row);
      jobs.push_back({std::move(sub), nullptr});
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
      out.rows.push_back(row);
    }
  }

  if (cfg.bench_sweep) {
    const std::array<std::pair<int, int>, 3> combos{{{32, 64}, {32, 96}, {64, 96}}};
    for (std::size_t i = 0; i < combos.size(); ++i) {
      BenchRow row;
      row.method = "arn_" + std::to_string(i + 1);
      row.window_label =
          std::to_string(combos[i].first) + "-" + std::to_string(combos[i].second);
      RunConfig sub = cfg;
      sub.kind = ModelKind::Arn;
      sub.feature = FeatureKind::None;
      sub.window.t_narrow = combos[i].first;
      sub.window.t_wide = combos[i].second;
      out.sweep.push_back(row);
      jobs.push_back({std::move(sub), nullptr});
    }
  }

  // bind job targets now that the row vectors are final
  {
    std::size_t j = 0;
    for (auto& row : out.rows)
      if (!row.failed) jobs[j++].row = &row;
    for (auto& row : out.sweep) jobs[j++].row = &row;
  }

  auto run_job = [&](Job& job) {
    try {
      log_info("bench: training " + job.row->method + " (T " + job.row->window_label + ")");
      job.row->f1 = averaged_f1(job.cfg, cfg.bench_seeds);
    } catch (const std::exception& e) {
      job.row->failed = true;
      job.row->error = e.what();
    }
  };

  if (cfg.threads > 1 && jobs.size() > 1) {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const int n = std::min<int>(cfg.threads, static_cast<int>(jobs.size()));
    for (int w = 0; w < n; ++w)
      workers.emplace_back([&]() {
        for (std::size_t j = next.fetch_add(1); j < jobs.size(); j = next.fetch_add(1))
          run_job(jobs[j]);
      });
    for (auto& t : workers) t.join();
  } else {
    for (auto& job : jobs) run_job(job);
  }

  std::ostringstream table;
  table << "method  T  F_w\n";
  for (const auto& r : out.rows)
    table << r.method << "  " << r.window_label << "  "
          << (r.failed ? "FAILED(" + r.error + ")" : f1_str(r.f1)) << '\n';
  if (!out.sweep.empty()) {
    table << "\nmethod  T(n)-(w)  F_w\n";
    for (const auto& r : out.sweep)
      table << r.method << "  " << r.window_label << "  "
            << (r.failed ? "FAILED(" + r.error + ")" : f1_str(r.f1)) << '\n';
  }
  std::cout << table.str();

  fs::create_directories(cfg.out_dir);
  out.table_path = (fs::path(cfg.out_dir) / "bench.txt").string();
  std::ofstream file(out.table_path);
  if (!file) throw IoError("cannot write bench table: " + out.table_path);
  file << table.str();
  return out;
}

}  // namespace arn
