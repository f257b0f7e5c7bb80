#pragma once

// Config-driven pipelines behind the CLI subcommands. Everything here is a
// library call so tests can drive full runs in-process.

#include <optional>
#include <string>
#include <vector>

#include "arn/checkpoint.hpp"
#include "arn/dataset.hpp"
#include "arn/features.hpp"
#include "arn/metrics.hpp"
#include "arn/models.hpp"

namespace arn {

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };
LogLevel log_level();  // from ARN_LOG env: quiet|info|debug (default info)
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

/// Feature extractor choice for the conventional baselines.
enum class FeatureKind { None, Hc, Cbh, Cbs };

/// One reproducible run: dataset source, windowing, model, training protocol.
struct RunConfig {
  // [dataset]
  std::string source = "synthetic";  // "synthetic" or a CSV path
  int synth_classes = 5;
  int synth_channels = 3;
  int synth_segments_per_class = 45;
  double synth_noise_sigma = 0.3;
  std::uint64_t dataset_seed = 42;
  double test_fraction = 0.2;
  bool normalize = true;

  // [window]
  WindowConfig window;
  int t_single = 0;  // single-window models; 0 means window.t_narrow

  // [model]
  ModelKind kind = ModelKind::Arn;
  FeatureKind feature = FeatureKind::None;
  ModelSpec model;  // widths etc.; input/window dims filled by the pipeline

  // [train]
  TrainConfig train_cfg;

  // [codebook]
  int codebook_words = 128;
  int codebook_window = 24;
  int codebook_stride = 12;

  // [bench]
  std::vector<std::string> bench_methods{"arn", "resnet"};
  bool bench_sweep = true;
  int bench_seeds = 1;  // F_w per row averaged over this many derived seeds

  std::string out_dir = ".";
  int threads = 1;

  static RunConfig load(const std::string& path);
  void validate() const;

  int single_window_length() const { return t_single > 0 ? t_single : window.t_narrow; }
};

/// Accepts the model kinds plus the feature-method aliases hc/cbh/cbs.
void parse_method(const std::string& name, ModelKind* kind, FeatureKind* feature);
std::string method_name(ModelKind kind, FeatureKind feature);

struct TrainOutcome {
  TrainHistory history;
  MetricsReport test_report;     // from the reloaded checkpoint
  std::string checkpoint_path;
  std::string history_path;
  std::string report_path;
};

struct BenchRow {
  std::string method;
  std::string window_label;
  double f1 = 0.0;
  bool failed = false;
  std::string error;
};

struct BenchOutcome {
  std::vector<BenchRow> rows;   // one per method
  std::vector<BenchRow> sweep;  // narrow-wide combinations
  std::string table_path;
};

/// Writes the dataset CSV and prints the class-proportion table.
std::string cmd_synth(const RunConfig& cfg);

/// ingest -> build -> train -> checkpoint -> evaluate (reloaded model).
TrainOutcome cmd_train(const RunConfig& cfg);

/// Evaluates a checkpoint against the config's dataset.
/// `split_name` is "test", "train" or "all".
MetricsReport cmd_eval(const RunConfig& cfg, const std::string& checkpoint_path,
                       const std::string& split_name = "test");

/// Trains/evaluates every listed method on the shared dataset, then the
/// narrow-wide sweep (32-64, 32-96, 64-96). Per-method failures land in the
/// row; survivors still report.
BenchOutcome cmd_bench(const RunConfig& cfg);

// Pipeline pieces shared with tests.
SensorSequence load_run_dataset(const RunConfig& cfg);
DatasetSplit build_window_split(const RunConfig& cfg, const SensorSequence& seq);

/// Turns a windowed split into feature rows (fitting the codebook on train
/// windows for CBH/CBS) and z-scores feature columns on train statistics.
struct FeaturePipeline {
  FeatureKind kind = FeatureKind::Hc;
  Codebook codebook;       // CBH/CBS only
  ChannelStats stats;      // feature-column scaler
  int window_rows = 0;
  int channels = 0;

  std::vector<double> extract(const WindowPair& pair) const;  // un-scaled
};
DatasetSplit build_feature_split(const RunConfig& cfg, const DatasetSplit& windows,
                                 FeaturePipeline* pipeline);

void save_feature_pipeline(const FeaturePipeline& p, const std::string& path);
FeaturePipeline load_feature_pipeline(const std::string& path);

}  // namespace arn
