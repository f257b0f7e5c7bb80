#pragma once

// Labeled multichannel sensor sequences: CSV I/O, sliding-window extraction,
// paired narrow/wide windows, normalization, stratified splitting, and a
// synthetic activity generator for desk-scale runs.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace arn {

/// D-channel time series with one class label per sample.
/// `samples` is row-major [N * D].
struct SensorSequence {
  int channels = 0;
  int classes = 0;
  double sample_rate_hz = 50.0;
  std::vector<double> samples;
  std::vector<int> labels;
  std::string subject_id;

  std::int64_t sample_count() const {
    return channels ? static_cast<std::int64_t>(samples.size()) / channels : 0;
  }
  void validate() const;
};

struct WindowConfig {
  int t_narrow = 32;
  int t_wide = 96;
  int stride = 16;  // default t_narrow/2 (50% overlap), configurable

  double alpha() const { return static_cast<double>(t_wide) / t_narrow; }
  void validate() const;
};

/// Aligned (narrow, wide) slices sharing the wide window's end timestamp;
/// narrow is the trailing t_narrow rows of wide. `narrow` is empty for
/// single-window datasets. `label` is the majority label of the wide window.
struct WindowPair {
  std::vector<double> narrow;  // [t_narrow * D]
  std::vector<double> wide;    // [t_wide * D]
  int label = 0;
  int end_index = 0;  // exclusive end row in the source sequence
};

struct DatasetSplit {
  int t_narrow = 0;  // 0 when pairs carry a single window
  int t_wide = 0;
  int channels = 0;
  int classes = 0;
  std::vector<WindowPair> train;
  std::vector<WindowPair> test;
  std::vector<double> class_proportions;  // over train+test

  std::size_t size() const { return train.size() + test.size(); }
};

/// Per-channel train statistics frozen by zscore_normalize.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // floored at 1e-8
};

struct LabeledWindow {
  std::vector<double> values;  // [T * D]
  int label = 0;
  int end_index = 0;
};

struct SlidingResult {
  std::vector<LabeledWindow> windows;
  bool input_too_short = false;
};

struct PairedResult {
  std::vector<WindowPair> pairs;
  bool input_too_short = false;
};

/// Most frequent class; ties broken toward the smallest class id.
int majority_label(std::span<const int> labels);

/// floor((N-T)/stride)+1 windows labeled by majority; N < T yields an empty
/// result with the warning flag set.
SlidingResult sliding_windows(const SensorSequence& seq, int window, int stride);

/// Wide windows slide with cfg.stride; each pair's narrow window is the
/// trailing t_narrow rows of its wide window.
PairedResult paired_windows(const SensorSequence& seq, const WindowConfig& cfg);

/// Statistics from train wide-window rows only, applied to train and test.
ChannelStats zscore_normalize(DatasetSplit& split);

/// Sinusoid-per-class generator: class k, channel d carries frequency
/// (1+k)*(1+d)*0.5 Hz at 50 Hz sampling, amplitude 1, random phase, Gaussian
/// noise of the given sigma. Emits n_per_class segments of 96..192 samples
/// per class, concatenated in shuffled class order.
SensorSequence synth_generate(int classes, int channels, int n_per_class, double noise_sigma,
                              std::uint64_t seed);

/// Seeded per-class split; every class contributes round(count * fraction)
/// test pairs (at least 1 train and 1 test each).
DatasetSplit stratified_split(std::vector<WindowPair> pairs, int t_narrow, int t_wide,
                              int channels, int classes, double test_fraction,
                              std::uint64_t seed);

/// CSV schema: channel column names plus one integer label column.
struct CsvSchema {
  std::vector<std::string> channel_columns;  // empty = auto ch_0..ch_{D-1}
  std::string label_column = "label";
};

/// Header row of `ch_0..ch_{D-1},label`; optional `# sample_rate_hz=<float>`
/// comment on line 1. Missing numeric cells are linearly interpolated within
/// their channel (edge rows take the nearest present value).
SensorSequence load_csv(const std::string& path, const CsvSchema& schema = {});
void save_csv(const std::string& path, const SensorSequence& seq);

}  // namespace arn
