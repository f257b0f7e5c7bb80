#include "arn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "arn/tensor.hpp"

namespace arn {

void SensorSequence::validate() const {
  if (channels < 1) throw ConfigError("sensor sequence needs at least one channel");
  if (samples.size() % channels != 0)
    throw ShapeError("sample buffer length is not a multiple of channel count");
  if (labels.size() != static_cast<std::size_t>(sample_count()))
    throw ShapeError("label count does not match sample count");
  if (sample_rate_hz <= 0.0) throw ConfigError("sample rate must be positive");
  for (int l : labels)
    if (l < 0 || l >= classes)
      throw ConfigError("label " + std::to_string(l) + " outside [0," + std::to_string(classes) +
                        ")");
}

void WindowConfig::validate() const {
  if (t_narrow < 1) throw ConfigError("t_narrow must be positive");
  if (t_narrow >= t_wide) throw ConfigError("t_narrow must be smaller than t_wide");
  if (stride < 1) throw ConfigError("window stride must be >= 1");
}

int majority_label(std::span<const int> labels) {
  if (labels.empty()) throw ConfigError("majority_label: empty label window");
  int max_label = 0;
  for (int l : labels) max_label = std::max(max_label, l);
  std::vector<int> counts(static_cast<std::size_t>(max_label) + 1, 0);
  for (int l : labels) {
    if (l < 0) throw ConfigError("majority_label: negative label");
    ++counts[static_cast<std::size_t>(l)];
  }
  int best = 0;
  for (int c = 1; c <= max_label; ++c)
    if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(best)]) best = c;
  return best;  // scan order breaks ties toward the smallest id
}

SlidingResult sliding_windows(const SensorSequence& seq, int window, int stride) {
  if (window < 1 || stride < 1) throw ConfigError("sliding_windows: window and stride must be >= 1");
  const auto n = seq.sample_count();
  SlidingResult out;
  if (n < window) {
    out.input_too_short = true;
    return out;
  }
  const int d = seq.channels;
  const auto count = (n - window) / stride + 1;
  out.windows.reserve(static_cast<std::size_t>(count));
  for (std::int64_t w = 0; w < count; ++w) {
    const std::int64_t start = w * stride;
    LabeledWindow lw;
    lw.values.assign(seq.samples.begin() + start * d,
                     seq.samples.begin() + (start + window) * d);
    lw.label = majority_label(
        std::span<const int>(seq.labels.data() + start, static_cast<std::size_t>(window)));
    lw.end_index = static_cast<int>(start + window);
    out.windows.push_back(std::move(lw));
  }
  return out;
}

PairedResult paired_windows(const SensorSequence& seq, const WindowConfig& cfg) {
  cfg.validate();
  const auto n = seq.sample_count();
  PairedResult out;
  if (n < cfg.t_wide) {
    out.input_too_short = true;
    return out;
  }
  const int d = seq.channels;
  const auto count = (n - cfg.t_wide) / cfg.stride + 1;
  out.pairs.reserve(static_cast<std::size_t>(count));
  for (std::int64_t w = 0; w < count; ++w) {
    const std::int64_t start = w * cfg.stride;
    const std::int64_t end = start + cfg.t_wide;
    WindowPair p;
    p.wide.assign(seq.samples.begin() + start * d, seq.samples.begin() + end * d);
    p.narrow.assign(seq.samples.begin() + (end - cfg.t_narrow) * d, seq.samples.begin() + end * d);
    p.label = majority_label(
        std::span<const int>(seq.labels.data() + start, static_cast<std::size_t>(cfg.t_wide)));
    p.end_index = static_cast<int>(end);
    out.pairs.push_back(std::move(p));
  }
  return out;
}

namespace {
constexpr double kStdFloor = 1e-8;

void apply_stats(std::vector<double>& values, int channels, const ChannelStats& stats) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int c = static_cast<int>(i % channels);
    values[i] = (values[i] - stats.mean[c]) / stats.stddev[c];
  }
}
}  // namespace

ChannelStats zscore_normalize(DatasetSplit& split) {
  if (split.train.empty()) throw ConfigError("zscore_normalize: empty training split");
  const int d = split.channels;
  ChannelStats stats;
  stats.mean.assign(d, 0.0);
  stats.stddev.assign(d, 0.0);

  std::int64_t rows = 0;
  for (const auto& p : split.train) {
    rows += static_cast<std::int64_t>(p.wide.size()) / d;
    for (std::size_t i = 0; i < p.wide.size(); ++i) stats.mean[i % d] += p.wide[i];
  }
  for (int c = 0; c < d; ++c) stats.mean[c] /= static_cast<double>(rows);
  for (const auto& p : split.train)
    for (std::size_t i = 0; i < p.wide.size(); ++i) {
      const double dev = p.wide[i] - stats.mean[i % d];
      stats.stddev[i % d] += dev * dev;
    }
  for (int c = 0; c < d; ++c)
    stats.stddev[c] = std::max(std::sqrt(stats.stddev[c] / static_cast<double>(rows)), kStdFloor);

  for (auto* part : {&split.train, &split.test})
    for (auto& p : *part) {
      apply_stats(p.wide, d, stats);
      apply_stats(p.narrow, d, stats);
    }
  return stats;
}

SensorSequence synth_generate(int classes, int channels, int n_per_class, double noise_sigma,
                              std::uint64_t seed) {
  if (classes < 2) throw ConfigError("synth_generate: need at least 2 classes");
  if (channels < 1) throw ConfigError("synth_generate: need at least 1 channel");
  if (n_per_class < 1) throw ConfigError("synth_generate: n_per_class must be positive");

  constexpr double kRate = 50.0;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> seg_len(96, 192);

  struct Segment {
    int cls;
    int length;
  };
  std::vector<Segment> segments;
  segments.reserve(static_cast<std::size_t>(classes) * n_per_class);
  for (int k = 0; k < classes; ++k)
    for (int s = 0; s < n_per_class; ++s) segments.push_back({k, seg_len(rng)});
  std::shuffle(segments.begin(), segments.end(), rng);

  SensorSequence seq;
  seq.channels = channels;
  seq.classes = classes;
  seq.sample_rate_hz = kRate;
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (const auto& seg : segments) {
    std::vector<double> phases(static_cast<std::size_t>(channels));
    for (auto& ph : phases) ph = phase(rng);
    for (int i = 0; i < seg.length; ++i) {
      for (int d = 0; d < channels; ++d) {
        const double f = (1.0 + seg.cls) * (1.0 + d) * 0.5;
        double v = std::sin(2.0 * M_PI * f * (i / kRate) + phases[static_cast<std::size_t>(d)]);
        if (noise_sigma > 0.0) v += noise_sigma * noise(rng);
        seq.samples.push_back(v);
      }
      seq.labels.push_back(seg.cls);
    }
  }
  return seq;
}

DatasetSplit stratified_split(std::vector<WindowPair> pairs, int t_narrow, int t_wide,
                              int channels, int classes, double test_fraction,
                              std::uint64_t seed) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0)
    throw ConfigError("stratified_split: test fraction must be in (0,1)");
  if (classes < 1) throw ConfigError("stratified_split: class count must be positive");

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(classes));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const int l = pairs[i].label;
    if (l < 0 || l >= classes)
      throw ConfigError("stratified_split: pair label " + std::to_string(l) + " out of range");
    by_class[static_cast<std::size_t>(l)].push_back(i);
  }

  DatasetSplit split;
  split.t_narrow = t_narrow;
  split.t_wide = t_wide;
  split.channels = channels;
  split.classes = classes;
  split.class_proportions.assign(static_cast<std::size_t>(classes), 0.0);

  std::mt19937_64 rng(seed);
  for (int k = 0; k < classes; ++k) {
    auto& idx = by_class[static_cast<std::size_t>(k)];
    if (idx.size() < 2)
      throw ConfigError("stratified_split: class " + std::to_string(k) + " has " +
                        std::to_string(idx.size()) + " pair(s), need at least 2");
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(idx.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto& dst = i < n_test ? split.test : split.train;
      dst.push_back(std::move(pairs[idx[i]]));
    }
    split.class_proportions[static_cast<std::size_t>(k)] =
        static_cast<double>(idx.size()) / static_cast<double>(pairs.size());
  }
  return split;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

bool is_missing(const std::string& cell) {
  if (cell.empty()) return true;
  std::string low;
  for (char ch : cell) low.push_back(static_cast<char>(std::tolower(ch)));
  return low == "nan" || low == "na";
}

// Fill NaN runs by straight-line interpolation between neighbors; edge runs
// copy the nearest present value. A fully-missing channel is an error.
void interpolate_channel(std::vector<double>& samples, int channels, int channel,
                         std::int64_t rows) {
  auto at = [&](std::int64_t r) -> double& {
    return samples[static_cast<std::size_t>(r) * channels + channel];
  };
  std::int64_t r = 0;
  while (r < rows) {
    if (!std::isnan(at(r))) {
      ++r;
      continue;
    }
    std::int64_t run_end = r;
    while (run_end < rows && std::isnan(at(run_end))) ++run_end;
    const std::int64_t prev = r - 1;
    if (prev < 0 && run_end >= rows)
      throw IoError("channel " + std::to_string(channel) + " has no data");
    if (prev < 0) {
      for (std::int64_t i = r; i < run_end; ++i) at(i) = at(run_end);
    } else if (run_end >= rows) {
      for (std::int64_t i = r; i < run_end; ++i) at(i) = at(prev);
    } else {
      const double lo = at(prev), hi = at(run_end);
      const auto gap = static_cast<double>(run_end - prev);
      for (std::int64_t i = r; i < run_end; ++i)
        at(i) = lo + (hi - lo) * static_cast<double>(i - prev) / gap;
    }
    r = run_end;
  }
}

}  // namespace

SensorSequence load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open dataset file: " + path);

  std::string line;
  int line_no = 0;
  double sample_rate = 50.0;

  if (!std::getline(file, line)) throw IoError(path + ": empty file");
  ++line_no;
  if (line.rfind("# sample_rate_hz=", 0) == 0) {
    sample_rate = std::stod(line.substr(17));
    if (!std::getline(file, line)) throw IoError(path + ": missing header row");
    ++line_no;
  }

  const auto header = split_line(line);
  std::vector<int> channel_cols;
  int label_col = -1;
  if (schema.channel_columns.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      const std::string name = trim(header[i]);
      if (name == schema.label_column)
        label_col = static_cast<int>(i);
      else if (name.rfind("ch_", 0) == 0)
        channel_cols.push_back(static_cast<int>(i));
    }
  } else {
    for (const auto& want : schema.channel_columns) {
      int found = -1;
      for (std::size_t i = 0; i < header.size(); ++i)
        if (trim(header[i]) == want) found = static_cast<int>(i);
      if (found < 0) throw IoError(path + ": missing channel column '" + want + "'");
      channel_cols.push_back(found);
    }
    for (std::size_t i = 0; i < header.size(); ++i)
      if (trim(header[i]) == schema.label_column) label_col = static_cast<int>(i);
  }
  if (channel_cols.empty()) throw IoError(path + ": no channel columns in header");
  if (label_col < 0) throw IoError(path + ": no '" + schema.label_column + "' column in header");

  SensorSequence seq;
  seq.channels = static_cast<int>(channel_cols.size());
  seq.sample_rate_hz = sample_rate;

  while (std::getline(file, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() < header.size())
      throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    for (int col : channel_cols) {
      const std::string cell = trim(cells[static_cast<std::size_t>(col)]);
      if (is_missing(cell)) {
        seq.samples.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        seq.samples.push_back(v);
      } catch (const std::exception&) {
        throw IoError(path + ":" + std::to_string(line_no) + ": unparseable value '" + cell + "'");
      }
    }
    const std::string lab = trim(cells[static_cast<std::size_t>(label_col)]);
    try {
      std::size_t used = 0;
      const int l = std::stoi(lab, &used);
      if (used != lab.size() || l < 0) throw std::invalid_argument(lab);
      seq.labels.push_back(l);
    } catch (const std::exception&) {
      throw IoError(path + ":" + std::to_string(line_no) + ": unparseable label '" + lab + "'");
    }
  }
  if (seq.labels.empty()) throw IoError(path + ": dataset has no data rows");

  for (int c = 0; c < seq.channels; ++c)
    interpolate_channel(seq.samples, seq.channels, c, seq.sample_count());
  seq.classes = *std::max_element(seq.labels.begin(), seq.labels.end()) + 1;
  seq.validate();
  return seq;
}

void save_csv(const std::string& path, const SensorSequence& seq) {
  seq.validate();
  std::ofstream file(path);
  if (!file) throw IoError("cannot write dataset file: " + path);
  file << "# sample_rate_hz=" << seq.sample_rate_hz << '\n';
  for (int c = 0; c < seq.channels; ++c) file << "ch_" << c << ',';
  file << "label\n";
  file.precision(9);
  const auto n = seq.sample_count();
  for (std::int64_t r = 0; r < n; ++r) {
    for (int c = 0; c < seq.channels; ++c)
      file << seq.samples[static_cast<std::size_t>(r) * seq.channels + c] << ',';
    file << seq.labels[static_cast<std::size_t>(r)] << '\n';
  }
  if (!file) throw IoError("write failed: " + path);
}

}  // namespace arn
