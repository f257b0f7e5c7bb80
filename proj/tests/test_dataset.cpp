#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "arn/dataset.hpp"
#include "arn/features.hpp"
#include "arn/tensor.hpp"

using namespace arn;
namespace fs = std::filesystem;

namespace {

SensorSequence make_sequence(int n, int d, std::uint64_t seed, int classes = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> cls(0, classes - 1);
  SensorSequence seq;
  seq.channels = d;
  seq.classes = classes;
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) seq.samples.push_back(u(rng));
    seq.labels.push_back(cls(rng));
  }
  return seq;
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("arn_test_" + name);
}

}  // namespace

TEST_CASE("majority_label examples") {
  CHECK(majority_label(std::vector<int>{1, 1, 2}) == 1);
  CHECK(majority_label(std::vector<int>{2, 1}) == 1);  // tie -> smaller id
  CHECK(majority_label(std::vector<int>{7}) == 7);

  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> cls(0, 5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> labels(96);
    for (auto& l : labels) l = cls(rng);
    const int got = majority_label(labels);
    // counting oracle: maximal count, smallest id among maxima
    std::vector<int> counts(6, 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    int best = 0;
    for (int c = 1; c < 6; ++c)
      if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(best)]) best = c;
    CHECK(got == best);
    CHECK(counts[static_cast<std::size_t>(got)] > 0);
  }
}

TEST_CASE("sliding window counts and content") {
  SensorSequence seq = make_sequence(10, 2, 1);
  auto r = sliding_windows(seq, 4, 2);
  CHECK(!r.input_too_short);
  REQUIRE(r.windows.size() == 4);
  for (std::size_t w = 0; w < 4; ++w) {
    CHECK(r.windows[w].end_index == static_cast<int>(2 * w + 4));
    for (int i = 0; i < 8; ++i)
      CHECK(r.windows[w].values[static_cast<std::size_t>(i)] ==
            seq.samples[2 * w * 2 + static_cast<std::size_t>(i)]);
  }

  auto one = sliding_windows(make_sequence(7, 1, 2), 7, 3);
  CHECK(one.windows.size() == 1);

  auto none = sliding_windows(make_sequence(3, 1, 3), 5, 1);
  CHECK(none.windows.empty());
  CHECK(none.input_too_short);
}

TEST_CASE("window counts match brute-force enumeration for all small combos") {
  for (int n = 1; n <= 64; ++n) {
    SensorSequence seq = make_sequence(n, 1, static_cast<std::uint64_t>(n));
    for (int t = 1; t <= n; ++t)
      for (int stride = 1; stride <= 8; ++stride) {
        int expected = 0;
        for (int pos = 0; pos + t <= n; pos += stride) ++expected;
        auto r = sliding_windows(seq, t, stride);
        CHECK(static_cast<int>(r.windows.size()) == expected);
      }
  }
}

TEST_CASE("paired windows align narrow to the trailing slice of wide") {
  SUBCASE("single pair with explicit alignment") {
    SensorSequence seq = make_sequence(96, 3, 7);
    WindowConfig cfg{32, 96, 16};
    auto r = paired_windows(seq, cfg);
    REQUIRE(r.pairs.size() == 1);
    const auto& p = r.pairs[0];
    CHECK(p.end_index == 96);
    for (int i = 0; i < 32 * 3; ++i)
      CHECK(p.narrow[static_cast<std::size_t>(i)] == seq.samples[64 * 3 + static_cast<std::size_t>(i)]);
  }
  SUBCASE("count formula") {
    SensorSequence seq = make_sequence(128, 1, 8);
    WindowConfig cfg{32, 64, 32};
    auto r = paired_windows(seq, cfg);
    CHECK(r.pairs.size() == 3);
  }
  SUBCASE("trailing-slice equality on random sequences, exhaustively") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      SensorSequence seq = make_sequence(200, 2, 100 + seed);
      WindowConfig cfg{16, 48, 8};
      auto r = paired_windows(seq, cfg);
      CHECK(!r.pairs.empty());
      for (const auto& p : r.pairs) {
        REQUIRE(p.wide.size() == 48 * 2);
        REQUIRE(p.narrow.size() == 16 * 2);
        for (int i = 0; i < 16 * 2; ++i)
          CHECK(p.narrow[static_cast<std::size_t>(i)] ==
                p.wide[static_cast<std::size_t>((48 - 16) * 2 + i)]);
        // label is the wide-window majority
        const int start = p.end_index - 48;
        CHECK(p.label == majority_label(std::span<const int>(seq.labels.data() + start, 48)));
      }
    }
  }
  SUBCASE("too-short input flags a warning") {
    auto r = paired_windows(make_sequence(40, 1, 9), WindowConfig{16, 48, 8});
    CHECK(r.pairs.empty());
    CHECK(r.input_too_short);
  }
  SUBCASE("bad config rejected") {
    CHECK_THROWS_AS(paired_windows(make_sequence(100, 1, 10), WindowConfig{48, 48, 8}),
                    ConfigError);
  }
}

TEST_CASE("zscore normalization") {
  SensorSequence seq = make_sequence(400, 3, 11);
  // push channels off scale
  for (std::size_t i = 0; i < seq.samples.size(); i += 3) seq.samples[i] = seq.samples[i] * 5 + 10;
  auto pairs = paired_windows(seq, WindowConfig{8, 24, 8}).pairs;
  DatasetSplit split =
      stratified_split(std::move(pairs), 8, 24, 3, seq.classes, 0.25, 21);

  SUBCASE("train moments become (0,1), slices stay aligned") {
    zscore_normalize(split);
    std::vector<double> mean(3, 0.0), var(3, 0.0);
    std::int64_t rows = 0;
    for (const auto& p : split.train) {
      rows += 24;
      for (std::size_t i = 0; i < p.wide.size(); ++i) mean[i % 3] += p.wide[i];
    }
    for (auto& m : mean) m /= static_cast<double>(rows);
    for (const auto& p : split.train)
      for (std::size_t i = 0; i < p.wide.size(); ++i) {
        const double d = p.wide[i] - mean[i % 3];
        var[i % 3] += d * d;
      }
    for (int c = 0; c < 3; ++c) {
      CHECK(std::fabs(mean[static_cast<std::size_t>(c)]) < 1e-3);
      CHECK(std::fabs(var[static_cast<std::size_t>(c)] / static_cast<double>(rows) - 1.0) < 1e-3);
    }
    for (const auto& p : split.train)
      for (int i = 0; i < 8 * 3; ++i)
        CHECK(p.narrow[static_cast<std::size_t>(i)] ==
              p.wide[static_cast<std::size_t>((24 - 8) * 3 + i)]);
  }

  SUBCASE("statistics derive from train only") {
    DatasetSplit copy = split;
    for (auto& p : copy.test)
      for (auto& v : p.wide) v += 1000.0;  // perturb test data
    const ChannelStats a = zscore_normalize(split);
    const ChannelStats b = zscore_normalize(copy);
    for (int c = 0; c < 3; ++c) {
      CHECK(a.mean[static_cast<std::size_t>(c)] == b.mean[static_cast<std::size_t>(c)]);
      CHECK(a.stddev[static_cast<std::size_t>(c)] == b.stddev[static_cast<std::size_t>(c)]);
    }
  }

  SUBCASE("already standardized data is unchanged") {
    DatasetSplit once = split;
    zscore_normalize(once);
    DatasetSplit twice = once;
    zscore_normalize(twice);
    for (std::size_t i = 0; i < once.train.size(); ++i)
      for (std::size_t j = 0; j < once.train[i].wide.size(); ++j)
        CHECK(twice.train[i].wide[j] == doctest::Approx(once.train[i].wide[j]).epsilon(1e-5));
  }

  SUBCASE("constant channel maps to zeros via the std floor") {
    DatasetSplit flat = split;
    for (auto* part : {&flat.train, &flat.test})
      for (auto& p : *part) {
        for (std::size_t i = 0; i < p.wide.size(); i += 3) p.wide[i] = 4.0;
        for (std::size_t i = 0; i < p.narrow.size(); i += 3) p.narrow[i] = 4.0;
      }
    zscore_normalize(flat);
    for (const auto& p : flat.train)
      for (std::size_t i = 0; i < p.wide.size(); i += 3) CHECK(p.wide[i] == 0.0);
  }
}

TEST_CASE("synthetic generator") {
  SUBCASE("deterministic under a fixed seed") {
    SensorSequence a = synth_generate(3, 2, 4, 0.2, 99);
    SensorSequence b = synth_generate(3, 2, 4, 0.2, 99);
    CHECK(a.samples == b.samples);
    CHECK(a.labels == b.labels);
    SensorSequence c = synth_generate(3, 2, 4, 0.2, 100);
    CHECK(a.samples != c.samples);
  }

  SUBCASE("segment lengths, labels, rate") {
    SensorSequence seq = synth_generate(2, 3, 5, 0.0, 7);
    CHECK(seq.sample_rate_hz == 50.0);
    CHECK(seq.classes == 2);
    const auto n = seq.sample_count();
    CHECK(n >= 2 * 5 * 96);
    CHECK(n <= 2 * 5 * 192);
  }

  SUBCASE("noise-free classes are separated by their dominant frequency bin") {
    SensorSequence seq = synth_generate(2, 1, 6, 0.0, 3);
    auto windows = sliding_windows(seq, 96, 48).windows;
    REQUIRE(windows.size() > 10);
    int correct = 0, counted = 0;
    for (const auto& w : windows) {
      // skip windows that straddle a segment boundary
      bool pure = true;
      const int start = w.end_index - 96;
      for (int i = start; i < w.end_index; ++i)
        if (seq.labels[static_cast<std::size_t>(i)] != w.label) pure = false;
      if (!pure) continue;
      const auto mags = dft_magnitudes(w.values);
      int peak = 0;
      for (std::size_t i = 1; i < mags.size(); ++i)
        if (mags[i] > mags[static_cast<std::size_t>(peak)]) peak = static_cast<int>(i);
      // class k has frequency (1+k)*0.5 Hz -> bin (1+k)*0.5*96/50 (1-based)
      const double f = (1.0 + w.label) * 0.5;
      const double bin = f * 96.0 / 50.0;
      ++counted;
      if (std::fabs((peak + 1) - bin) <= 0.6) ++correct;
    }
    CHECK(counted > 0);
    CHECK(correct == counted);  // 100% for the FFT-peak oracle at sigma = 0
  }

  SUBCASE("class proportions are near-uniform over windows") {
    SensorSequence seq = synth_generate(5, 1, 200, 0.1, 17);
    auto windows = sliding_windows(seq, 64, 32).windows;
    std::vector<int> counts(5, 0);
    for (const auto& w : windows) ++counts[static_cast<std::size_t>(w.label)];
    for (int k = 0; k < 5; ++k) {
      const double prop =
          static_cast<double>(counts[static_cast<std::size_t>(k)]) / windows.size();
      CHECK(std::fabs(prop - 0.2) < 0.02);
    }
  }
}

TEST_CASE("stratified split") {
  SensorSequence seq;
  seq.channels = 1;
  seq.classes = 3;
  // 10 pairs per class, trivially constructed
  std::vector<WindowPair> pairs;
  int end = 10;
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 10; ++i) {
      WindowPair p;
      p.wide = {static_cast<double>(k), static_cast<double>(i)};
      p.label = k;
      p.end_index = end++;
      pairs.push_back(p);
    }

  SUBCASE("per-class test counts at fraction 0.3") {
    auto split = stratified_split(pairs, 0, 2, 1, 3, 0.3, 5);
    std::vector<int> test_counts(3, 0);
    for (const auto& p : split.test) ++test_counts[static_cast<std::size_t>(p.label)];
    for (int k = 0; k < 3; ++k) CHECK(test_counts[static_cast<std::size_t>(k)] == 3);
    CHECK(split.train.size() + split.test.size() == pairs.size());
  }

  SUBCASE("same seed reproduces the split; different seed changes it") {
    auto a = stratified_split(pairs, 0, 2, 1, 3, 0.3, 5);
    auto b = stratified_split(pairs, 0, 2, 1, 3, 0.3, 5);
    auto ends = [](const DatasetSplit& s) {
      std::vector<int> v;
      for (const auto& p : s.test) v.push_back(p.end_index);
      return v;
    };
    CHECK(ends(a) == ends(b));
  }

  SUBCASE("train and test are disjoint and complete by pair identity") {
    auto split = stratified_split(pairs, 0, 2, 1, 3, 0.4, 9);
    std::set<int> train_ids, test_ids;
    for (const auto& p : split.train) train_ids.insert(p.end_index);
    for (const auto& p : split.test) test_ids.insert(p.end_index);
    CHECK(train_ids.size() + test_ids.size() == pairs.size());
    for (int id : test_ids) CHECK(train_ids.count(id) == 0);
  }

  SUBCASE("proportions sum to one") {
    auto split = stratified_split(pairs, 0, 2, 1, 3, 0.3, 5);
    double total = 0.0;
    for (double w : split.class_proportions) total += w;
    CHECK(std::fabs(total - 1.0) < 1e-9);
  }

  SUBCASE("a class with fewer than 2 pairs errors by name") {
    std::vector<WindowPair> thin = pairs;
    WindowPair lone;
    lone.wide = {0.0, 0.0};
    lone.label = 3;
    lone.end_index = 999;
    thin.push_back(lone);
    try {
      stratified_split(thin, 0, 2, 1, 4, 0.3, 5);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("class 3") != std::string::npos);
    }
  }
}

TEST_CASE("csv io") {
  SUBCASE("three verbatim rows") {
    const auto path = temp_file("tiny.csv");
    {
      std::ofstream f(path);
      f << "ch_0,ch_1,label\n1.5,2.5,0\n-1.0,0.25,1\n3.0,4.0,0\n";
    }
    SensorSequence seq = load_csv(path.string());
    CHECK(seq.channels == 2);
    CHECK(seq.sample_count() == 3);
    CHECK(seq.samples == std::vector<double>{1.5, 2.5, -1.0, 0.25, 3.0, 4.0});
    CHECK(seq.labels == std::vector<int>{0, 1, 0});
    fs::remove(path);
  }

  SUBCASE("missing interior cell interpolates to the midpoint") {
    const auto path = temp_file("gap.csv");
    {
      std::ofstream f(path);
      f << "ch_0,label\n1.0,0\n,0\n3.0,0\n";
    }
    SensorSequence seq = load_csv(path.string());
    CHECK(seq.samples[1] == doctest::Approx(2.0));
    fs::remove(path);
  }

  SUBCASE("edge gaps take the nearest value, runs interpolate linearly") {
    const auto path = temp_file("edges.csv");
    {
      std::ofstream f(path);
      f << "ch_0,label\nnan,0\n2.0,0\n,1\n,1\n8.0,1\nnan,1\n";
    }
    SensorSequence seq = load_csv(path.string());
    CHECK(seq.samples[0] == 2.0);
    CHECK(seq.samples[2] == doctest::Approx(4.0));
    CHECK(seq.samples[3] == doctest::Approx(6.0));
    CHECK(seq.samples[5] == 8.0);
    fs::remove(path);
  }

  SUBCASE("synthetic export round-trips within 1e-6") {
    SensorSequence seq = synth_generate(3, 2, 30, 0.4, 12);
    REQUIRE(seq.sample_count() > 10000);
    const auto path = temp_file("roundtrip.csv");
    save_csv(path.string(), seq);
    SensorSequence back = load_csv(path.string());
    REQUIRE(back.sample_count() == seq.sample_count());
    CHECK(back.channels == seq.channels);
    CHECK(back.labels == seq.labels);
    CHECK(back.sample_rate_hz == doctest::Approx(50.0));
    for (std::size_t i = 0; i < seq.samples.size(); ++i)
      CHECK(back.samples[i] == doctest::Approx(seq.samples[i]).epsilon(1e-6));
    fs::remove(path);
  }

  SUBCASE("unparseable rows report the line number") {
    const auto path = temp_file("bad.csv");
    {
      std::ofstream f(path);
      f << "ch_0,label\n1.0,0\nbogus,0\n";
    }
    try {
      load_csv(path.string());
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
    fs::remove(path);
  }

  SUBCASE("empty dataset and missing label column error") {
    const auto path = temp_file("empty.csv");
    {
      std::ofstream f(path);
      f << "ch_0,label\n";
    }
    CHECK_THROWS_AS(load_csv(path.string()), IoError);
    {
      std::ofstream f(path);
      f << "ch_0,ch_1\n1,2\n";
    }
    CHECK_THROWS_AS(load_csv(path.string()), IoError);
    fs::remove(path);
  }

  SUBCASE("explicit schema selects named columns") {
    const auto path = temp_file("schema.csv");
    {
      std::ofstream f(path);
      f << "acc_x,acc_y,activity\n1,2,0\n3,4,1\n";
    }
    CsvSchema schema;
    schema.channel_columns = {"acc_x", "acc_y"};
    schema.label_column = "activity";
    SensorSequence seq = load_csv(path.string(), schema);
    CHECK(seq.channels == 2);
    CHECK(seq.samples == std::vector<double>{1, 2, 3, 4});
    fs::remove(path);
  }
}
