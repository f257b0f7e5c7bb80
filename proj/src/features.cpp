#include "arn/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "arn/tensor.hpp"

namespace arn {

std::vector<double> dft_magnitudes(std::span<const double> signal, bool hann) {
  const int t = static_cast<int>(signal.size());
  if (t < 2) throw ConfigError("dft_magnitudes: signal too short");
  std::vector<double> windowed(signal.begin(), signal.end());
  if (hann)
    for (int i = 0; i < t; ++i)
      windowed[static_cast<std::size_t>(i)] *= 0.5 * (1.0 - std::cos(2.0 * M_PI * i / (t - 1)));
  std::vector<double> mags(static_cast<std::size_t>(t / 2));
  for (int k = 1; k <= t / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (int i = 0; i < t; ++i) {
      const double ang = -2.0 * M_PI * k * i / t;
      re += windowed[static_cast<std::size_t>(i)] * std::cos(ang);
      im += windowed[static_cast<std::size_t>(i)] * std::sin(ang);
    }
    mags[static_cast<std::size_t>(k - 1)] = std::sqrt(re * re + im * im);
  }
  return mags;
}

std::vector<double> hc_features(std::span<const double> window, int rows, int channels) {
  if (rows < 4) throw ConfigError("hc_features: need at least 4 rows");
  if (static_cast<int>(window.size()) != rows * channels)
    throw ShapeError("hc_features: window size does not match rows*channels");

  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(channels) * kHcFeaturesPerChannel);
  std::vector<double> chan(static_cast<std::size_t>(rows));
  for (int c = 0; c < channels; ++c) {
    for (int r = 0; r < rows; ++r)
      chan[static_cast<std::size_t>(r)] = window[static_cast<std::size_t>(r) * channels + c];

    double mean = 0.0;
    for (double v : chan) mean += v;
    mean /= rows;
    double var = 0.0;
    for (double v : chan) var += (v - mean) * (v - mean);
    var /= rows;
    const auto [mn, mx] = std::minmax_element(chan.begin(), chan.end());

    std::vector<double> sorted = chan;
    std::sort(sorted.begin(), sorted.end());
    const double median = rows % 2 ? sorted[static_cast<std::size_t>(rows / 2)]
                                   : 0.5 * (sorted[static_cast<std::size_t>(rows / 2 - 1)] +
                                            sorted[static_cast<std::size_t>(rows / 2)]);

    // spectral features on the detrended channel: keeps them invariant to a
    // mean shift and free of DC leakage through the Hann window
    std::vector<double> detrended = chan;
    for (auto& v : detrended) v -= mean;
    const auto mags = dft_magnitudes(detrended);
    // top-3 by magnitude, ascending bin on ties; bins are 1-based
    std::vector<int> order(mags.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return mags[static_cast<std::size_t>(a)] > mags[static_cast<std::size_t>(b)];
    });

    out.push_back(mean);
    out.push_back(std::sqrt(var));
    out.push_back(*mn);
    out.push_back(*mx);
    out.push_back(median);
    for (int i = 0; i < 3; ++i)
      out.push_back(i < static_cast<int>(order.size())
                        ? mags[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]
                        : 0.0);
    for (int i = 0; i < 3; ++i)
      out.push_back(i < static_cast<int>(order.size())
                        ? static_cast<double>(order[static_cast<std::size_t>(i)] + 1)
                        : 0.0);
  }
  return out;
}

namespace {

double sq_dist(const double* a, const double* b, int w) {
  double acc = 0.0;
  for (int i = 0; i < w; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

std::vector<double> kmeans_fit(std::span<const double> subsequences, int m, int w, int n,
                               std::uint64_t seed, int max_iter, double tol) {
  if (n < 1) throw ConfigError("kmeans_fit: need at least one cluster");
  if (m < n)
    throw ConfigError("kmeans_fit: " + std::to_string(m) + " subsequences for " +
                      std::to_string(n) + " clusters");
  if (static_cast<int>(subsequences.size()) != m * w)
    throw ShapeError("kmeans_fit: data size does not match m*w");

  const double* data = subsequences.data();
  std::mt19937_64 rng(seed);
  std::vector<double> centers(static_cast<std::size_t>(n) * w);

  // distance-weighted seeding
  {
    std::uniform_int_distribution<int> first(0, m - 1);
    const int f = first(rng);
    std::copy_n(data + static_cast<std::size_t>(f) * w, w, centers.begin());
    std::vector<double> d2(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i)
      d2[static_cast<std::size_t>(i)] = sq_dist(data + static_cast<std::size_t>(i) * w,
                                                centers.data(), w);
    for (int k = 1; k < n; ++k) {
      double total = 0.0;
      for (double v : d2) total += v;
      int chosen;
      if (total <= 0.0) {
        std::uniform_int_distribution<int> any(0, m - 1);
        chosen = any(rng);
      } else {
        std::uniform_real_distribution<double> u(0.0, total);
        double r = u(rng), acc = 0.0;
        chosen = m - 1;
        for (int i = 0; i < m; ++i) {
          acc += d2[static_cast<std::size_t>(i)];
          if (r <= acc) {
            chosen = i;
            break;
          }
        }
      }
      double* ck = centers.data() + static_cast<std::size_t>(k) * w;
      std::copy_n(data + static_cast<std::size_t>(chosen) * w, w, ck);
      for (int i = 0; i < m; ++i)
        d2[static_cast<std::size_t>(i)] =
            std::min(d2[static_cast<std::size_t>(i)],
                     sq_dist(data + static_cast<std::size_t>(i) * w, ck, w));
    }
  }

  std::vector<int> assign(static_cast<std::size_t>(m), -1);
  std::vector<double> dist_to_center(static_cast<std::size_t>(m), 0.0);
  double prev_inertia = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    double inertia = 0.0;
    for (int i = 0; i < m; ++i) {
      const double* xi = data + static_cast<std::size_t>(i) * w;
      double best = std::numeric_limits<double>::infinity();
      int best_k = 0;
      for (int k = 0; k < n; ++k) {
        const double d = sq_dist(xi, centers.data() + static_cast<std::size_t>(k) * w, w);
        if (d < best) {
          best = d;
          best_k = k;
        }
      }
      assign[static_cast<std::size_t>(i)] = best_k;
      dist_to_center[static_cast<std::size_t>(i)] = best;
      inertia += best;
    }

    std::vector<double> sums(static_cast<std::size_t>(n) * w, 0.0);
    std::vector<int> counts(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < m; ++i) {
      const int k = assign[static_cast<std::size_t>(i)];
      ++counts[static_cast<std::size_t>(k)];
      const double* xi = data + static_cast<std::size_t>(i) * w;
      double* sk = sums.data() + static_cast<std::size_t>(k) * w;
      for (int j = 0; j < w; ++j) sk[j] += xi[j];
    }
    for (int k = 0; k < n; ++k) {
      if (counts[static_cast<std::size_t>(k)] == 0) {
        // re-seed an empty cluster to the farthest point
        int far = 0;
        for (int i = 1; i < m; ++i)
          if (dist_to_center[static_cast<std::size_t>(i)] >
              dist_to_center[static_cast<std::size_t>(far)])
            far = i;
        std::copy_n(data + static_cast<std::size_t>(far) * w, w,
                    centers.begin() + static_cast<std::size_t>(k) * w);
        dist_to_center[static_cast<std::size_t>(far)] = 0.0;
      } else {
        for (int j = 0; j < w; ++j)
          centers[static_cast<std::size_t>(k) * w + j] =
              sums[static_cast<std::size_t>(k) * w + j] / counts[static_cast<std::size_t>(k)];
      }
    }

    if (prev_inertia - inertia <= tol && iter > 0) break;
    prev_inertia = inertia;
  }
  return centers;
}

void Codebook::validate() const {
  if (window < 1 || stride_h < 1) throw ConfigError("codebook window/stride must be >= 1");
  if (codewords < 2) throw ConfigError("codebook needs at least 2 codewords");
  if (sigma <= 0.0) throw ConfigError("codebook sigma must be positive");
  for (const auto& cw : per_channel)
    if (static_cast<int>(cw.size()) != codewords * window)
      throw ShapeError("codebook channel size does not match codewords*window");
}

namespace {

// Subsequences of one channel: [count * w], sliding (w, h).
std::vector<double> channel_subsequences(std::span<const double> window, int rows, int channels,
                                         int channel, int w, int h, int* count_out) {
  const int count = (rows - w) / h + 1;
  std::vector<double> subs(static_cast<std::size_t>(count) * w);
  for (int s = 0; s < count; ++s)
    for (int i = 0; i < w; ++i)
      subs[static_cast<std::size_t>(s) * w + i] =
          window[static_cast<std::size_t>(s * h + i) * channels + channel];
  *count_out = count;
  return subs;
}

}  // namespace

Codebook codebook_fit(const std::vector<std::vector<double>>& windows, int rows, int channels,
                      int window, int stride_h, int codewords, std::uint64_t seed) {
  if (windows.empty()) throw ConfigError("codebook_fit: no training windows");
  if (rows < window)
    throw ConfigError("codebook_fit: subsequence window " + std::to_string(window) +
                      " exceeds rows " + std::to_string(rows));
  Codebook cb;
  cb.window = window;
  cb.stride_h = stride_h;
  cb.codewords = codewords;
  cb.per_channel.resize(static_cast<std::size_t>(channels));

  std::vector<double> all_dists;
  for (int c = 0; c < channels; ++c) {
    std::vector<double> subs;
    int per_window = 0;
    for (const auto& win : windows) {
      int cnt = 0;
      auto s = channel_subsequences(win, rows, channels, c, window, stride_h, &cnt);
      subs.insert(subs.end(), s.begin(), s.end());
      per_window = cnt;
    }
    const int m = static_cast<int>(windows.size()) * per_window;
    cb.per_channel[static_cast<std::size_t>(c)] =
        kmeans_fit(subs, m, window, codewords, seed + static_cast<std::uint64_t>(c));
    const auto& cw = cb.per_channel[static_cast<std::size_t>(c)];
    for (int a = 0; a < codewords; ++a)
      for (int b = a + 1; b < codewords; ++b)
        all_dists.push_back(std::sqrt(sq_dist(cw.data() + static_cast<std::size_t>(a) * window,
                                              cw.data() + static_cast<std::size_t>(b) * window,
                                              window)));
  }
  // sigma: median pairwise codeword distance (scale-adaptive default)
  std::sort(all_dists.begin(), all_dists.end());
  const std::size_t mid = all_dists.size() / 2;
  double med = all_dists.empty() ? 1.0
               : (all_dists.size() % 2 ? all_dists[mid]
                                       : 0.5 * (all_dists[mid - 1] + all_dists[mid]));
  cb.sigma = med > 0.0 ? med : 1.0;
  cb.validate();
  return cb;
}

std::vector<double> codebook_assign_hard(std::span<const double> window, int rows, int channels,
                                         const Codebook& cb) {
  cb.validate();
  if (static_cast<int>(cb.per_channel.size()) != channels)
    throw ShapeError("codebook channel count does not match window");
  if (rows < cb.window)
    throw ShapeError("codebook_assign: window rows " + std::to_string(rows) +
                     " shorter than subsequence width " + std::to_string(cb.window));
  std::vector<double> hist(static_cast<std::size_t>(channels) * cb.codewords, 0.0);
  for (int c = 0; c < channels; ++c) {
    int count = 0;
    const auto subs =
        channel_subsequences(window, rows, channels, c, cb.window, cb.stride_h, &count);
    const auto& cw = cb.per_channel[static_cast<std::size_t>(c)];
    for (int s = 0; s < count; ++s) {
      const double* x = subs.data() + static_cast<std::size_t>(s) * cb.window;
      double best = std::numeric_limits<double>::infinity();
      int best_k = 0;
      for (int k = 0; k < cb.codewords; ++k) {
        const double d = sq_dist(x, cw.data() + static_cast<std::size_t>(k) * cb.window,
                                 cb.window);
        if (d < best) {  // strict: smallest index wins ties
          best = d;
          best_k = k;
        }
      }
      hist[static_cast<std::size_t>(c) * cb.codewords + best_k] += 1.0;
    }
  }
  return hist;
}

std::vector<double> codebook_assign_soft(std::span<const double> window, int rows, int channels,
                                         const Codebook& cb) {
  cb.validate();
  if (static_cast<int>(cb.per_channel.size()) != channels)
    throw ShapeError("codebook channel count does not match window");
  if (rows < cb.window)
    throw ShapeError("codebook_assign: window rows " + std::to_string(rows) +
                     " shorter than subsequence width " + std::to_string(cb.window));
  std::vector<double> feat(static_cast<std::size_t>(channels) * cb.codewords, 0.0);
  const double inv_two_sigma_sq = 1.0 / (2.0 * cb.sigma * cb.sigma);
  std::vector<double> weights(static_cast<std::size_t>(cb.codewords));
  for (int c = 0; c < channels; ++c) {
    int count = 0;
    const auto subs =
        channel_subsequences(window, rows, channels, c, cb.window, cb.stride_h, &count);
    const auto& cw = cb.per_channel[static_cast<std::size_t>(c)];
    for (int s = 0; s < count; ++s) {
      const double* x = subs.data() + static_cast<std::size_t>(s) * cb.window;
      double min_d2 = std::numeric_limits<double>::infinity();
      int nearest = 0;
      for (int k = 0; k < cb.codewords; ++k) {
        const double d2 = sq_dist(x, cw.data() + static_cast<std::size_t>(k) * cb.window,
                                  cb.window);
        weights[static_cast<std::size_t>(k)] = d2;
        if (d2 < min_d2) {
          min_d2 = d2;
          nearest = k;
        }
      }
      // subtract the min exponent so at least one weight is exp(0) = 1
      double total = 0.0;
      for (int k = 0; k < cb.codewords; ++k) {
        weights[static_cast<std::size_t>(k)] =
            std::exp(-(weights[static_cast<std::size_t>(k)] - min_d2) * inv_two_sigma_sq);
        total += weights[static_cast<std::size_t>(k)];
      }
      double* out = feat.data() + static_cast<std::size_t>(c) * cb.codewords;
      if (total > 0.0 && std::isfinite(total)) {
        for (int k = 0; k < cb.codewords; ++k)
          out[k] += weights[static_cast<std::size_t>(k)] / total;
      } else {
        out[nearest] += 1.0;  // underflow fallback: hard assignment
      }
    }
  }
  double total = 0.0;
  for (double v : feat) total += v;
  if (total > 0.0)
    for (double& v : feat) v /= total;
  return feat;
}

}  // namespace arn
