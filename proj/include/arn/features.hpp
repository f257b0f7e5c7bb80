#pragma once

// Conventional baselines' feature extractors: per-channel statistics plus
// Fourier peaks (HC), and k-means codebooks with hard/soft assignment
// (CBH/CBS).

#include <cstdint>
#include <span>
#include <vector>

namespace arn {

/// Magnitudes of DFT bins 1..floor(T/2) of a Hann-windowed signal.
std::vector<double> dft_magnitudes(std::span<const double> signal, bool hann = true);

/// Per channel: mean, std, min, max, median, top-3 DFT magnitudes (by
/// magnitude, ascending bin index on ties) and their bin indices.
/// Length = D * 11, channel-major.
std::vector<double> hc_features(std::span<const double> window, int rows, int channels);
inline constexpr int kHcFeaturesPerChannel = 11;

/// Lloyd k-means with distance-weighted (k-means++ style) seeding. Inertia is
/// non-increasing per iteration; empty clusters re-seed to the farthest point.
/// `subsequences` is [M * w]; returns codewords [n * w].
std::vector<double> kmeans_fit(std::span<const double> subsequences, int m, int w, int n,
                               std::uint64_t seed, int max_iter = 100, double tol = 1e-6);

/// One codebook per channel over subsequences of width `window` and stride
/// `stride_h`, following the construction/assignment symmetry.
struct Codebook {
  int window = 24;
  int stride_h = 12;
  int codewords = 128;
  double sigma = 1.0;  // soft-assignment kernel width
  std::vector<std::vector<double>> per_channel;  // each [codewords * window]

  void validate() const;
};

/// Builds per-channel codebooks from training windows ([rows * channels]
/// each); sigma defaults to the median pairwise codeword distance.
Codebook codebook_fit(const std::vector<std::vector<double>>& windows, int rows, int channels,
                      int window, int stride_h, int codewords, std::uint64_t seed);

/// Nearest-codeword counts per channel (Euclidean; smallest index wins ties),
/// channels concatenated: length D * n.
std::vector<double> codebook_assign_hard(std::span<const double> window, int rows, int channels,
                                         const Codebook& cb);

/// Gaussian-kernel soft assignment, normalized per subsequence and then to a
/// unit-sum feature. Underflowed subsequences fall back to hard assignment.
std::vector<double> codebook_assign_soft(std::span<const double> window, int rows, int channels,
                                         const Codebook& cb);

}  // namespace arn
