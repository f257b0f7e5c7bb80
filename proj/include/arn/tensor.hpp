#pragma once

// Dense n-dimensional tensor with tape-based reverse-mode autodiff.
// Values are float64; checkpoints quantize to float32 at the I/O boundary.

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace arn {

class ShapeError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class NumericError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class InternalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<int>;

std::int64_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first touched by backward
  bool requires_grad = false;
  std::uint64_t tape_id = 0;  // tape that produced this node; 0 for leaves
};
}  // namespace detail

/// Shared-value handle to a tensor node. Copies alias the same storage;
/// ops always allocate fresh output nodes, so aliasing never surprises.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int dim(int i) const { return shape()[static_cast<std::size_t>(i)]; }
  std::int64_t size() const;

  std::span<double> data();
  std::span<const double> data() const;
  double value() const;  // scalar tensors only

  bool requires_grad() const;
  Tensor& set_requires_grad(bool v);

  bool has_grad() const;
  std::span<double> grad();
  std::span<const double> grad() const;
  void ensure_grad();  // allocate zero grad buffer if absent
  void zero_grad();    // drop/clear the grad buffer

  /// Throws NumericError naming `what` if any element is NaN/Inf.
  void require_finite(const std::string& what) const;
  bool all_finite() const;

  /// Deep copy of values (grad not copied).
  Tensor clone() const;

  std::shared_ptr<detail::TensorNode> node() const { return node_; }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

/// Ordered record of executed ops; replaying it in reverse propagates
/// gradients. Execution order is a topological order by construction.
/// A tape is confined to one thread.
class Tape {
 public:
  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::uint64_t id() const { return id_; }
  std::size_t size() const { return entries_.size(); }

  void record(std::function<void()> backward_fn);

  /// Seeds d(loss)/d(loss) = 1 and replays all entries in reverse.
  /// Gradients accumulate additively across fan-out.
  void backward(const Tensor& loss);

 private:
  std::vector<std::function<void()>> entries_;
  std::uint64_t id_;
};

/// RAII activation of a tape for the current thread. Ops record onto the
/// active tape; with no active tape they run inference-style (no recording).
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* prev_;
};

Tape* active_tape();

// Seeded initializers. All randomness in the project flows through
// explicitly seeded engines; a fixed seed reproduces bit-identical values.
Tensor uniform_init(const Shape& shape, double lo, double hi, std::mt19937_64& rng,
                    bool requires_grad = true);
Tensor glorot_uniform(const Shape& shape, int fan_in, int fan_out, std::mt19937_64& rng,
                      bool requires_grad = true);

}  // namespace arn
