#include "arn/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace arn {

std::int64_t shape_size(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative extent in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : node_(std::make_shared<detail::TensorNode>()) {
  node_->data.assign(static_cast<std::size_t>(shape_size(shape)), fill);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<detail::TensorNode>()) {
  if (shape_size(shape) != static_cast<std::int64_t>(data.size()))
    throw ShapeError("data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{v}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw InternalError("use of undefined tensor");
  return node_->shape;
}

std::int64_t Tensor::size() const {
  return static_cast<std::int64_t>(node_ ? node_->data.size() : 0);
}

std::span<double> Tensor::data() {
  if (!node_) throw InternalError("use of undefined tensor");
  return node_->data;
}

std::span<const double> Tensor::data() const {
  if (!node_) throw InternalError("use of undefined tensor");
  return node_->data;
}

double Tensor::value() const {
  if (size() != 1) throw ShapeError("value() on non-scalar tensor " + shape_str(shape()));
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool v) {
  if (!node_) throw InternalError("use of undefined tensor");
  node_->requires_grad = v;
  return *this;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<double> Tensor::grad() {
  if (!has_grad()) throw InternalError("grad() on tensor without gradient buffer");
  return node_->grad;
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw InternalError("grad() on tensor without gradient buffer");
  return node_->grad;
}

void Tensor::ensure_grad() {
  if (!node_) throw InternalError("use of undefined tensor");
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

bool Tensor::all_finite() const {
  if (!node_) return true;
  for (double v : node_->data)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::require_finite(const std::string& what) const {
  if (!all_finite()) throw NumericError("non-finite values in " + what);
}

Tensor Tensor::clone() const {
  if (!node_) return Tensor();
  Tensor out;
  out.node_ = std::make_shared<detail::TensorNode>();
  out.node_->shape = node_->shape;
  out.node_->data = node_->data;
  out.node_->requires_grad = node_->requires_grad;
  return out;
}

namespace {
std::atomic<std::uint64_t> g_tape_counter{0};
thread_local Tape* g_active_tape = nullptr;
}  // namespace

Tape::Tape() : id_(++g_tape_counter) {}

void Tape::record(std::function<void()> backward_fn) {
  entries_.push_back(std::move(backward_fn));
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw ShapeError("backward() expects a scalar loss, got " + shape_str(loss.shape()));
  if (loss.node()->tape_id != id_)
    throw InternalError("loss tensor is not reachable from this tape");
  Tensor seed = loss;
  seed.ensure_grad();
  seed.grad()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = prev_; }

Tape* active_tape() { return g_active_tape; }

Tensor uniform_init(const Shape& shape, double lo, double hi, std::mt19937_64& rng,
                    bool requires_grad) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> data(static_cast<std::size_t>(shape_size(shape)));
  for (auto& v : data) v = dist(rng);
  return Tensor(shape, std::move(data), requires_grad);
}

Tensor glorot_uniform(const Shape& shape, int fan_in, int fan_out, std::mt19937_64& rng,
                      bool requires_grad) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  return uniform_init(shape, -bound, bound, rng, requires_grad);
}

}  // namespace arn
