#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tac {

class Rng;

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One node of the recorded computation. The graph of nodes reachable from a
// loss is the tape; backward() replays it in reverse topological order.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;           // lazily sized on backward
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Accumulates this node's grad into its parents' grads.
  std::function<void(Node&)> backward;

  void ensure_grad();
};

}  // namespace detail

/// Dense row-major double tensor; a shared handle into the autodiff graph.
/// Values are immutable once created except for leaf parameters, which an
/// optimizer may update between forward passes via mutable_data().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rank() const { return shape().size(); }
  bool requires_grad() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();  // leaf tensors only
  std::span<const double> grad() const;
  double item() const;  // scalar tensors

  // Reverse pass from a scalar; fills grad() of every requires-grad tensor
  // reachable through the tape.
  void backward() const;
  void zero_grad();

  // Same values, cut off from the tape (gradients stop here).
  Tensor detach() const;

  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Creates an op node; `backward` sees the finished node and accumulates into
// node.parents[i]->grad (only for parents that require grad).
Tensor make_op(Shape shape, std::vector<double> data,
               std::vector<Tensor> inputs,
               std::function<void(detail::Node&)> backward);

// ---- elementwise / broadcast binary ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// ---- elementwise unary ----
Tensor neg(const Tensor& t);
Tensor relu(const Tensor& t);
Tensor leaky_relu(const Tensor& t, double slope);
Tensor sigmoid(const Tensor& t);
Tensor exp(const Tensor& t);
Tensor log(const Tensor& t);
Tensor abs(const Tensor& t);
Tensor sqrt(const Tensor& t);
Tensor scale(const Tensor& t, double c);
Tensor add_scalar(const Tensor& t, double c);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);  // [N,P] x [P,Q]

// Cross-correlation, NCHW input, FCkHkW kernel, zero padding.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride,
              std::size_t padding);

// ---- shape ----
Tensor reshape(const Tensor& t, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

// ---- reductions ----
enum class Reduce { Sum, Mean, Max };
Tensor reduce(const Tensor& t, const std::vector<std::size_t>& axes,
              Reduce mode);
Tensor reduce_all(const Tensor& t, Reduce mode);

// ---- fused losses (numerically stable primitives) ----
// mean over all elements of max(a,0) - a*t + log1p(exp(-|a|))
Tensor bce_with_logits_mean(const Tensor& logits, const Tensor& targets);
// mean over rows of -sum_k targets[k] * log softmax(logits)[k]
Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& targets);

// ---- init helpers ----
Tensor uniform_init(Shape shape, double lo, double hi, Rng& rng,
                    bool requires_grad = false);
Tensor normal_init(Shape shape, double stddev, Rng& rng,
                   bool requires_grad = false);

// ---- gradient checking ----
struct GradCheckReport {
  bool pass = false;
  double max_rel_error = 0.0;
  std::string worst;  // "input i, element j"
};

/// Compares tape gradients of a scalar-valued function against central
/// finite differences at the given point(s).
GradCheckReport gradcheck(
    const std::function<Tensor(const std::vector<Tensor>&)>& f,
    std::vector<Tensor> points, double eps = 1e-5, double tol = 1e-4);

}  // namespace tac
