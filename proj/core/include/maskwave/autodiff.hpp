#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace maskwave::ad {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // lazily sized; empty means all-zero
  bool requires_grad = false;
  bool leaf = false;
  bool backward_done = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;
  std::vector<int> aux;  // op scratch (argmax indices, ...)

  void ensure_grad();
  void accumulate(const std::vector<double>& g);
};

// Value handle into the autodiff tape. Copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor parameter(Shape shape, std::vector<double> values);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t count() const { return node_->value.size(); }
  std::vector<double>& values() { return node_->value; }
  const std::vector<double>& values() const { return node_->value; }
  std::vector<double>& grad();
  bool requires_grad() const { return node_->requires_grad; }
  double item() const;  // scalar value; ContractError if not scalar

  // Constant copy of the current value, cut off from the tape.
  Tensor detach() const;
  void zero_grad();

  // Reverse pass from a scalar output. Populates grad on every
  // requires_grad node reachable from here. A second backward over the same
  // tape (without rebuilding the forward) is a contract error.
  void backward();

  std::shared_ptr<Node> node_;
};

// --- elementwise ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor affine(const Tensor& x, double scale, double shift);  // scale*x + shift
Tensor square(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double negative_slope);

// --- linear algebra ---
Tensor matmul(const Tensor& x, const Tensor& w);     // [N,K]x[K,M] -> [N,M]
Tensor add_rowvec(const Tensor& x, const Tensor& b); // [N,M] + [M]

// --- convolution and spatial ops on [N,C,H,W] ---
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad);
Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad);
Tensor upsample_nearest(const Tensor& x, int factor);
Tensor global_avg_pool(const Tensor& x);  // [N,C,H,W] -> [N,C]
Tensor global_max_pool(const Tensor& x);  // [N,C,H,W] -> [N,C]
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor channel_scale(const Tensor& x, const Tensor& w);  // x[n,c,..]*w[c]

// --- normalization ---
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     double eps = 1e-5);
// rho-blended instance/layer normalization with per-channel affine.
Tensor adalin(const Tensor& x, const Tensor& rho, const Tensor& gamma,
              const Tensor& beta, double eps = 1e-5);

// --- shape & reductions ---
Tensor reshape(const Tensor& x, Shape new_shape);
Tensor mean_all(const Tensor& x);  // -> scalar

// --- classification loss ---
// Mean negative log-likelihood of labels under softmax(logits[N,K]).
Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels);

}  // namespace maskwave::ad
