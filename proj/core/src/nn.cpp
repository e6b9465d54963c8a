#include <algorithm>
#include <cmath>

#include "maskwave/errors.hpp"
#include "maskwave/nn.hpp"

namespace maskwave::nn {

LayerSpec LayerSpec::conv(int out_channels, int kernel, int stride, bool bias,
                          double gain) {
  LayerSpec s{LayerKind::conv2d};
  s.out_channels = out_channels;
  s.kernel = kernel;
  s.stride = stride;
  s.bias = bias;
  s.gain = gain;
  return s;
}

LayerSpec LayerSpec::dense(int units, bool bias, double gain) {
  LayerSpec s{LayerKind::dense};
  s.units = units;
  s.bias = bias;
  s.gain = gain;
  return s;
}

LayerSpec LayerSpec::leaky(double slope) {
  LayerSpec s{LayerKind::leaky_relu};
  s.slope = slope;
  return s;
}

LayerSpec LayerSpec::tanh() { return LayerSpec{LayerKind::tanh_act}; }
LayerSpec LayerSpec::inst_norm() { return LayerSpec{LayerKind::instance_norm}; }

LayerSpec LayerSpec::ada(double rho_init) {
  LayerSpec s{LayerKind::adalin};
  s.rho_init = rho_init;
  return s;
}

LayerSpec LayerSpec::gap() { return LayerSpec{LayerKind::global_avg_pool}; }
LayerSpec LayerSpec::gmp() { return LayerSpec{LayerKind::global_max_pool}; }

LayerSpec LayerSpec::upsample(int factor) {
  LayerSpec s{LayerKind::upsample_nearest};
  s.factor = factor;
  return s;
}

LayerSpec LayerSpec::residual(int out_channels, int stride, NormKind norm,
                              double rho_init, bool final_act, double slope) {
  LayerSpec s{LayerKind::residual_block};
  s.out_channels = out_channels;
  s.stride = stride;
  s.res_norm = norm;
  s.res_rho_init = rho_init;
  s.res_final_act = final_act;
  s.res_slope = slope;
  return s;
}

ad::Tensor kaiming_uniform(const ad::Shape& shape, int fan_in, double gain,
                           Rng& rng) {
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
  std::vector<double> v(ad::numel(shape));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return ad::Tensor::parameter(shape, std::move(v));
}

namespace {

void check_4d(const ad::Tensor& x, const char* what) {
  if (x.shape().size() != 4)
    throw ShapeError(std::string(what) + ": expected [N,C,H,W], got " +
                     ad::shape_str(x.shape()));
}

class ConvLayer : public Layer {
 public:
  ConvLayer(const LayerSpec& spec, int in_channels, Rng& rng)
      : stride_(spec.stride), pad_((spec.kernel - 1) / 2) {
    const int fan_in = in_channels * spec.kernel * spec.kernel;
    w_ = kaiming_uniform({spec.out_channels, in_channels, spec.kernel,
                          spec.kernel},
                         fan_in, spec.gain, rng);
    if (spec.bias)
      b_ = ad::Tensor::parameter({spec.out_channels},
                                 std::vector<double>(spec.out_channels, 0.0));
  }

  ad::Tensor forward(const ad::Tensor& x) override {
    check_4d(x, "conv2d");
    return b_.defined() ? ad::conv2d(x, w_, b_, stride_, pad_)
                        : ad::conv2d(x, w_, stride_, pad_);
  }

  void collect(const std::string& prefix, std::vector<Param>& out) override {
    out.push_back({prefix + ".w", w_});
    if (b_.defined()) out.push_back({prefix + ".b", b_});
  }

  int out_channels(int) const override { return w_.shape()[0]; }

 private:
  ad::Tensor w_, b_;
  int stride_, pad_;
};

class DenseLayer : public Layer {
 public:
  DenseLayer(const LayerSpec& spec, int in_features, Rng& rng) {
    w_ = kaiming_uniform({in_features, spec.units}, in_features, spec.gain, rng);
    if (spec.bias)
      b_ = ad::Tensor::parameter({spec.units},
                                 std::vector<double>(spec.units, 0.0));
  }

  ad::Tensor forward(const ad::Tensor& x) override {
    if (x.shape().size() != 2)
      throw ShapeError("dense: expected [N,F], got " + ad::shape_str(x.shape()));
    auto y = ad::matmul(x, w_);
    return b_.defined() ? ad::add_rowvec(y, b_) : y;
  }

  void collect(const std::string& prefix, std::vector<Param>& out) override {
    out.push_back({prefix + ".w", w_});
    if (b_.defined()) out.push_back({prefix + ".b", b_});
  }

  int out_channels(int) const override { return w_.shape()[1]; }

 private:
  ad::Tensor w_, b_;
};

class ActLayer : public Layer {
 public:
  ActLayer(LayerKind kind, double slope) : kind_(kind), slope_(slope) {}

  ad::Tensor forward(const ad::Tensor& x) override {
    return kind_ == LayerKind::tanh_act ? ad::tanh(x)
                                        : ad::leaky_relu(x, slope_);
  }
  void collect(const std::string&, std::vector<Param>&) override {}
  int out_channels(int c) const override { return c; }

 private:
  LayerKind kind_;
  double slope_;
};

class InstanceNormLayer : public Layer {
 public:
  explicit InstanceNormLayer(int channels) {
    gamma_ = ad::Tensor::parameter({channels},
                                   std::vector<double>(channels, 1.0));
    beta_ = ad::Tensor::parameter({channels},
                                  std::vector<double>(channels, 0.0));
  }

  ad::Tensor forward(const ad::Tensor& x) override {
    check_4d(x, "instance_norm");
    return ad::instance_norm(x, gamma_, beta_);
  }

  void collect(const std::string& prefix, std::vector<Param>& out) override {
    out.push_back({prefix + ".gamma", gamma_});
    out.push_back({prefix + ".beta", beta_});
  }

  int out_channels(int c) const override { return c; }

 private:
  ad::Tensor gamma_, beta_;
};

class AdalinLayer : public Layer {
 public:
  AdalinLayer(int channels, double rho_init) {
    rho_ = ad::Tensor::parameter({channels},
                                 std::vector<double>(channels, rho_init));
    gamma_ = ad::Tensor::parameter({channels},
                                   std::vector<double>(channels, 1.0));
    beta_ = ad::Tensor::parameter({channels},
                                  std::vector<double>(channels, 0.0));
  }

  ad::Tensor forward(const ad::Tensor& x) override {
    check_4d(x, "adalin");
    return ad::adalin(x, rho_, gamma_, beta_);
  }

  void collect(const std::string& prefix, std::vector<Param>& out) override {
    out.push_back({prefix + ".rho", rho_, true});
    out.push_back({prefix + ".gamma", gamma_});
    out.push_back({prefix + ".beta", beta_});
  }

  int out_channels(int c) const override { return c; }

 private:
  ad::Tensor rho_, gamma_, beta_;
};

class PoolLayer : public Layer {
 public:
  explicit PoolLayer(LayerKind kind) : kind_(kind) {}
  ad::Tensor forward(const ad::Tensor& x) override {
    check_4d(x, "global pool");
    return kind_ == LayerKind::global_avg_pool ? ad::global_avg_pool(x)
                                               : ad::global_max_pool(x);
  }
  void collect(const std::string&, std::vector<Param>&) override {}
  int out_channels(int c) const override { return c; }

 private:
  LayerKind kind_;
};

class UpsampleLayer : public Layer {
 public:
  explicit UpsampleLayer(int factor) : factor_(factor) {}
  ad::Tensor forward(const ad::Tensor& x) override {
    return ad::upsample_nearest(x, factor_);
  }
  void collect(const std::string&, std::vector<Param>&) override {}
  int out_channels(int c) const override { return c; }

 private:
  int factor_;
};

std::unique_ptr<Layer> make_norm(NormKind kind, int channels, double rho_init) {
  switch (kind) {
    case NormKind::instance:
      return std::make_unique<InstanceNormLayer>(channels);
    case NormKind::adalin:
      return std::make_unique<AdalinLayer>(channels, rho_init);
    case NormKind::none:
      return nullptr;
  }
  return nullptr;
}

// conv-norm-act-conv-norm with identity (or 1x1 projection) skip.
class ResidualBlockLayer : public Layer {
 public:
  ResidualBlockLayer(const LayerSpec& spec, int in_channels, Rng& rng)
      : final_act_(spec.res_final_act), slope_(spec.res_slope) {
    const int oc = spec.out_channels;
    LayerSpec c1 = LayerSpec::conv(oc, 3, spec.stride, false);
    LayerSpec c2 = LayerSpec::conv(oc, 3, 1, false);
    conv1_ = std::make_unique<ConvLayer>(c1, in_channels, rng);
    norm1_ = make_norm(spec.res_norm, oc, spec.res_rho_init);
    conv2_ = std::make_unique<ConvLayer>(c2, oc, rng);
    norm2_ = make_norm(spec.res_norm, oc, spec.res_rho_init);
    if (spec.stride != 1 || in_channels != oc) {
      LayerSpec cp = LayerSpec::conv(oc, 1, spec.stride, false, 1.0);
      proj_ = std::make_unique<ConvLayer>(cp, in_channels, rng);
      proj_norm_ = make_norm(spec.res_norm, oc, spec.res_rho_init);
    }
  }

  ad::Tensor forward(const ad::Tensor& x) override {
    auto h = conv1_->forward(x);
    if (norm1_) h = norm1_->forward(h);
    h = ad::leaky_relu(h, slope_);
    h = conv2_->forward(h);
    if (norm2_) h = norm2_->forward(h);
    ad::Tensor skip = x;
    if (proj_) {
      skip = proj_->forward(x);
      if (proj_norm_) skip = proj_norm_->forward(skip);
    }
    auto y = ad::add(h, skip);
    return final_act_ ? ad::leaky_relu(y, slope_) : y;
  }

  void collect(const std::string& prefix, std::vector<Param>& out) override {
    conv1_->collect(prefix + ".conv1", out);
    if (norm1_) norm1_->collect(prefix + ".norm1", out);
    conv2_->collect(prefix + ".conv2", out);
    if (norm2_) norm2_->collect(prefix + ".norm2", out);
    if (proj_) proj_->collect(prefix + ".proj", out);
    if (proj_norm_) proj_norm_->collect(prefix + ".proj_norm", out);
  }

  int out_channels(int) const override { return conv2_->out_channels(0); }

 private:
  std::unique_ptr<Layer> conv1_, norm1_, conv2_, norm2_, proj_, proj_norm_;
  bool final_act_;
  double slope_;
};

}  // namespace

std::unique_ptr<Layer> build_layer(const LayerSpec& spec, int in_channels,
                                   Rng& rng) {
  switch (spec.kind) {
    case LayerKind::conv2d:
      if (spec.out_channels < 1 || spec.kernel < 1 || spec.stride < 1)
        throw ParameterError("conv2d spec out of range");
      return std::make_unique<ConvLayer>(spec, in_channels, rng);
    case LayerKind::dense:
      if (spec.units < 1) throw ParameterError("dense units out of range");
      return std::make_unique<DenseLayer>(spec, in_channels, rng);
    case LayerKind::leaky_relu:
      if (spec.slope < 0.0 || spec.slope > 1.0)
        throw ParameterError("leaky_relu slope must be in [0,1]");
      return std::make_unique<ActLayer>(spec.kind, spec.slope);
    case LayerKind::tanh_act:
      return std::make_unique<ActLayer>(spec.kind, 0.0);
    case LayerKind::instance_norm:
      return std::make_unique<InstanceNormLayer>(in_channels);
    case LayerKind::adalin:
      if (spec.rho_init < 0.0 || spec.rho_init > 1.0)
        throw ParameterError("adalin rho_init must be in [0,1]");
      return std::make_unique<AdalinLayer>(in_channels, spec.rho_init);
    case LayerKind::global_avg_pool:
    case LayerKind::global_max_pool:
      return std::make_unique<PoolLayer>(spec.kind);
    case LayerKind::upsample_nearest:
      if (spec.factor < 1) throw ParameterError("upsample factor out of range");
      return std::make_unique<UpsampleLayer>(spec.factor);
    case LayerKind::residual_block:
      if (spec.out_channels < 1 || spec.stride < 1)
        throw ParameterError("residual_block spec out of range");
      return std::make_unique<ResidualBlockLayer>(spec, in_channels, rng);
  }
  throw ParameterError("unknown layer kind");
}

Network::Network(const std::vector<LayerSpec>& specs, int in_channels,
                 Rng& rng, std::string name)
    : name_(std::move(name)) {
  int channels = in_channels;
  for (const auto& spec : specs) {
    layers_.push_back(build_layer(spec, channels, rng));
    channels = layers_.back()->out_channels(channels);
  }
  out_channels_ = channels;
}

ad::Tensor Network::forward(const ad::Tensor& input) const {
  ad::Tensor x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      x = layers_[i]->forward(x);
    } catch (const ShapeError& e) {
      throw ShapeError(name_ + " layer " + std::to_string(i) + ": " + e.what());
    }
  }
  return x;
}

std::vector<Param> Network::params() const {
  std::vector<Param> out;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->collect(name_ + "." + std::to_string(i), out);
  return out;
}

Adam::Adam(std::vector<Param> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.count(), 0.0);
    v_.emplace_back(p.tensor.count(), 0.0);
  }
}

void Adam::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    auto& p = params_[pi];
    auto& values = p.tensor.values();
    auto& grad = p.tensor.grad();
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      if (!std::isfinite(g))
        throw TrainingDivergedError(
            "non-finite gradient in parameter " + p.name, epoch_hint_);
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      const double decay = cfg_.lr * cfg_.weight_decay * values[i];
      values[i] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps) + decay;
      if (p.clamp01) values[i] = std::clamp(values[i], 0.0, 1.0);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace maskwave::nn
