#pragma once

#include <memory>
#include <string>
#include <vector>

#include "maskwave/autodiff.hpp"
#include "maskwave/rng.hpp"

namespace maskwave::nn {

enum class LayerKind {
  conv2d,
  dense,
  leaky_relu,
  tanh_act,
  instance_norm,
  adalin,
  global_avg_pool,
  global_max_pool,
  upsample_nearest,
  residual_block,
};

enum class NormKind { none, instance, adalin };

// Declarative layer description; Network materializes parameters from it.
struct LayerSpec {
  LayerKind kind;
  int out_channels = 0;   // conv2d / residual_block
  int kernel = 3;         // conv2d
  int stride = 1;         // conv2d / residual_block
  bool bias = true;       // conv2d / dense
  double gain = 1.4142135623730951;  // kaiming gain for conv/dense init
  double slope = 0.0;     // leaky_relu
  double rho_init = 0.9;  // adalin
  int factor = 2;         // upsample_nearest
  int units = 0;          // dense
  NormKind res_norm = NormKind::instance;  // residual_block inner norm
  double res_rho_init = 0.9;
  bool res_final_act = true;  // activation after the skip-add
  double res_slope = 0.0;

  static LayerSpec conv(int out_channels, int kernel, int stride,
                        bool bias = true, double gain = 1.4142135623730951);
  static LayerSpec dense(int units, bool bias = true, double gain = 1.0);
  static LayerSpec leaky(double slope);
  static LayerSpec tanh();
  static LayerSpec inst_norm();
  static LayerSpec ada(double rho_init);
  static LayerSpec gap();
  static LayerSpec gmp();
  static LayerSpec upsample(int factor);
  static LayerSpec residual(int out_channels, int stride, NormKind norm,
                            double rho_init = 0.9, bool final_act = true,
                            double slope = 0.0);
};

struct Param {
  std::string name;
  ad::Tensor tensor;
  bool clamp01 = false;  // adalin blend weights live in [0,1]
};

ad::Tensor kaiming_uniform(const ad::Shape& shape, int fan_in, double gain,
                           Rng& rng);

class Layer {
 public:
  virtual ~Layer() = default;
  virtual ad::Tensor forward(const ad::Tensor& x) = 0;
  virtual void collect(const std::string& prefix, std::vector<Param>& out) = 0;
  virtual int out_channels(int in_channels) const = 0;
};

std::unique_ptr<Layer> build_layer(const LayerSpec& spec, int in_channels,
                                   Rng& rng);

// Sequential stack over LayerSpecs. Forward records the tape whenever any
// parameter requires gradients; shape problems name the offending layer.
class Network {
 public:
  Network() = default;
  Network(const std::vector<LayerSpec>& specs, int in_channels, Rng& rng,
          std::string name = "net");

  ad::Tensor forward(const ad::Tensor& input) const;
  std::vector<Param> params() const;
  int out_channels() const { return out_channels_; }
  const std::string& name() const { return name_; }

 private:
  std::vector<std::shared_ptr<Layer>> layers_;
  int out_channels_ = 0;
  std::string name_;
};

// Adam with decoupled weight decay. Parameters flagged clamp01 are clamped
// to [0,1] after every step.
struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

class Adam {
 public:
  Adam(std::vector<Param> params, AdamConfig cfg);

  void step();       // throws TrainingDivergedError on non-finite gradients
  void zero_grad();
  long step_count() const { return step_; }
  void set_epoch_hint(int epoch) { epoch_hint_ = epoch; }

 private:
  std::vector<Param> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamConfig cfg_;
  long step_ = 0;
  int epoch_hint_ = -1;
};

}  // namespace maskwave::nn
