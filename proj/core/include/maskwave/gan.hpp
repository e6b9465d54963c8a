#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "maskwave/dsp.hpp"
#include "maskwave/manifest.hpp"
#include "maskwave/nn.hpp"

namespace maskwave::gan {

struct GanConfig {
  int in_channels = 2;
  int image_size = 64;
  int base_channels = 8;    // generator encoder width; doubles per downsample
  int disc_channels = 8;    // discriminator width
  int res_blocks = 2;
  double lambda_cycle = 10.0;
  double lambda_identity = 10.0;
  double lambda_cam = 1000.0;
  double lr = 1e-4;
  double weight_decay = 1e-4;
  int batch = 2;
  int epochs = 100;
  int steps_per_epoch = 0;  // 0 = one pass over the smaller domain

  void validate() const;
};

// Entry-wise standardization applied before the tanh-bounded generator and
// inverted on emission.
struct DataStats {
  double mean = 0.0;
  double std_dev = 1.0;
  double tanh_scale = 1.0;  // generator output = tanh(.) * tanh_scale
};

// Encoder / CAM-attention bottleneck / AdaLIN decoder generator.
class Generator {
 public:
  Generator() = default;
  Generator(const GanConfig& cfg, Rng& rng, const std::string& name);

  struct Output {
    ad::Tensor image;      // same shape as the input batch
    ad::Tensor cam_logit;  // [N]
  };

  Output forward(const ad::Tensor& x, double out_scale) const;
  std::vector<nn::Param> params() const;

 private:
  nn::Network encoder_;
  ad::Tensor w_gap_, w_gmp_;  // CAM auxiliary classifier weights
  ad::Tensor att_w_, att_b_;  // 1x1 conv merging attended features
  nn::Network decoder_;
  int bottleneck_channels_ = 0;
  std::string name_;
};

// Strided-conv patch discriminator with a CAM auxiliary head; both heads are
// mean-reduced to one score per sample.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const GanConfig& cfg, Rng& rng, const std::string& name);

  struct Output {
    ad::Tensor score;      // [N]
    ad::Tensor cam_score;  // [N]
  };

  Output forward(const ad::Tensor& x) const;
  std::vector<nn::Param> params() const;

 private:
  nn::Network features_;
  ad::Tensor w_gap_, w_gmp_;
  ad::Tensor att_w_, att_b_;
  nn::Network head_;
  std::string name_;
};

struct TranslatorPair {
  Generator g;  // domain X -> Y
  Generator f;  // domain Y -> X
  Discriminator d_x;
  Discriminator d_y;
  GanConfig cfg;
  DataStats stats;
  bool trained = false;
};

TranslatorPair make_translator_pair(const GanConfig& cfg, std::uint64_t seed);

// Per-epoch loss summary. The adversarial and CAM terms are the least
// squares expressions evaluated with the discriminators' scores; total is
// the lambda-weighted sum of the stored terms.
struct GanLossReport {
  double l_gan_xy = 0.0;
  double l_gan_yx = 0.0;
  double l_cycle = 0.0;
  double l_identity = 0.0;
  double l_cam = 0.0;
  double total = 0.0;

  static double weighted_total(double gan_xy, double gan_yx, double cycle,
                               double identity, double cam,
                               const GanConfig& cfg);
};

// --- loss functions on raw score/value batches ---
// These are the printed least-squares / l1 expressions; the training loop
// builds the same quantities on the tape and reports through them.

// mean(real^2) + mean((1-fake)^2) for the X->Y direction.
double loss_gan_xy(std::span<const double> d_y_on_real_y,
                   std::span<const double> d_y_on_g_x);
// mean(real^2) + mean((1-fake)^2) for the Y->X direction.
double loss_gan_yx(std::span<const double> d_x_on_real_x,
                   std::span<const double> d_x_on_f_y);
// mean|F(G(x))-x| + mean|G(F(y))-y|, means over every element.
double loss_cycle(std::span<const double> x, std::span<const double> fgx,
                  std::span<const double> y, std::span<const double> gfy);
// mean|G(y)-y| + mean|F(x)-x|.
double loss_identity(std::span<const double> gy, std::span<const double> y,
                     std::span<const double> fx, std::span<const double> x);
// Four CAM-head least squares terms.
double loss_cam(std::span<const double> d_y_cam_on_y,
                std::span<const double> d_y_cam_on_g_x,
                std::span<const double> d_x_cam_on_x,
                std::span<const double> d_x_cam_on_f_y);

// Full forward pass over one batch from each domain; no parameter updates.
GanLossReport total_loss(const TranslatorPair& pair,
                         const std::vector<const dsp::Spectrogram*>& batch_x,
                         const std::vector<const dsp::Spectrogram*>& batch_y);

// Alternating discriminator/generator Adam training. Domains hold reduced
// spectrograms of identical geometry. Returns the trained pair; history gets
// one report per epoch.
TranslatorPair train_translator(const std::vector<dsp::Spectrogram>& domain_x,
                                const std::vector<dsp::Spectrogram>& domain_y,
                                const GanConfig& cfg, std::uint64_t seed,
                                std::vector<GanLossReport>* history = nullptr);

// Applies the pair's forward generator to one spectrogram (standardize,
// translate, de-standardize). ContractError if the pair is untrained.
dsp::Spectrogram translate(const TranslatorPair& pair,
                           const dsp::Spectrogram& input);

// Emits a translated, opposite-labeled twin for every training-split record.
// `load` fetches a record's spectrogram; `emit` persists a twin and returns
// the path to store in the extended manifest. Dev/test records pass through
// untouched.
Manifest translate_and_relabel(
    const Manifest& manifest, const TranslatorPair& mask_to_nonmask,
    const TranslatorPair& nonmask_to_mask,
    const std::function<dsp::Spectrogram(const ManifestRecord&)>& load,
    const std::function<std::string(const ManifestRecord&,
                                    const dsp::Spectrogram&)>& emit);

// --- checkpoint / metadata helpers used by the CLI ---
void save_pair(const std::filesystem::path& dir, const TranslatorPair& pair);
TranslatorPair load_pair(const std::filesystem::path& dir);
void save_history_csv(const std::filesystem::path& path,
                      const std::vector<GanLossReport>& history);

}  // namespace maskwave::gan
