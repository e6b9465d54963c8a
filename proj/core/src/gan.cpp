#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "maskwave/checkpoint.hpp"
#include "maskwave/errors.hpp"
#include "maskwave/gan.hpp"
#include "maskwave/io_util.hpp"

namespace maskwave::gan {

using ad::Tensor;

void GanConfig::validate() const {
  if (in_channels < 1) throw ParameterError("gan: in_channels must be >= 1");
  if (image_size < 8 || image_size % 4 != 0)
    throw ParameterError("gan: image_size must be a multiple of 4, >= 8");
  if (base_channels < 1 || disc_channels < 1)
    throw ParameterError("gan: channel counts must be >= 1");
  if (res_blocks < 1) throw ParameterError("gan: res_blocks must be >= 1");
  if (lambda_cycle < 0 || lambda_identity < 0 || lambda_cam < 0)
    throw ParameterError("gan: loss weights must be >= 0");
  if (!(lr > 0)) throw ParameterError("gan: lr must be > 0");
  if (weight_decay < 0) throw ParameterError("gan: weight_decay must be >= 0");
  if (batch < 1) throw ParameterError("gan: batch must be >= 1");
  if (epochs < 0) throw ParameterError("gan: epochs must be >= 0");
  if (steps_per_epoch < 0)
    throw ParameterError("gan: steps_per_epoch must be >= 0");
}

// ------------------------------------------------------------ generator

Generator::Generator(const GanConfig& cfg, Rng& rng, const std::string& name)
    : name_(name) {
  const int c = cfg.base_channels;
  const int b = 4 * c;
  bottleneck_channels_ = b;

  std::vector<nn::LayerSpec> enc{
      nn::LayerSpec::conv(c, 3, 1, false),     nn::LayerSpec::inst_norm(),
      nn::LayerSpec::leaky(0.0),
      nn::LayerSpec::conv(2 * c, 3, 2, false), nn::LayerSpec::inst_norm(),
      nn::LayerSpec::leaky(0.0),
      nn::LayerSpec::conv(b, 3, 2, false),     nn::LayerSpec::inst_norm(),
      nn::LayerSpec::leaky(0.0),
  };
  encoder_ = nn::Network(enc, cfg.in_channels, rng, name + ".enc");

  w_gap_ = nn::kaiming_uniform({b}, b, 1.0, rng);
  w_gmp_ = nn::kaiming_uniform({b}, b, 1.0, rng);
  att_w_ = nn::kaiming_uniform({b, 2 * b, 1, 1}, 2 * b, std::sqrt(2.0), rng);
  att_b_ = Tensor::parameter({b}, std::vector<double>(b, 0.0));

  std::vector<nn::LayerSpec> dec;
  for (int i = 0; i < cfg.res_blocks; ++i)
    dec.push_back(
        nn::LayerSpec::residual(b, 1, nn::NormKind::adalin, 0.9, false));
  dec.push_back(nn::LayerSpec::upsample(2));
  dec.push_back(nn::LayerSpec::conv(2 * c, 3, 1, false));
  dec.push_back(nn::LayerSpec::ada(0.0));
  dec.push_back(nn::LayerSpec::leaky(0.0));
  dec.push_back(nn::LayerSpec::upsample(2));
  dec.push_back(nn::LayerSpec::conv(c, 3, 1, false));
  dec.push_back(nn::LayerSpec::ada(0.0));
  dec.push_back(nn::LayerSpec::leaky(0.0));
  dec.push_back(nn::LayerSpec::conv(cfg.in_channels, 3, 1, true, 5.0 / 3.0));
  dec.push_back(nn::LayerSpec::tanh());
  decoder_ = nn::Network(dec, b, rng, name + ".dec");
}

Generator::Output Generator::forward(const ad::Tensor& x,
                                     double out_scale) const {
  const int n = x.shape()[0];
  const int b = bottleneck_channels_;
  auto e = encoder_.forward(x);

  auto gap = ad::global_avg_pool(e);
  auto gmp = ad::global_max_pool(e);
  auto logit = ad::add(ad::matmul(gap, ad::reshape(w_gap_, {b, 1})),
                       ad::matmul(gmp, ad::reshape(w_gmp_, {b, 1})));

  auto att = ad::concat_channels(ad::channel_scale(e, w_gap_),
                                 ad::channel_scale(e, w_gmp_));
  auto h = ad::leaky_relu(ad::conv2d(att, att_w_, att_b_, 1, 0), 0.0);

  Output out;
  out.image = ad::affine(decoder_.forward(h), out_scale, 0.0);
  out.cam_logit = ad::reshape(logit, {n});
  return out;
}

std::vector<nn::Param> Generator::params() const {
  auto out = encoder_.params();
  out.push_back({name_ + ".cam.w_gap", w_gap_});
  out.push_back({name_ + ".cam.w_gmp", w_gmp_});
  out.push_back({name_ + ".cam.att_w", att_w_});
  out.push_back({name_ + ".cam.att_b", att_b_});
  auto dec = decoder_.params();
  out.insert(out.end(), dec.begin(), dec.end());
  return out;
}

// --------------------------------------------------------- discriminator

Discriminator::Discriminator(const GanConfig& cfg, Rng& rng,
                             const std::string& name)
    : name_(name) {
  const int c = cfg.disc_channels;
  const int b = 4 * c;
  const double leaky_gain = std::sqrt(2.0 / (1.0 + 0.2 * 0.2));

  std::vector<nn::LayerSpec> feat{
      nn::LayerSpec::conv(c, 3, 2, true, leaky_gain),
      nn::LayerSpec::leaky(0.2),
      nn::LayerSpec::conv(2 * c, 3, 2, true, leaky_gain),
      nn::LayerSpec::leaky(0.2),
      nn::LayerSpec::conv(b, 3, 2, true, leaky_gain),
      nn::LayerSpec::leaky(0.2),
  };
  features_ = nn::Network(feat, cfg.in_channels, rng, name + ".feat");

  // Score heads start near zero so early generator updates are driven by
  // the cycle/identity terms instead of lambda_cam-scaled fooling noise.
  w_gap_ = nn::kaiming_uniform({b}, b, 0.05, rng);
  w_gmp_ = nn::kaiming_uniform({b}, b, 0.05, rng);
  att_w_ = nn::kaiming_uniform({b, 2 * b, 1, 1}, 2 * b, leaky_gain, rng);
  att_b_ = Tensor::parameter({b}, std::vector<double>(b, 0.0));

  std::vector<nn::LayerSpec> head{nn::LayerSpec::conv(1, 3, 1, true, 0.1)};
  head_ = nn::Network(head, b, rng, name + ".head");
}

Discriminator::Output Discriminator::forward(const ad::Tensor& x) const {
  const int n = x.shape()[0];
  const int b = w_gap_.shape()[0];
  auto e = features_.forward(x);

  auto gap = ad::global_avg_pool(e);
  auto gmp = ad::global_max_pool(e);
  auto cam = ad::add(ad::matmul(gap, ad::reshape(w_gap_, {b, 1})),
                     ad::matmul(gmp, ad::reshape(w_gmp_, {b, 1})));

  auto att = ad::concat_channels(ad::channel_scale(e, w_gap_),
                                 ad::channel_scale(e, w_gmp_));
  auto h = ad::leaky_relu(ad::conv2d(att, att_w_, att_b_, 1, 0), 0.2);

  auto patch = head_.forward(h);  // [N,1,ph,pw]
  Output out;
  out.score = ad::reshape(ad::global_avg_pool(patch), {n});
  out.cam_score = ad::reshape(cam, {n});
  return out;
}

std::vector<nn::Param> Discriminator::params() const {
  auto out = features_.params();
  out.push_back({name_ + ".cam.w_gap", w_gap_});
  out.push_back({name_ + ".cam.w_gmp", w_gmp_});
  out.push_back({name_ + ".cam.att_w", att_w_});
  out.push_back({name_ + ".cam.att_b", att_b_});
  auto head = head_.params();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

TranslatorPair make_translator_pair(const GanConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  TranslatorPair pair;
  pair.cfg = cfg;
  Rng rg(Rng::mix(seed, 0x67656e31));
  Rng rf(Rng::mix(seed, 0x67656e32));
  Rng rdx(Rng::mix(seed, 0x64697363 + 1));
  Rng rdy(Rng::mix(seed, 0x64697363 + 2));
  pair.g = Generator(cfg, rg, "g");
  pair.f = Generator(cfg, rf, "f");
  pair.d_x = Discriminator(cfg, rdx, "d_x");
  pair.d_y = Discriminator(cfg, rdy, "d_y");
  return pair;
}

// ------------------------------------------------------------- losses

namespace {

double mean_sq(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s / static_cast<double>(v.size());
}

double mean_one_minus_sq(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += (1.0 - x) * (1.0 - x);
  return s / static_cast<double>(v.size());
}

double mean_abs_diff(std::span<const double> a, std::span<const double> b,
                     const char* what) {
  if (a.size() != b.size())
    throw ShapeError(std::string(what) + ": size mismatch");
  if (a.empty()) throw ContractError(std::string(what) + ": empty batch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

void require_nonempty(std::span<const double> v, const char* what) {
  if (v.empty()) throw ContractError(std::string(what) + ": empty batch");
}

}  // namespace

double loss_gan_xy(std::span<const double> d_y_on_real_y,
                   std::span<const double> d_y_on_g_x) {
  require_nonempty(d_y_on_real_y, "loss_gan_xy");
  require_nonempty(d_y_on_g_x, "loss_gan_xy");
  return mean_sq(d_y_on_real_y) + mean_one_minus_sq(d_y_on_g_x);
}

double loss_gan_yx(std::span<const double> d_x_on_real_x,
                   std::span<const double> d_x_on_f_y) {
  require_nonempty(d_x_on_real_x, "loss_gan_yx");
  require_nonempty(d_x_on_f_y, "loss_gan_yx");
  return mean_sq(d_x_on_real_x) + mean_one_minus_sq(d_x_on_f_y);
}

double loss_cycle(std::span<const double> x, std::span<const double> fgx,
                  std::span<const double> y, std::span<const double> gfy) {
  return mean_abs_diff(fgx, x, "loss_cycle") +
         mean_abs_diff(gfy, y, "loss_cycle");
}

double loss_identity(std::span<const double> gy, std::span<const double> y,
                     std::span<const double> fx, std::span<const double> x) {
  return mean_abs_diff(gy, y, "loss_identity") +
         mean_abs_diff(fx, x, "loss_identity");
}

double loss_cam(std::span<const double> d_y_cam_on_y,
                std::span<const double> d_y_cam_on_g_x,
                std::span<const double> d_x_cam_on_x,
                std::span<const double> d_x_cam_on_f_y) {
  require_nonempty(d_y_cam_on_y, "loss_cam");
  require_nonempty(d_y_cam_on_g_x, "loss_cam");
  require_nonempty(d_x_cam_on_x, "loss_cam");
  require_nonempty(d_x_cam_on_f_y, "loss_cam");
  return mean_sq(d_y_cam_on_y) + mean_one_minus_sq(d_y_cam_on_g_x) +
         mean_sq(d_x_cam_on_x) + mean_one_minus_sq(d_x_cam_on_f_y);
}

double GanLossReport::weighted_total(double gan_xy, double gan_yx,
                                     double cycle, double identity, double cam,
                                     const GanConfig& cfg) {
  return gan_xy + gan_yx + cfg.lambda_cycle * cycle +
         cfg.lambda_identity * identity + cfg.lambda_cam * cam;
}

// ------------------------------------------------------- batch plumbing

namespace {

void check_geometry(const dsp::Spectrogram& s, const GanConfig& cfg) {
  if (s.channels != cfg.in_channels || s.freq_bins != cfg.image_size ||
      s.time_bins != cfg.image_size)
    throw ShapeError("spectrogram does not match translator geometry");
}

Tensor batch_tensor(const std::vector<const dsp::Spectrogram*>& specs,
                    const GanConfig& cfg, const DataStats& st) {
  if (specs.empty()) throw ContractError("empty translator batch");
  const int n = static_cast<int>(specs.size());
  const std::size_t per = specs[0]->data.size();
  std::vector<double> data;
  data.reserve(per * specs.size());
  for (const auto* s : specs) {
    check_geometry(*s, cfg);
    for (double v : s->data) data.push_back((v - st.mean) / st.std_dev);
  }
  return Tensor::constant({n, cfg.in_channels, cfg.image_size, cfg.image_size},
                          std::move(data));
}

DataStats compute_stats(const std::vector<dsp::Spectrogram>& domain_x,
                        const std::vector<dsp::Spectrogram>& domain_y) {
  DataStats st;
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (const auto* domain : {&domain_x, &domain_y})
    for (const auto& s : *domain)
      for (double v : s.data) {
        sum += v;
        sum_sq += v * v;
        ++n;
      }
  if (n == 0) throw DegenerateDataError("no translator training data");
  st.mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, sum_sq / static_cast<double>(n) -
                                       st.mean * st.mean);
  st.std_dev = var > 1e-24 ? std::sqrt(var) : 1.0;
  double max_abs_z = 0.0;
  for (const auto* domain : {&domain_x, &domain_y})
    for (const auto& s : *domain)
      for (double v : s.data)
        max_abs_z = std::max(max_abs_z, std::abs(v - st.mean) / st.std_dev);
  st.tanh_scale = 1.1 * std::max(1.0, max_abs_z);
  return st;
}

Tensor sq_mean(const Tensor& t) { return ad::mean_all(ad::square(t)); }
Tensor one_minus_sq_mean(const Tensor& t) {
  return ad::mean_all(ad::square(ad::affine(t, -1.0, 1.0)));
}
Tensor l1_mean(const Tensor& a, const Tensor& b) {
  return ad::mean_all(ad::abs(ad::sub(a, b)));
}

std::vector<nn::Param> concat_params(std::vector<nn::Param> a,
                                     const std::vector<nn::Param>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

GanLossReport total_loss(const TranslatorPair& pair,
                         const std::vector<const dsp::Spectrogram*>& batch_x,
                         const std::vector<const dsp::Spectrogram*>& batch_y) {
  const auto& cfg = pair.cfg;
  const double scale = pair.stats.tanh_scale;
  auto bx = batch_tensor(batch_x, cfg, pair.stats);
  auto by = batch_tensor(batch_y, cfg, pair.stats);

  auto gx = pair.g.forward(bx, scale);
  auto fy = pair.f.forward(by, scale);
  auto fgx = pair.f.forward(gx.image, scale);
  auto gfy = pair.g.forward(fy.image, scale);
  auto gy = pair.g.forward(by, scale);
  auto fx = pair.f.forward(bx, scale);

  auto dy_real = pair.d_y.forward(by);
  auto dy_fake = pair.d_y.forward(gx.image);
  auto dx_real = pair.d_x.forward(bx);
  auto dx_fake = pair.d_x.forward(fy.image);

  GanLossReport r;
  r.l_gan_xy =
      loss_gan_xy(dy_real.score.values(), dy_fake.score.values());
  r.l_gan_yx =
      loss_gan_yx(dx_real.score.values(), dx_fake.score.values());
  r.l_cycle = loss_cycle(bx.values(), fgx.image.values(), by.values(),
                         gfy.image.values());
  r.l_identity = loss_identity(gy.image.values(), by.values(),
                               fx.image.values(), bx.values());
  r.l_cam = loss_cam(dy_real.cam_score.values(), dy_fake.cam_score.values(),
                     dx_real.cam_score.values(), dx_fake.cam_score.values());
  r.total = GanLossReport::weighted_total(r.l_gan_xy, r.l_gan_yx, r.l_cycle,
                                          r.l_identity, r.l_cam, cfg);
  return r;
}

TranslatorPair train_translator(const std::vector<dsp::Spectrogram>& domain_x,
                                const std::vector<dsp::Spectrogram>& domain_y,
                                const GanConfig& cfg, std::uint64_t seed,
                                std::vector<GanLossReport>* history) {
  cfg.validate();
  if (domain_x.empty() || domain_y.empty())
    throw DegenerateDataError("translator training needs both domains");
  for (const auto& s : domain_x) check_geometry(s, cfg);
  for (const auto& s : domain_y) check_geometry(s, cfg);

  TranslatorPair pair = make_translator_pair(cfg, seed);
  pair.stats = compute_stats(domain_x, domain_y);
  if (cfg.epochs == 0) return pair;

  const double scale = pair.stats.tanh_scale;
  const auto nx = domain_x.size();
  const auto ny = domain_y.size();
  const int batch = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(cfg.batch),
                            std::min(nx, ny)));
  const int full_steps = static_cast<int>(
      (std::min(nx, ny) + static_cast<std::size_t>(batch) - 1) / batch);
  const int steps =
      cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : full_steps;

  nn::AdamConfig ac;
  ac.lr = cfg.lr;
  ac.weight_decay = cfg.weight_decay;
  nn::Adam opt_g(concat_params(pair.g.params(), pair.f.params()), ac);
  nn::Adam opt_d(concat_params(pair.d_x.params(), pair.d_y.params()), ac);

  Rng order_rng(Rng::mix(seed, 0x6f726472));
  std::vector<std::size_t> idx_x(nx), idx_y(ny);
  for (std::size_t i = 0; i < nx; ++i) idx_x[i] = i;
  for (std::size_t i = 0; i < ny; ++i) idx_y[i] = i;

  const double lam_cam = cfg.lambda_cam;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    opt_g.set_epoch_hint(epoch);
    opt_d.set_epoch_hint(epoch);
    order_rng.shuffle(idx_x);
    order_rng.shuffle(idx_y);
    std::size_t cur_x = 0, cur_y = 0;
    GanLossReport acc;

    for (int step = 0; step < steps; ++step) {
      std::vector<const dsp::Spectrogram*> sel_x, sel_y;
      for (int i = 0; i < batch; ++i) {
        sel_x.push_back(&domain_x[idx_x[cur_x++ % nx]]);
        sel_y.push_back(&domain_y[idx_y[cur_y++ % ny]]);
      }
      auto bx = batch_tensor(sel_x, cfg, pair.stats);
      auto by = batch_tensor(sel_y, cfg, pair.stats);

      // Generator step. The generators chase the label the discriminators
      // assign to real data (0 in the printed convention).
      auto gx = pair.g.forward(bx, scale);
      auto fy = pair.f.forward(by, scale);
      auto fgx = pair.f.forward(gx.image, scale);
      auto gfy = pair.g.forward(fy.image, scale);
      auto gy = pair.g.forward(by, scale);
      auto fx = pair.f.forward(bx, scale);
      auto dy_fake = pair.d_y.forward(gx.image);
      auto dx_fake = pair.d_x.forward(fy.image);

      auto g_adv = ad::add(sq_mean(dy_fake.score), sq_mean(dx_fake.score));
      auto g_cam =
          ad::add(sq_mean(dy_fake.cam_score), sq_mean(dx_fake.cam_score));
      auto cyc = ad::add(l1_mean(fgx.image, bx), l1_mean(gfy.image, by));
      auto idt = ad::add(l1_mean(gy.image, by), l1_mean(fx.image, bx));
      auto g_loss =
          ad::add(ad::add(g_adv, ad::affine(g_cam, lam_cam, 0.0)),
                  ad::add(ad::affine(cyc, cfg.lambda_cycle, 0.0),
                          ad::affine(idt, cfg.lambda_identity, 0.0)));
      if (!std::isfinite(g_loss.item()))
        throw TrainingDivergedError("generator loss is not finite", epoch);

      const double step_cycle = cyc.item();
      const double step_identity = idt.item();
      auto fake_y = gx.image.detach();
      auto fake_x = fy.image.detach();

      g_loss.backward();
      opt_g.step();
      opt_g.zero_grad();
      opt_d.zero_grad();

      // Discriminator step on the pre-update fakes, detached.
      auto dy_real = pair.d_y.forward(by);
      auto dy_fake2 = pair.d_y.forward(fake_y);
      auto dx_real = pair.d_x.forward(bx);
      auto dx_fake2 = pair.d_x.forward(fake_x);

      auto d_adv = ad::add(
          ad::add(sq_mean(dy_real.score), one_minus_sq_mean(dy_fake2.score)),
          ad::add(sq_mean(dx_real.score), one_minus_sq_mean(dx_fake2.score)));
      auto d_cam = ad::add(
          ad::add(sq_mean(dy_real.cam_score), one_minus_sq_mean(dy_fake2.cam_score)),
          ad::add(sq_mean(dx_real.cam_score), one_minus_sq_mean(dx_fake2.cam_score)));
      auto d_loss = ad::add(d_adv, ad::affine(d_cam, lam_cam, 0.0));
      if (!std::isfinite(d_loss.item()))
        throw TrainingDivergedError("discriminator loss is not finite", epoch);

      const double step_gan_xy =
          loss_gan_xy(dy_real.score.values(), dy_fake2.score.values());
      const double step_gan_yx =
          loss_gan_yx(dx_real.score.values(), dx_fake2.score.values());
      const double step_cam =
          loss_cam(dy_real.cam_score.values(), dy_fake2.cam_score.values(),
                   dx_real.cam_score.values(), dx_fake2.cam_score.values());

      d_loss.backward();
      opt_d.step();
      opt_d.zero_grad();
      opt_g.zero_grad();

      acc.l_gan_xy += step_gan_xy;
      acc.l_gan_yx += step_gan_yx;
      acc.l_cycle += step_cycle;
      acc.l_identity += step_identity;
      acc.l_cam += step_cam;
    }

    acc.l_gan_xy /= steps;
    acc.l_gan_yx /= steps;
    acc.l_cycle /= steps;
    acc.l_identity /= steps;
    acc.l_cam /= steps;
    acc.total = GanLossReport::weighted_total(acc.l_gan_xy, acc.l_gan_yx,
                                              acc.l_cycle, acc.l_identity,
                                              acc.l_cam, cfg);
    if (history) history->push_back(acc);
  }

  pair.trained = true;
  return pair;
}

dsp::Spectrogram translate(const TranslatorPair& pair,
                           const dsp::Spectrogram& input) {
  if (!pair.trained)
    throw ContractError("translate: generator pair is untrained");
  check_geometry(input, pair.cfg);
  auto batch = batch_tensor({&input}, pair.cfg, pair.stats);
  auto out = pair.g.forward(batch, pair.stats.tanh_scale);
  dsp::Spectrogram result = input;
  const auto& v = out.image.values();
  for (std::size_t i = 0; i < result.data.size(); ++i)
    result.data[i] = v[i] * pair.stats.std_dev + pair.stats.mean;
  return result;
}

Manifest translate_and_relabel(
    const Manifest& manifest, const TranslatorPair& mask_to_nonmask,
    const TranslatorPair& nonmask_to_mask,
    const std::function<dsp::Spectrogram(const ManifestRecord&)>& load,
    const std::function<std::string(const ManifestRecord&,
                                    const dsp::Spectrogram&)>& emit) {
  if (!mask_to_nonmask.trained || !nonmask_to_mask.trained)
    throw ContractError("translate_and_relabel: untrained generator");
  Manifest out;
  out.base_dir = manifest.base_dir;
  out.records = manifest.records;
  for (const auto& r : manifest.records) {
    if (r.split != Split::train) continue;
    const auto& pair =
        r.label == Label::mask ? mask_to_nonmask : nonmask_to_mask;
    const auto source = load(r);
    auto twin = translate(pair, source);
    if (twin.channels != source.channels || twin.freq_bins != source.freq_bins ||
        twin.time_bins != source.time_bins)
      throw ShapeError("translated spectrogram changed shape: " + r.id);
    ManifestRecord t;
    t.id = r.id + "__tr";
    t.label = opposite(r.label);
    t.split = Split::train;
    t.provenance = Provenance::translated;
    t.path = emit(t, twin);
    out.records.push_back(std::move(t));
  }
  return out;
}

// ------------------------------------------------------ persistence

namespace {

void save_net_params(const std::filesystem::path& path,
                     const std::vector<nn::Param>& params) {
  nn::save_params(path, params);
}

std::map<std::string, std::string> read_kv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("bad meta line in " + path.string() + ": " + line);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string()
                                    : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_pair(const std::filesystem::path& dir, const TranslatorPair& pair) {
  std::filesystem::create_directories(dir);
  save_net_params(dir / "g.nnp1", pair.g.params());
  save_net_params(dir / "f.nnp1", pair.f.params());
  save_net_params(dir / "d_x.nnp1", pair.d_x.params());
  save_net_params(dir / "d_y.nnp1", pair.d_y.params());
  std::ostringstream os;
  const auto& c = pair.cfg;
  os << "gan.in_channels = " << c.in_channels << "\n";
  os << "gan.image_size = " << c.image_size << "\n";
  os << "gan.base_channels = " << c.base_channels << "\n";
  os << "gan.disc_channels = " << c.disc_channels << "\n";
  os << "gan.res_blocks = " << c.res_blocks << "\n";
  os << "gan.lambda_cycle = " << fmt_double(c.lambda_cycle) << "\n";
  os << "gan.lambda_identity = " << fmt_double(c.lambda_identity) << "\n";
  os << "gan.lambda_cam = " << fmt_double(c.lambda_cam) << "\n";
  os << "gan.lr = " << fmt_double(c.lr) << "\n";
  os << "gan.weight_decay = " << fmt_double(c.weight_decay) << "\n";
  os << "gan.batch = " << c.batch << "\n";
  os << "gan.epochs = " << c.epochs << "\n";
  os << "gan.steps_per_epoch = " << c.steps_per_epoch << "\n";
  os << "stats.mean = " << fmt_double(pair.stats.mean) << "\n";
  os << "stats.std_dev = " << fmt_double(pair.stats.std_dev) << "\n";
  os << "stats.tanh_scale = " << fmt_double(pair.stats.tanh_scale) << "\n";
  os << "trained = " << (pair.trained ? "true" : "false") << "\n";
  io::atomic_write_text(dir / "meta.cfg", os.str());
}

TranslatorPair load_pair(const std::filesystem::path& dir) {
  const auto kv = read_kv(dir / "meta.cfg");
  auto get = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end())
      throw FormatError("missing key '" + k + "' in " + (dir / "meta.cfg").string());
    return it->second;
  };
  GanConfig c;
  c.in_channels = std::stoi(get("gan.in_channels"));
  c.image_size = std::stoi(get("gan.image_size"));
  c.base_channels = std::stoi(get("gan.base_channels"));
  c.disc_channels = std::stoi(get("gan.disc_channels"));
  c.res_blocks = std::stoi(get("gan.res_blocks"));
  c.lambda_cycle = std::stod(get("gan.lambda_cycle"));
  c.lambda_identity = std::stod(get("gan.lambda_identity"));
  c.lambda_cam = std::stod(get("gan.lambda_cam"));
  c.lr = std::stod(get("gan.lr"));
  c.weight_decay = std::stod(get("gan.weight_decay"));
  c.batch = std::stoi(get("gan.batch"));
  c.epochs = std::stoi(get("gan.epochs"));
  c.steps_per_epoch = std::stoi(get("gan.steps_per_epoch"));

  TranslatorPair pair = make_translator_pair(c, 0);
  pair.stats.mean = std::stod(get("stats.mean"));
  pair.stats.std_dev = std::stod(get("stats.std_dev"));
  pair.stats.tanh_scale = std::stod(get("stats.tanh_scale"));
  pair.trained = get("trained") == "true";

  auto load_into = [&](const char* file, std::vector<nn::Param> params) {
    nn::load_params(dir / file, params);
  };
  load_into("g.nnp1", pair.g.params());
  load_into("f.nnp1", pair.f.params());
  load_into("d_x.nnp1", pair.d_x.params());
  load_into("d_y.nnp1", pair.d_y.params());
  return pair;
}

void save_history_csv(const std::filesystem::path& path,
                      const std::vector<GanLossReport>& history) {
  std::ostringstream os;
  os << "epoch,l_gan_xy,l_gan_yx,l_cycle,l_identity,l_cam,total\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& r = history[i];
    os << (i + 1) << ',' << fmt_double(r.l_gan_xy) << ','
       << fmt_double(r.l_gan_yx) << ',' << fmt_double(r.l_cycle) << ','
       << fmt_double(r.l_identity) << ',' << fmt_double(r.l_cam) << ','
       << fmt_double(r.total) << '\n';
  }
  io::atomic_write_text(path, os.str());
}

}  // namespace maskwave::gan
