#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "maskwave/embed.hpp"
#include "maskwave/errors.hpp"
#include "maskwave/io_util.hpp"
#include "maskwave/metrics.hpp"

namespace maskwave::emb {

void ResidualClassifierSpec::validate() const {
  if (depth_blocks < 1) throw ConfigError("classifier depth must be >= 1");
  if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
  if (embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
  if (classes != 2) throw ConfigError("only two-class models are supported");
  if (embedding_dim % base_channels != 0)
    throw ConfigError("embedding_dim must be base_channels * 2^k");
  int ratio = embedding_dim / base_channels;
  int k = 0;
  while (ratio > 1) {
    if (ratio % 2 != 0)
      throw ConfigError("embedding_dim must be base_channels * 2^k");
    ratio /= 2;
    ++k;
  }
  if (k > depth_blocks)
    throw ConfigError("embedding_dim requires more doubling blocks than depth");
}

int ResidualClassifierSpec::doublings() const {
  int ratio = embedding_dim / base_channels;
  int k = 0;
  while (ratio > 1) {
    ratio /= 2;
    ++k;
  }
  return k;
}

ClassifierModel::ClassifierModel(const ResidualClassifierSpec& spec,
                                 int in_channels, std::uint64_t seed)
    : spec_(spec) {
  spec.validate();
  Rng rng(Rng::mix(seed, 0x636c6673));
  std::vector<nn::LayerSpec> body{
      nn::LayerSpec::conv(spec.base_channels, 3, 2, false),
      nn::LayerSpec::inst_norm(),
      nn::LayerSpec::leaky(0.0),
  };
  const int k = spec.doublings();
  int channels = spec.base_channels;
  for (int i = 0; i < spec.depth_blocks; ++i) {
    if (i < k) {
      channels *= 2;
      body.push_back(nn::LayerSpec::residual(channels, 2, nn::NormKind::instance));
    } else {
      body.push_back(nn::LayerSpec::residual(channels, 1, nn::NormKind::instance));
    }
  }
  body.push_back(nn::LayerSpec::gap());
  body_ = nn::Network(body, in_channels, rng, "body");
  head_ = nn::Network({nn::LayerSpec::dense(spec.classes, true, 1.0)},
                      spec.embedding_dim, rng, "head");
}

ad::Tensor ClassifierModel::embed(const ad::Tensor& batch) const {
  return body_.forward(batch);
}

ad::Tensor ClassifierModel::logits(const ad::Tensor& batch) const {
  return head_.forward(body_.forward(batch));
}

std::vector<nn::Param> ClassifierModel::params() const {
  auto out = body_.params();
  auto head = head_.params();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

std::vector<std::vector<double>> ClassifierModel::snapshot() const {
  std::vector<std::vector<double>> snap;
  for (const auto& p : params()) snap.push_back(p.tensor.values());
  return snap;
}

void ClassifierModel::restore(const std::vector<std::vector<double>>& snap) {
  auto ps = params();
  if (snap.size() != ps.size())
    throw ContractError("snapshot does not match model parameters");
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i].tensor.values() = snap[i];
}

namespace {

ad::Tensor sample_batch(const std::vector<Sample>& samples,
                        const std::vector<std::size_t>& order,
                        std::size_t begin, std::size_t end,
                        std::vector<int>* labels) {
  const auto* first = samples[order[begin]].spec;
  const int c = first->channels, h = first->freq_bins, w = first->time_bins;
  std::vector<double> data;
  data.reserve((end - begin) * first->data.size());
  if (labels) labels->clear();
  for (std::size_t i = begin; i < end; ++i) {
    const auto& s = samples[order[i]];
    if (s.spec->channels != c || s.spec->freq_bins != h ||
        s.spec->time_bins != w)
      throw ShapeError("mixed spectrogram shapes in one batch");
    data.insert(data.end(), s.spec->data.begin(), s.spec->data.end());
    if (labels) labels->push_back(s.label);
  }
  return ad::Tensor::constant({static_cast<int>(end - begin), c, h, w},
                              std::move(data));
}

ad::Tensor spec_batch(const std::vector<const dsp::Spectrogram*>& specs,
                      std::size_t begin, std::size_t end) {
  const auto* first = specs[begin];
  const int c = first->channels, h = first->freq_bins, w = first->time_bins;
  std::vector<double> data;
  data.reserve((end - begin) * first->data.size());
  for (std::size_t i = begin; i < end; ++i) {
    if (specs[i]->channels != c || specs[i]->freq_bins != h ||
        specs[i]->time_bins != w)
      throw ShapeError("mixed spectrogram shapes in one batch");
    data.insert(data.end(), specs[i]->data.begin(), specs[i]->data.end());
  }
  return ad::Tensor::constant({static_cast<int>(end - begin), c, h, w},
                              std::move(data));
}

double dev_uar_of(const ClassifierModel& model, const std::vector<Sample>& dev,
                  int batch) {
  std::vector<const dsp::Spectrogram*> specs;
  specs.reserve(dev.size());
  for (const auto& s : dev) specs.push_back(s.spec);
  const auto pred = predict_labels(model, specs, batch);
  eval::ConfusionMatrix cm;
  for (std::size_t i = 0; i < dev.size(); ++i)
    cm.add(dev[i].label, pred[i]);
  return eval::uar(cm);
}

}  // namespace

std::vector<int> predict_labels(
    const ClassifierModel& model,
    const std::vector<const dsp::Spectrogram*>& specs, int batch) {
  std::vector<int> out;
  out.reserve(specs.size());
  for (std::size_t begin = 0; begin < specs.size();
       begin += static_cast<std::size_t>(batch)) {
    const auto end =
        std::min(specs.size(), begin + static_cast<std::size_t>(batch));
    auto logits = model.logits(spec_batch(specs, begin, end));
    const int k = logits.shape()[1];
    for (std::size_t i = 0; i < end - begin; ++i) {
      const double* row = logits.values().data() + i * static_cast<std::size_t>(k);
      int best = 0;
      for (int j = 1; j < k; ++j)
        if (row[j] > row[best]) best = j;
      out.push_back(best);
    }
  }
  return out;
}

TrainResult train_classifier(const ResidualClassifierSpec& spec,
                             const std::vector<Sample>& train,
                             const std::vector<Sample>& dev,
                             const TrainOptions& opt, std::uint64_t seed) {
  spec.validate();
  if (opt.epochs < 0) throw ParameterError("epochs must be >= 0");
  if (opt.batch < 1) throw ParameterError("batch must be >= 1");
  if (train.empty()) throw DegenerateDataError("empty training split");
  bool has[2] = {false, false};
  for (const auto& s : train) {
    if (s.label < 0 || s.label > 1) throw ParameterError("label must be 0 or 1");
    has[s.label] = true;
  }
  if (!has[0] || !has[1])
    throw DegenerateDataError("training data holds a single class");

  const int in_channels = train[0].spec->channels;
  TrainResult result;
  result.model = ClassifierModel(spec, in_channels, seed);
  if (opt.epochs == 0) return result;
  if (dev.empty()) throw DegenerateDataError("empty dev split");

  nn::AdamConfig ac;
  ac.lr = opt.lr;
  ac.weight_decay = opt.weight_decay;
  nn::Adam optimizer(result.model.params(), ac);

  Rng order_rng(Rng::mix(seed, 0x6f726465));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<std::vector<double>> best_snap;
  std::vector<int> labels;
  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    optimizer.set_epoch_hint(epoch);
    order_rng.shuffle(order);
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(opt.batch)) {
      const auto end =
          std::min(order.size(), begin + static_cast<std::size_t>(opt.batch));
      auto batch = sample_batch(train, order, begin, end, &labels);
      auto loss = ad::softmax_cross_entropy(result.model.logits(batch), labels);
      if (!std::isfinite(loss.item()))
        throw TrainingDivergedError("classifier loss is not finite", epoch);
      loss.backward();
      optimizer.step();
      optimizer.zero_grad();
    }
    const double uar = dev_uar_of(result.model, dev, opt.batch);
    result.dev_uar_history.push_back(uar);
    if (uar > result.best_dev_uar || result.best_epoch == 0) {
      result.best_dev_uar = uar;
      result.best_epoch = epoch;
      best_snap = result.model.snapshot();
    }
  }
  result.model.restore(best_snap);
  return result;
}

TrainResult best_of_runs(const ResidualClassifierSpec& spec,
                         const std::vector<Sample>& train,
                         const std::vector<Sample>& dev,
                         const TrainOptions& opt, int runs,
                         std::uint64_t seed) {
  if (runs < 1) throw ParameterError("runs must be >= 1");
  TrainResult best;
  bool first = true;
  for (int run = 0; run < runs; ++run) {
    auto r = train_classifier(spec, train, dev, opt,
                              Rng::mix(seed, 0x72756e00 + run));
    if (first || r.best_dev_uar > best.best_dev_uar) {
      best = std::move(r);
      first = false;
    }
  }
  return best;
}

EmbeddingFamily::EmbeddingFamily(std::vector<ClassifierModel> models)
    : models_(std::move(models)) {
  if (models_.empty()) throw ConfigError("empty embedding family");
  for (std::size_t i = 1; i < models_.size(); ++i)
    if (models_[i].spec().depth_blocks <= models_[i - 1].spec().depth_blocks)
      throw ConfigError(
          "family must be registered in strictly ascending depth order");
}

int EmbeddingFamily::width_of(
    const std::vector<ResidualClassifierSpec>& specs) {
  int w = 0;
  for (const auto& s : specs) w += s.embedding_dim;
  return w;
}

int EmbeddingFamily::width() const {
  int w = 0;
  for (const auto& m : models_) w += m.spec().embedding_dim;
  return w;
}

EmbeddingMatrix EmbeddingFamily::extract(
    const std::vector<const dsp::Spectrogram*>& specs, int batch) const {
  if (specs.empty()) throw DegenerateDataError("no spectrograms to embed");
  EmbeddingMatrix m;
  m.rows = static_cast<int>(specs.size());
  m.cols = width();
  m.data.assign(static_cast<std::size_t>(m.rows) * m.cols, 0.0);
  int col_off = 0;
  for (const auto& model : models_) {
    const int dim = model.spec().embedding_dim;
    for (std::size_t begin = 0; begin < specs.size();
         begin += static_cast<std::size_t>(batch)) {
      const auto end =
          std::min(specs.size(), begin + static_cast<std::size_t>(batch));
      auto emb = model.embed(spec_batch(specs, begin, end));
      for (std::size_t i = 0; i < end - begin; ++i)
        for (int j = 0; j < dim; ++j)
          m.at(static_cast<int>(begin + i), col_off + j) =
              emb.values()[i * static_cast<std::size_t>(dim) + j];
    }
    col_off += dim;
  }
  return m;
}

Standardizer Standardizer::fit(const EmbeddingMatrix& m,
                               const std::vector<bool>& is_train_row) {
  if (static_cast<int>(is_train_row.size()) != m.rows)
    throw ShapeError("is_train_row size does not match matrix rows");
  long n_train = 0;
  for (bool b : is_train_row)
    if (b) ++n_train;
  if (n_train == 0) throw DegenerateDataError("no training rows to fit");
  Standardizer st;
  st.mean.assign(static_cast<std::size_t>(m.cols), 0.0);
  st.std_dev.assign(static_cast<std::size_t>(m.cols), 1.0);
  for (int r = 0; r < m.rows; ++r)
    if (is_train_row[static_cast<std::size_t>(r)])
      for (int c = 0; c < m.cols; ++c) st.mean[c] += m.at(r, c);
  for (auto& v : st.mean) v /= static_cast<double>(n_train);
  std::vector<double> var(static_cast<std::size_t>(m.cols), 0.0);
  for (int r = 0; r < m.rows; ++r)
    if (is_train_row[static_cast<std::size_t>(r)])
      for (int c = 0; c < m.cols; ++c) {
        const double d = m.at(r, c) - st.mean[c];
        var[c] += d * d;
      }
  for (int c = 0; c < m.cols; ++c) {
    const double v = var[c] / static_cast<double>(n_train);
    st.std_dev[c] = v > 1e-24 ? std::sqrt(v) : 1.0;
  }
  return st;
}

void Standardizer::apply(EmbeddingMatrix& m) const {
  if (static_cast<int>(mean.size()) != m.cols)
    throw ShapeError("standardizer width does not match matrix");
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c)
      m.at(r, c) = (m.at(r, c) - mean[c]) / std_dev[c];
}

void write_emb(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  io::atomic_write_file(path, [&](std::ostream& os) {
    os.write("EMB1", 4);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.rows));
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.cols));
    for (double v : m.data) io::write_le<float>(os, static_cast<float>(v));
  });
}

EmbeddingMatrix read_emb(const std::filesystem::path& path) {
  const auto bytes = io::read_file_bytes(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "EMB1", 4) != 0)
    throw FormatError("not an EMB1 file: " + path.string());
  auto u32_at = [&](std::size_t off) {
    return static_cast<std::uint32_t>(bytes[off]) |
           static_cast<std::uint32_t>(bytes[off + 1]) << 8 |
           static_cast<std::uint32_t>(bytes[off + 2]) << 16 |
           static_cast<std::uint32_t>(bytes[off + 3]) << 24;
  };
  EmbeddingMatrix m;
  m.rows = static_cast<int>(u32_at(4));
  m.cols = static_cast<int>(u32_at(8));
  const std::size_t count = static_cast<std::size_t>(m.rows) * m.cols;
  if (bytes.size() != 12 + count * 4)
    throw FormatError("EMB1 size mismatch: " + path.string());
  m.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    float f;
    std::memcpy(&f, bytes.data() + 12 + i * 4, 4);
    m.data[i] = static_cast<double>(f);
  }
  return m;
}

void write_emb_csv(const std::filesystem::path& path,
                   const EmbeddingMatrix& m) {
  std::ostringstream os;
  for (int c = 0; c < m.cols; ++c) os << (c ? "," : "") << c;
  os << '\n';
  char buf[40];
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      std::snprintf(buf, sizeof(buf), "%.9g", m.at(r, c));
      os << (c ? "," : "") << buf;
    }
    os << '\n';
  }
  io::atomic_write_text(path, os.str());
}

}  // namespace maskwave::emb
