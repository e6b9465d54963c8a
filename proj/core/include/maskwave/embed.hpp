#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "maskwave/dsp.hpp"
#include "maskwave/manifest.hpp"
#include "maskwave/nn.hpp"

namespace maskwave::emb {

// Class index convention: 0 = mask, 1 = non-mask.
inline int label_index(Label l) { return l == Label::mask ? 0 : 1; }

struct ResidualClassifierSpec {
  int depth_blocks = 2;
  int base_channels = 16;
  int embedding_dim = 64;
  int classes = 2;

  // embedding_dim must equal base_channels * 2^k with k <= depth_blocks.
  void validate() const;
  int doublings() const;
};

struct Sample {
  const dsp::Spectrogram* spec = nullptr;
  int label = 0;
};

// Residual classifier: strided stem, doubling residual blocks, global
// average pooling into the embedding, dense softmax head.
class ClassifierModel {
 public:
  ClassifierModel() = default;
  ClassifierModel(const ResidualClassifierSpec& spec, int in_channels,
                  std::uint64_t seed);

  ad::Tensor embed(const ad::Tensor& batch) const;    // [N, embedding_dim]
  ad::Tensor logits(const ad::Tensor& batch) const;   // [N, classes]
  std::vector<nn::Param> params() const;
  const ResidualClassifierSpec& spec() const { return spec_; }

  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& snap);

 private:
  nn::Network body_;
  nn::Network head_;
  ResidualClassifierSpec spec_;
};

struct TrainOptions {
  int epochs = 60;
  double lr = 1e-3;
  int batch = 16;
  double weight_decay = 1e-4;
};

struct TrainResult {
  ClassifierModel model;  // best-dev-UAR checkpoint restored
  std::vector<double> dev_uar_history;
  double best_dev_uar = 0.0;
  int best_epoch = 0;  // 1-based; 0 when no epoch ran
};

TrainResult train_classifier(const ResidualClassifierSpec& spec,
                             const std::vector<Sample>& train,
                             const std::vector<Sample>& dev,
                             const TrainOptions& opt, std::uint64_t seed);

// Trains `runs` seeded trials and keeps the one with the highest dev UAR
// (ties break toward the earlier run).
TrainResult best_of_runs(const ResidualClassifierSpec& spec,
                         const std::vector<Sample>& train,
                         const std::vector<Sample>& dev,
                         const TrainOptions& opt, int runs,
                         std::uint64_t seed);

std::vector<int> predict_labels(const ClassifierModel& model,
                                const std::vector<const dsp::Spectrogram*>& specs,
                                int batch);

struct EmbeddingMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // row-major

  double& at(int r, int c) {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
  double at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
};

// Trained family in its registration order. Registration must be in
// strictly ascending depth order; anything else raises a config error so a
// shuffled family cannot silently reorder embedding columns.
class EmbeddingFamily {
 public:
  explicit EmbeddingFamily(std::vector<ClassifierModel> models);

  static int width_of(const std::vector<ResidualClassifierSpec>& specs);
  int width() const;

  // Rows follow the input order; columns are the concatenated embeddings in
  // family order.
  EmbeddingMatrix extract(
      const std::vector<const dsp::Spectrogram*>& specs, int batch = 16) const;

  const std::vector<ClassifierModel>& models() const { return models_; }

 private:
  std::vector<ClassifierModel> models_;
};

// Per-dimension z-score fitted on the training rows.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std_dev;

  static Standardizer fit(const EmbeddingMatrix& m,
                          const std::vector<bool>& is_train_row);
  void apply(EmbeddingMatrix& m) const;
};

// EMB1 container: "EMB1", u32 rows, u32 cols, f32 row-major data.
void write_emb(const std::filesystem::path& path, const EmbeddingMatrix& m);
EmbeddingMatrix read_emb(const std::filesystem::path& path);
void write_emb_csv(const std::filesystem::path& path,
                   const EmbeddingMatrix& m);

}  // namespace maskwave::emb
