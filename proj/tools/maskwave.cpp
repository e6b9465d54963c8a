#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "maskwave/augment.hpp"
#include "maskwave/checkpoint.hpp"
#include "maskwave/config.hpp"
#include "maskwave/embed.hpp"
#include "maskwave/errors.hpp"
#include "maskwave/experiment.hpp"
#include "maskwave/gan.hpp"
#include "maskwave/io_util.hpp"
#include "maskwave/manifest.hpp"
#include "maskwave/metrics.hpp"
#include "maskwave/svm.hpp"
#include "maskwave/synth.hpp"

namespace fs = std::filesystem;
using namespace maskwave;

namespace {

PipelineConfig load_config(const std::string& path) {
  return path.empty() ? PipelineConfig{} : PipelineConfig::parse_file(path);
}

int resolve_jobs(int flag_jobs, const PipelineConfig& cfg) {
  if (flag_jobs > 0) return flag_jobs;
  if (const char* env = std::getenv("MASKWAVE_JOBS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return cfg.experiment.jobs;
}

dsp::Spectrogram featurize(const dsp::Waveform& wav, const PipelineConfig& cfg,
                           bool reduced) {
  auto spec = dsp::stft(dsp::normalize_peak(wav), cfg.stft);
  return reduced ? dsp::reduce_spectrogram(spec, cfg.reduce) : spec;
}

// Loads an SPG manifest into patch geometry (reducing full-size files).
std::vector<dsp::Spectrogram> load_patches(const Manifest& manifest,
                                           const PipelineConfig& cfg) {
  std::vector<dsp::Spectrogram> patches;
  patches.reserve(manifest.records.size());
  for (const auto& r : manifest.records)
    patches.push_back(
        dsp::reduce_spectrogram(dsp::read_spg(manifest.resolve(r)), cfg.reduce));
  return patches;
}

struct SvmRows {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
};

SvmRows rows_for_split(const emb::EmbeddingMatrix& m, const Manifest& manifest,
                       Split split) {
  SvmRows rows;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    if (manifest.records[i].split != split) continue;
    std::vector<double> row(static_cast<std::size_t>(m.cols));
    for (int c = 0; c < m.cols; ++c)
      row[static_cast<std::size_t>(c)] = m.at(static_cast<int>(i), c);
    rows.x.push_back(std::move(row));
    rows.y.push_back(manifest.records[i].label == Label::mask ? 1 : -1);
  }
  return rows;
}

std::vector<emb::ResidualClassifierSpec> family_specs(
    const PipelineConfig& cfg) {
  std::vector<emb::ResidualClassifierSpec> specs;
  for (std::size_t i = 0; i < cfg.embed.depths.size(); ++i) {
    emb::ResidualClassifierSpec s;
    s.depth_blocks = cfg.embed.depths[i];
    s.base_channels = cfg.embed.base_channels;
    s.embedding_dim = cfg.embed.dims[i];
    s.validate();
    specs.push_back(s);
  }
  return specs;
}

// ---------------------------------------------------------------- commands

int cmd_synth_data(const std::string& config_path, const std::string& out,
                   std::uint64_t seed) {
  auto cfg = load_config(config_path);
  const auto items = synth::generate_corpus(cfg.synth, seed);
  const auto manifest = synth::write_corpus(items, out);
  std::printf("wrote %zu utterances under %s\n", manifest.records.size(),
              out.c_str());
  return 0;
}

int cmd_extract(const std::string& manifest_path,
                const std::string& config_path, const std::string& out,
                const std::string& geometry) {
  auto cfg = load_config(config_path);
  auto manifest = Manifest::load(manifest_path);
  manifest.validate(true);
  const bool reduced = geometry == "reduced";
  fs::create_directories(fs::path(out) / "spg");
  Manifest out_manifest;
  out_manifest.base_dir = out;
  for (const auto& r : manifest.records) {
    const auto spec = featurize(dsp::read_wav(manifest.resolve(r)), cfg, reduced);
    const std::string rel = "spg/" + r.id + ".spg";
    dsp::write_spg(fs::path(out) / rel, spec);
    ManifestRecord nr = r;
    nr.path = rel;
    out_manifest.records.push_back(std::move(nr));
  }
  out_manifest.save(fs::path(out) / "manifest.csv");
  std::printf("extracted %zu spectrograms to %s\n",
              out_manifest.records.size(), out.c_str());
  return 0;
}

int cmd_augment(const std::string& manifest_path,
                const std::string& config_path, const std::string& out,
                const std::string& geometry, std::uint64_t seed) {
  auto cfg = load_config(config_path);
  auto manifest = Manifest::load(manifest_path);
  manifest.validate(true);
  const bool reduced = geometry != "full";
  fs::create_directories(fs::path(out) / "spg");

  Manifest out_manifest;
  out_manifest.base_dir = out;
  auto write_record = [&](const ManifestRecord& r, const dsp::Spectrogram& s) {
    const std::string rel = "spg/" + r.id + ".spg";
    dsp::write_spg(fs::path(out) / rel, s);
    ManifestRecord nr = r;
    nr.path = rel;
    out_manifest.records.push_back(std::move(nr));
  };

  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& r = manifest.records[i];
    const auto wav = dsp::normalize_peak(dsp::read_wav(manifest.resolve(r)));
    auto full = dsp::stft(wav, cfg.stft);
    write_record(r, reduced ? dsp::reduce_spectrogram(full, cfg.reduce) : full);
    if (r.split != Split::train) continue;

    const std::uint64_t s = Rng::mix(seed, 0x747769, i);
    dsp::Spectrogram twin;
    std::string suffix;
    switch (cfg.augment.kind) {
      case aug::AugKind::noise: {
        Rng pick(Rng::mix(s, 1));
        const auto& choices = cfg.augment.snr_db_choices;
        const double snr = choices[static_cast<std::size_t>(pick.uniform_int(
            0, static_cast<std::int64_t>(choices.size()) - 1))];
        twin = dsp::stft(dsp::normalize_peak(
                             aug::perturb_noise(wav, snr, Rng::mix(s, 2))),
                         cfg.stft);
        suffix = "__noise";
        break;
      }
      case aug::AugKind::time_shift:
        twin = dsp::stft(aug::time_shift(wav, cfg.augment.max_shift_fraction,
                                         Rng::mix(s, 3)),
                         cfg.stft);
        suffix = "__shift";
        break;
      case aug::AugKind::speed: {
        Rng pick(Rng::mix(s, 4));
        const auto& factors = cfg.augment.speed_factors;
        const double factor =
            factors[static_cast<std::size_t>(pick.uniform_int(
                0, static_cast<std::int64_t>(factors.size()) - 1))];
        twin = dsp::stft(aug::perturb_speed(wav, factor), cfg.stft);
        suffix = "__speed";
        break;
      }
      case aug::AugKind::spec_mask:
        twin = aug::spec_mask(full, cfg.augment, Rng::mix(s, 5));
        suffix = "__mask";
        break;
    }
    ManifestRecord tr = r;
    tr.id = r.id + suffix;
    tr.provenance = Provenance::perturbed;
    write_record(tr, reduced ? dsp::reduce_spectrogram(twin, cfg.reduce) : twin);
  }
  out_manifest.save(fs::path(out) / "manifest.csv");
  std::printf("augmented manifest with %zu records at %s\n",
              out_manifest.records.size(), out.c_str());
  return 0;
}

int cmd_train_gan(const std::string& manifest_path,
                  const std::string& config_path, const std::string& out,
                  const std::string& direction, std::uint64_t seed, int jobs) {
  auto cfg = load_config(config_path);
  (void)jobs;
  auto manifest = Manifest::load(manifest_path);
  manifest.validate(true);
  const auto patches = load_patches(manifest, cfg);

  std::vector<dsp::Spectrogram> mask_patches, nonmask_patches;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    if (manifest.records[i].split != Split::train) continue;
    if (manifest.records[i].label == Label::mask)
      mask_patches.push_back(patches[i]);
    else
      nonmask_patches.push_back(patches[i]);
  }

  gan::GanConfig gc = cfg.gan;
  gc.image_size = cfg.patch_size();
  const bool forward = direction == "mask-to-nonmask";
  const auto& domain_x = forward ? mask_patches : nonmask_patches;
  const auto& domain_y = forward ? nonmask_patches : mask_patches;

  std::vector<gan::GanLossReport> history;
  const auto pair = gan::train_translator(domain_x, domain_y, gc, seed, &history);
  gan::save_pair(out, pair);
  gan::save_history_csv(fs::path(out) / "history.csv", history);
  if (!history.empty())
    std::printf("trained %s for %zu epochs, final cycle loss %.6f\n",
                direction.c_str(), history.size(), history.back().l_cycle);
  return 0;
}

int cmd_translate(const std::string& manifest_path,
                  const std::string& forward_dir,
                  const std::string& backward_dir, const std::string& out,
                  const std::string& config_path) {
  auto cfg = load_config(config_path);
  auto manifest = Manifest::load(manifest_path);
  manifest.validate(true);
  const auto patches = load_patches(manifest, cfg);
  const auto pair_xy = gan::load_pair(forward_dir);
  const auto pair_yx = gan::load_pair(backward_dir);

  fs::create_directories(fs::path(out) / "spg");
  std::unordered_map<std::string, const dsp::Spectrogram*> by_id;
  for (std::size_t i = 0; i < manifest.records.size(); ++i)
    by_id[manifest.records[i].id] = &patches[i];

  auto extended = gan::translate_and_relabel(
      manifest, pair_xy, pair_yx,
      [&](const ManifestRecord& r) { return *by_id.at(r.id); },
      [&](const ManifestRecord& t, const dsp::Spectrogram& s) {
        const std::string rel = "spg/" + t.id + ".spg";
        dsp::write_spg(fs::path(out) / rel, s);
        return rel;
      });
  // originals keep their location; point the extended manifest at them
  for (auto& r : extended.records)
    if (r.provenance != Provenance::translated)
      r.path = fs::relative(manifest.resolve(r), out).string();
  extended.base_dir = out;
  extended.save(fs::path(out) / "manifest.csv");
  std::printf("translated %zu training records into %s\n",
              extended.records.size() - manifest.records.size(), out.c_str());
  return 0;
}

int cmd_train_embed(const std::string& manifest_path,
                    const std::string& config_path, const std::string& out,
                    std::uint64_t seed, int jobs) {
  auto cfg = load_config(config_path);
  (void)jobs;
  auto manifest = Manifest::load(manifest_path);
  manifest.validate(true);
  const auto patches = load_patches(manifest, cfg);

  std::vector<emb::Sample> train, dev;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const emb::Sample s{&patches[i],
                        emb::label_index(manifest.records[i].label)};
    if (manifest.records[i].split == Split::train) train.push_back(s);
    else if (manifest.records[i].split == Split::dev) dev.push_back(s);
  }

  emb::TrainOptions opt;
  opt.epochs = cfg.embed.epochs;
  opt.lr = cfg.embed.lr;
  opt.batch = cfg.embed.batch;
  opt.weight_decay = cfg.embed.weight_decay;

  fs::create_directories(out);
  const auto specs = family_specs(cfg);
  for (std::size_t mi = 0; mi < specs.size(); ++mi) {
    const auto result = emb::best_of_runs(
        specs[mi], train, dev, opt, cfg.embed.runs,
        Rng::mix(seed, 0x6d6f64, 0, static_cast<std::uint64_t>(mi)));
    const std::string name = "depth" + std::to_string(specs[mi].depth_blocks);
    nn::save_params(fs::path(out) / ("model_" + name + ".nnp1"),
                    result.model.params());
    std::ostringstream hist;
    hist << "epoch,dev_uar\n";
    for (std::size_t e = 0; e < result.dev_uar_history.size(); ++e) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.2f", result.dev_uar_history[e]);
      hist << (e + 1) << ',' << buf << '\n';
    }
    io::atomic_write_text(fs::path(out) / ("dev_history_" + name + ".csv"),
                          hist.str());
    std::printf("%s best dev UAR %.2f (epoch %d)\n", name.c_str(),
                result.best_dev_uar, result.best_epoch);
  }
  io::atomic_write_text(fs::path(out) / "config.cfg", cfg.snapshot());
  return 0;
}

emb::EmbeddingFamily load_family(const std::string& models_dir) {
  const auto cfg = PipelineConfig::parse_file(fs::path(models_dir) / "config.cfg");
  std::vector<emb::ClassifierModel> models;
  for (const auto& spec : family_specs(cfg)) {
    emb::ClassifierModel model(spec, cfg.gan.in_channels, 0);
    auto params = model.params();
    nn::load_params(fs::path(models_dir) /
                        ("model_depth" + std::to_string(spec.depth_blocks) +
                         ".nnp1"),
                    params);
    models.push_back(std::move(model));
  }
  return emb::EmbeddingFamily(std::move(models));
}

int cmd_extract_embed(const std::string& manifest_path,
                      const std::string& models_dir, const std::string& out,
                      const std::string& format) {
  const auto cfg =
      PipelineConfig::parse_file(fs::path(models_dir) / "config.cfg");
  auto manifest = Manifest::load(manifest_path);
  manifest.validate(true);
  const auto patches = load_patches(manifest, cfg);
  const auto family = load_family(models_dir);

  std::vector<const dsp::Spectrogram*> specs;
  for (const auto& p : patches) specs.push_back(&p);
  auto matrix = family.extract(specs, cfg.embed.batch);

  std::vector<bool> is_train;
  for (const auto& r : manifest.records)
    is_train.push_back(r.split == Split::train);
  emb::Standardizer::fit(matrix, is_train).apply(matrix);

  if (format == "csv")
    emb::write_emb_csv(out, matrix);
  else
    emb::write_emb(out, matrix);
  std::printf("wrote %dx%d embeddings to %s\n", matrix.rows, matrix.cols,
              out.c_str());
  return 0;
}

int cmd_train_svm(const std::string& embeddings_path,
                  const std::string& manifest_path,
                  const std::string& config_path, const std::string& out,
                  const std::string& c_table_path, bool final_refit) {
  auto cfg = load_config(config_path);
  auto manifest = Manifest::load(manifest_path);
  manifest.validate(false);
  const auto matrix = emb::read_emb(embeddings_path);
  if (matrix.rows != static_cast<int>(manifest.records.size()))
    throw ShapeError("embedding rows do not match manifest records");

  const auto train = rows_for_split(matrix, manifest, Split::train);
  const auto dev = rows_for_split(matrix, manifest, Split::dev);
  const auto tune =
      svm::tune_c(train.x, train.y, dev.x, dev.y, cfg.svm.gamma, cfg.svm.c_grid);

  if (!c_table_path.empty()) {
    std::ostringstream os;
    os << "c,dev_uar\n";
    for (const auto& row : tune.table) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%g,%.2f\n", row.c, row.dev_uar);
      os << buf;
    }
    io::atomic_write_text(c_table_path, os.str());
  }

  svm::SvmModel model = tune.best_model;
  if (final_refit) {
    auto merged_x = train.x;
    merged_x.insert(merged_x.end(), dev.x.begin(), dev.x.end());
    auto merged_y = train.y;
    merged_y.insert(merged_y.end(), dev.y.begin(), dev.y.end());
    model = svm::train_svm(merged_x, merged_y,
                           {cfg.svm.gamma, tune.best_c});
  }
  svm::write_svm(out, model);
  std::printf("best C = %g, %zu support vectors, model at %s\n", tune.best_c,
              model.support_vectors.size(), out.c_str());
  return 0;
}

int cmd_predict(const std::string& model_path,
                const std::string& embeddings_path, const std::string& out,
                const std::string& manifest_path) {
  const auto model = svm::read_svm(model_path);
  const auto matrix = emb::read_emb(embeddings_path);
  std::vector<std::vector<double>> queries;
  for (int r = 0; r < matrix.rows; ++r) {
    std::vector<double> row(static_cast<std::size_t>(matrix.cols));
    for (int c = 0; c < matrix.cols; ++c)
      row[static_cast<std::size_t>(c)] = matrix.at(r, c);
    queries.push_back(std::move(row));
  }
  const auto pred = svm::predict(model, queries);

  Manifest manifest;
  const bool have_manifest = !manifest_path.empty();
  if (have_manifest) {
    manifest = Manifest::load(manifest_path);
    if (static_cast<int>(manifest.records.size()) != matrix.rows)
      throw ShapeError("manifest records do not match embedding rows");
  }

  std::ostringstream os;
  os << "id,label,margin\n";
  for (int r = 0; r < matrix.rows; ++r) {
    const std::string id = have_manifest
                               ? manifest.records[static_cast<std::size_t>(r)].id
                               : std::to_string(r);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", pred.margins[static_cast<std::size_t>(r)]);
    os << id << ','
       << (pred.labels[static_cast<std::size_t>(r)] == 1 ? "mask" : "non-mask")
       << ',' << buf << '\n';
  }
  io::atomic_write_text(out, os.str());

  if (have_manifest) {
    eval::ConfusionMatrix cm;
    for (std::size_t i = 0; i < manifest.records.size(); ++i)
      cm.add(manifest.records[i].label == Label::mask ? 0 : 1,
             pred.labels[i] == 1 ? 0 : 1);
    std::printf("UAR %.2f over %ld rows\n", eval::uar(cm), cm.total());
  }
  std::printf("wrote predictions to %s\n", out.c_str());
  return 0;
}

int cmd_run_experiment(const std::string& manifest_path,
                       const std::string& config_path, const std::string& out,
                       std::uint64_t seed, bool seed_set, int jobs) {
  auto cfg = load_config(config_path);
  if (seed_set) cfg.experiment.seed = seed;
  cfg.experiment.jobs = resolve_jobs(jobs, cfg);
  auto manifest = Manifest::load(manifest_path);
  manifest.validate(true);
  const auto report = eval::run_experiment(cfg, manifest, out);
  std::fputs(report.to_text().c_str(), stdout);
  return 0;
}

int cmd_plot_data(const std::string& experiment_dir, const std::string& out) {
  io::atomic_write_text(out, eval::collect_plot_data(experiment_dir));
  std::printf("wrote plot data to %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mask-detection pipeline: complex spectrograms, augmentation, "
               "translator training, residual embeddings, SVM ensemble"};
  app.require_subcommand(1);

  std::string manifest_path, config_path, out_path, geometry = "full";
  std::string direction = "mask-to-nonmask", format = "emb1";
  std::string forward_dir, backward_dir, models_dir, embeddings_path;
  std::string model_path, c_table_path, experiment_dir;
  std::uint64_t seed = 1;
  bool final_refit = false;
  int jobs = 0;

  auto* synth_cmd = app.add_subcommand("synth-data",
                                       "generate the biased synthetic corpus");
  synth_cmd->add_option("--config", config_path);
  synth_cmd->add_option("--out", out_path)->required();
  synth_cmd->add_option("--seed", seed);

  auto* extract_cmd =
      app.add_subcommand("extract", "decode WAVs into SPG1 spectrograms");
  extract_cmd->add_option("--manifest", manifest_path)->required();
  extract_cmd->add_option("--config", config_path);
  extract_cmd->add_option("--out", out_path)->required();
  extract_cmd->add_option("--geometry", geometry)
      ->check(CLI::IsMember({"full", "reduced"}));

  auto* augment_cmd = app.add_subcommand(
      "augment", "emit perturbed twins for the training split");
  augment_cmd->add_option("--manifest", manifest_path)->required();
  augment_cmd->add_option("--config", config_path)->required();
  augment_cmd->add_option("--out", out_path)->required();
  augment_cmd->add_option("--geometry", geometry)
      ->check(CLI::IsMember({"full", "reduced"}));
  augment_cmd->add_option("--seed", seed);

  auto* gan_cmd =
      app.add_subcommand("train-gan", "train one cycle-consistent translator");
  gan_cmd->add_option("--manifest", manifest_path)->required();
  gan_cmd->add_option("--config", config_path);
  gan_cmd->add_option("--out", out_path)->required();
  gan_cmd->add_option("--direction", direction)
      ->check(CLI::IsMember({"mask-to-nonmask", "nonmask-to-mask"}));
  gan_cmd->add_option("--seed", seed);
  gan_cmd->add_option("--jobs", jobs);

  auto* translate_cmd = app.add_subcommand(
      "translate", "emit opposite-labeled translated twins");
  translate_cmd->add_option("--manifest", manifest_path)->required();
  translate_cmd->add_option("--forward", forward_dir)->required();
  translate_cmd->add_option("--backward", backward_dir)->required();
  translate_cmd->add_option("--config", config_path);
  translate_cmd->add_option("--out", out_path)->required();

  auto* embed_cmd = app.add_subcommand(
      "train-embed", "train the residual classifier family");
  embed_cmd->add_option("--manifest", manifest_path)->required();
  embed_cmd->add_option("--config", config_path);
  embed_cmd->add_option("--out", out_path)->required();
  embed_cmd->add_option("--seed", seed);
  embed_cmd->add_option("--jobs", jobs);

  auto* exembed_cmd = app.add_subcommand(
      "extract-embed", "export concatenated penultimate embeddings");
  exembed_cmd->add_option("--manifest", manifest_path)->required();
  exembed_cmd->add_option("--models", models_dir)->required();
  exembed_cmd->add_option("--out", out_path)->required();
  exembed_cmd->add_option("--format", format)
      ->check(CLI::IsMember({"emb1", "csv"}));

  auto* svm_cmd =
      app.add_subcommand("train-svm", "tune C on dev and train the SVM");
  svm_cmd->add_option("--embeddings", embeddings_path)->required();
  svm_cmd->add_option("--manifest", manifest_path)->required();
  svm_cmd->add_option("--config", config_path);
  svm_cmd->add_option("--out", out_path)->required();
  svm_cmd->add_option("--c-table", c_table_path);
  svm_cmd->add_flag("--final-refit", final_refit,
                    "merge dev into train for the final fit");

  auto* predict_cmd =
      app.add_subcommand("predict", "score embeddings with a trained SVM");
  predict_cmd->add_option("--model", model_path)->required();
  predict_cmd->add_option("--embeddings", embeddings_path)->required();
  predict_cmd->add_option("--out", out_path)->required();
  predict_cmd->add_option("--manifest", manifest_path);

  auto* run_cmd = app.add_subcommand(
      "run-experiment", "full pipeline with per-augmentation tables");
  run_cmd->add_option("--manifest", manifest_path)->required();
  run_cmd->add_option("--config", config_path);
  run_cmd->add_option("--out", out_path)->required();
  auto* seed_opt = run_cmd->add_option("--seed", seed);
  run_cmd->add_option("--jobs", jobs);

  auto* plot_cmd = app.add_subcommand(
      "plot-data", "collect per-epoch loss/UAR curves as CSV");
  plot_cmd->add_option("--experiment", experiment_dir)->required();
  plot_cmd->add_option("--out", out_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return 2;
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (synth_cmd->parsed())
      return cmd_synth_data(config_path, out_path, seed);
    if (extract_cmd->parsed())
      return cmd_extract(manifest_path, config_path, out_path, geometry);
    if (augment_cmd->parsed())
      return cmd_augment(manifest_path, config_path, out_path,
                         geometry == "full" ? "full" : "reduced", seed);
    if (gan_cmd->parsed())
      return cmd_train_gan(manifest_path, config_path, out_path, direction,
                           seed, jobs);
    if (translate_cmd->parsed())
      return cmd_translate(manifest_path, forward_dir, backward_dir, out_path,
                           config_path);
    if (embed_cmd->parsed())
      return cmd_train_embed(manifest_path, config_path, out_path, seed, jobs);
    if (exembed_cmd->parsed())
      return cmd_extract_embed(manifest_path, models_dir, out_path, format);
    if (svm_cmd->parsed())
      return cmd_train_svm(embeddings_path, manifest_path, config_path,
                           out_path, c_table_path, final_refit);
    if (predict_cmd->parsed())
      return cmd_predict(model_path, embeddings_path, out_path, manifest_path);
    if (run_cmd->parsed())
      return cmd_run_experiment(manifest_path, config_path, out_path, seed,
                                seed_opt->count() > 0, jobs);
    if (plot_cmd->parsed())
      return cmd_plot_data(experiment_dir, out_path);
  } catch (const std::exception& e) {
    std::cerr << "maskwave: error [" << stage << "]: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
