#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "maskwave/augment.hpp"
#include "maskwave/checkpoint.hpp"
#include "maskwave/embed.hpp"
#include "maskwave/errors.hpp"
#include "maskwave/experiment.hpp"
#include "maskwave/gan.hpp"
#include "maskwave/io_util.hpp"
#include "maskwave/metrics.hpp"
#include "maskwave/svm.hpp"

namespace maskwave::eval {

namespace {

std::string fmt_uar(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fmt_c(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  const int workers = std::min(jobs, n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      int i;
      while ((i = next.fetch_add(1)) < n) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct Item {
  ManifestRecord record;
  dsp::Waveform wav;
  dsp::Spectrogram patch;  // reduced geometry
};

struct TwinSet {
  std::vector<dsp::Spectrogram> specs;
  std::vector<int> labels;
};

int svm_label(Label l) { return l == Label::mask ? 1 : -1; }

// Baseline perturbations double the training split with same-label twins;
// the translator emits opposite-labeled twins through both generators.
TwinSet build_twins(const std::string& aug_name, const PipelineConfig& cfg,
                    const Manifest& manifest, const std::vector<Item>& items,
                    const std::vector<std::size_t>& train_idx,
                    std::uint64_t seed, const std::filesystem::path& aug_dir) {
  TwinSet twins;
  twins.specs.reserve(train_idx.size());
  twins.labels.reserve(train_idx.size());
  if (aug_name == "none") return twins;

  if (aug_name == "translator") {
    std::vector<dsp::Spectrogram> mask_patches, nonmask_patches;
    for (std::size_t i : train_idx) {
      if (items[i].record.label == Label::mask)
        mask_patches.push_back(items[i].patch);
      else
        nonmask_patches.push_back(items[i].patch);
    }
    gan::GanConfig gc = cfg.gan;
    gc.image_size = cfg.patch_size();

    gan::TranslatorPair pair_xy, pair_yx;
    std::vector<gan::GanLossReport> hist_xy, hist_yx;
    parallel_for(2, std::min(cfg.experiment.jobs, 2), [&](int which) {
      if (which == 0)
        pair_xy = gan::train_translator(mask_patches, nonmask_patches, gc,
                                        Rng::mix(seed, 0x6761316e), &hist_xy);
      else
        pair_yx = gan::train_translator(nonmask_patches, mask_patches, gc,
                                        Rng::mix(seed, 0x6761326e), &hist_yx);
    });
    gan::save_pair(aug_dir / "gan_mask_to_nonmask", pair_xy);
    gan::save_pair(aug_dir / "gan_nonmask_to_mask", pair_yx);
    gan::save_history_csv(aug_dir / "gan_mask_to_nonmask" / "history.csv",
                          hist_xy);
    gan::save_history_csv(aug_dir / "gan_nonmask_to_mask" / "history.csv",
                          hist_yx);

    std::unordered_map<std::string, const dsp::Spectrogram*> by_id;
    for (const auto& item : items) by_id[item.record.id] = &item.patch;
    gan::translate_and_relabel(
        manifest, pair_xy, pair_yx,
        [&](const ManifestRecord& r) { return *by_id.at(r.id); },
        [&](const ManifestRecord& t, const dsp::Spectrogram& s) {
          twins.specs.push_back(s);
          twins.labels.push_back(emb::label_index(t.label));
          return "mem://" + t.id;
        });
    return twins;
  }

  for (std::size_t k = 0; k < train_idx.size(); ++k) {
    const auto& item = items[train_idx[k]];
    const std::uint64_t s = Rng::mix(seed, 0x747769, train_idx[k]);
    dsp::Spectrogram twin;
    if (aug_name == "noise") {
      Rng pick(Rng::mix(s, 1));
      const auto& choices = cfg.augment.snr_db_choices;
      const double snr = choices[static_cast<std::size_t>(pick.uniform_int(
          0, static_cast<std::int64_t>(choices.size()) - 1))];
      auto w = aug::perturb_noise(item.wav, snr, Rng::mix(s, 2));
      twin = dsp::reduce_spectrogram(dsp::stft(dsp::normalize_peak(w), cfg.stft),
                                     cfg.reduce);
    } else if (aug_name == "time_shift") {
      auto w = aug::time_shift(item.wav, cfg.augment.max_shift_fraction,
                               Rng::mix(s, 3));
      twin = dsp::reduce_spectrogram(dsp::stft(w, cfg.stft), cfg.reduce);
    } else if (aug_name == "speed") {
      Rng pick(Rng::mix(s, 4));
      const auto& factors = cfg.augment.speed_factors;
      const double factor = factors[static_cast<std::size_t>(pick.uniform_int(
          0, static_cast<std::int64_t>(factors.size()) - 1))];
      auto w = aug::perturb_speed(item.wav, factor);
      twin = dsp::reduce_spectrogram(dsp::stft(w, cfg.stft), cfg.reduce);
    } else if (aug_name == "spec_mask") {
      auto full = dsp::stft(item.wav, cfg.stft);
      twin = dsp::reduce_spectrogram(
          aug::spec_mask(full, cfg.augment, Rng::mix(s, 5)), cfg.reduce);
    } else {
      throw ConfigError("unknown augmentation '" + aug_name + "'");
    }
    twins.specs.push_back(std::move(twin));
    twins.labels.push_back(emb::label_index(item.record.label));
  }
  return twins;
}

void write_dev_history(const std::filesystem::path& path,
                       const std::vector<double>& history) {
  std::ostringstream os;
  os << "epoch,dev_uar\n";
  for (std::size_t i = 0; i < history.size(); ++i)
    os << (i + 1) << ',' << fmt_uar(history[i]) << '\n';
  io::atomic_write_text(path, os.str());
}

void write_c_table(const std::filesystem::path& path,
                   const std::vector<svm::CTableRow>& table) {
  std::ostringstream os;
  os << "c,dev_uar\n";
  for (const auto& row : table)
    os << fmt_c(row.c) << ',' << fmt_uar(row.dev_uar) << '\n';
  io::atomic_write_text(path, os.str());
}

}  // namespace

std::string ExperimentReport::table1_csv() const {
  std::ostringstream os;
  os << "augmentation";
  for (const auto& m : model_names) os << ',' << m;
  os << '\n';
  for (const auto& row : table1) {
    os << row.augmentation;
    for (double v : row.dev_uar) os << ',' << fmt_uar(v);
    os << '\n';
  }
  return os.str();
}

std::string ExperimentReport::table2_csv() const {
  std::ostringstream os;
  os << "augmentation,c,dev_uar,test_uar\n";
  for (const auto& row : table2)
    os << row.augmentation << ',' << fmt_c(row.c) << ',' << fmt_uar(row.dev_uar)
       << ',' << fmt_uar(row.test_uar) << '\n';
  return os.str();
}

std::string ExperimentReport::to_text() const {
  std::ostringstream os;
  os << "Per-model dev UAR (%), best of seeded runs\n";
  os << "------------------------------------------\n";
  os << "augmentation";
  for (const auto& m : model_names) os << '\t' << m;
  os << '\n';
  for (const auto& row : table1) {
    os << row.augmentation;
    for (double v : row.dev_uar) os << '\t' << fmt_uar(v);
    os << '\n';
  }
  os << '\n';
  os << "SVM ensemble over concatenated embeddings\n";
  os << "------------------------------------------\n";
  os << "augmentation\tC\tdev\ttest\n";
  for (const auto& row : table2)
    os << row.augmentation << '\t' << fmt_c(row.c) << '\t'
       << fmt_uar(row.dev_uar) << '\t' << fmt_uar(row.test_uar) << '\n';
  os << '\n';
  os << "seed = " << seed << '\n';
  return os.str();
}

ExperimentReport run_experiment(const PipelineConfig& cfg,
                                const Manifest& manifest,
                                const std::filesystem::path& work_dir) {
  cfg.validate();
  manifest.validate(false);
  const std::uint64_t seed = cfg.experiment.seed;

  Manifest mf = manifest;
  if (cfg.experiment.swap_splits) {
    for (auto& r : mf.records) {
      if (r.split == Split::train) r.split = Split::dev;
      else if (r.split == Split::dev) r.split = Split::train;
    }
  }

  // featurize once
  std::vector<Item> items(mf.records.size());
  for (std::size_t i = 0; i < mf.records.size(); ++i) {
    items[i].record = mf.records[i];
    items[i].wav = dsp::normalize_peak(dsp::read_wav(mf.resolve(mf.records[i])));
    items[i].patch =
        dsp::reduce_spectrogram(dsp::stft(items[i].wav, cfg.stft), cfg.reduce);
  }

  std::vector<std::size_t> train_idx, dev_idx, test_idx;
  for (std::size_t i = 0; i < items.size(); ++i) {
    switch (items[i].record.split) {
      case Split::train: train_idx.push_back(i); break;
      case Split::dev: dev_idx.push_back(i); break;
      case Split::test: test_idx.push_back(i); break;
    }
  }
  if (train_idx.empty() || dev_idx.empty())
    throw DegenerateDataError("experiment needs train and dev splits");

  std::vector<std::string> augs = cfg.experiment.augmentations;
  if (std::find(augs.begin(), augs.end(), "none") == augs.end())
    augs.insert(augs.begin(), "none");

  std::vector<emb::ResidualClassifierSpec> family_specs;
  for (std::size_t i = 0; i < cfg.embed.depths.size(); ++i) {
    emb::ResidualClassifierSpec spec;
    spec.depth_blocks = cfg.embed.depths[i];
    spec.base_channels = cfg.embed.base_channels;
    spec.embedding_dim = cfg.embed.dims[i];
    spec.validate();
    family_specs.push_back(spec);
  }

  ExperimentReport report;
  report.seed = seed;
  report.config_snapshot = cfg.snapshot();
  for (const auto& spec : family_specs)
    report.model_names.push_back("depth" + std::to_string(spec.depth_blocks));

  std::vector<emb::Sample> dev_samples;
  for (std::size_t i : dev_idx)
    dev_samples.push_back({&items[i].patch,
                           emb::label_index(items[i].record.label)});

  emb::TrainOptions opt;
  opt.epochs = cfg.embed.epochs;
  opt.lr = cfg.embed.lr;
  opt.batch = cfg.embed.batch;
  opt.weight_decay = cfg.embed.weight_decay;

  for (std::size_t ai = 0; ai < augs.size(); ++ai) {
    const std::string& aug_name = augs[ai];
    const auto aug_dir = work_dir / aug_name;
    std::filesystem::create_directories(aug_dir);

    const auto twins = build_twins(aug_name, cfg, mf, items, train_idx,
                                   Rng::mix(seed, 0xa06, ai), aug_dir);

    std::vector<emb::Sample> train_samples;
    for (std::size_t i : train_idx)
      train_samples.push_back({&items[i].patch,
                               emb::label_index(items[i].record.label)});
    for (std::size_t t = 0; t < twins.specs.size(); ++t)
      train_samples.push_back({&twins.specs[t], twins.labels[t]});

    // classifier family, best of N seeded runs each
    std::vector<emb::TrainResult> results(family_specs.size());
    parallel_for(static_cast<int>(family_specs.size()), cfg.experiment.jobs,
                 [&](int mi) {
                   results[static_cast<std::size_t>(mi)] = emb::best_of_runs(
                       family_specs[static_cast<std::size_t>(mi)],
                       train_samples, dev_samples, opt, cfg.embed.runs,
                       Rng::mix(seed, 0x6d6f64, ai,
                                static_cast<std::uint64_t>(mi)));
                 });

    Table1Row t1{aug_name, {}};
    std::vector<emb::ClassifierModel> models;
    for (std::size_t mi = 0; mi < results.size(); ++mi) {
      t1.dev_uar.push_back(results[mi].best_dev_uar);
      write_dev_history(aug_dir / ("dev_history_" + report.model_names[mi] +
                                   ".csv"),
                        results[mi].dev_uar_history);
      nn::save_params(aug_dir / ("model_" + report.model_names[mi] + ".nnp1"),
                      results[mi].model.params());
      models.push_back(std::move(results[mi].model));
    }
    report.table1.push_back(std::move(t1));

    // ensemble: embeddings for every record plus the augmented twins; the
    // SVM trains on the same augmented set the classifiers saw
    emb::EmbeddingFamily family(std::move(models));
    std::vector<const dsp::Spectrogram*> all_specs;
    for (const auto& item : items) all_specs.push_back(&item.patch);
    for (const auto& twin : twins.specs) all_specs.push_back(&twin);
    auto matrix = family.extract(all_specs, cfg.embed.batch);
    std::vector<bool> is_train(all_specs.size(), false);
    for (std::size_t i : train_idx) is_train[i] = true;
    for (std::size_t t = 0; t < twins.specs.size(); ++t)
      is_train[items.size() + t] = true;
    emb::Standardizer::fit(matrix, is_train).apply(matrix);

    auto row_of = [&](std::size_t i) {
      std::vector<double> row(static_cast<std::size_t>(matrix.cols));
      for (int c = 0; c < matrix.cols; ++c)
        row[static_cast<std::size_t>(c)] = matrix.at(static_cast<int>(i), c);
      return row;
    };
    auto rows_of = [&](const std::vector<std::size_t>& idx,
                       std::vector<std::vector<double>>& x,
                       std::vector<int>& y) {
      for (std::size_t i : idx) {
        x.push_back(row_of(i));
        y.push_back(svm_label(items[i].record.label));
      }
    };
    std::vector<std::vector<double>> train_x, dev_x, test_x;
    std::vector<int> train_y, dev_y, test_y;
    rows_of(train_idx, train_x, train_y);
    for (std::size_t t = 0; t < twins.specs.size(); ++t) {
      train_x.push_back(row_of(items.size() + t));
      train_y.push_back(twins.labels[t] == 0 ? 1 : -1);
    }
    rows_of(dev_idx, dev_x, dev_y);
    rows_of(test_idx, test_x, test_y);

    auto tune = svm::tune_c(train_x, train_y, dev_x, dev_y, cfg.svm.gamma,
                            cfg.svm.c_grid);
    write_c_table(aug_dir / "svm_c_table.csv", tune.table);
    double best_dev_uar = 0.0;
    for (const auto& row : tune.table)
      if (row.c == tune.best_c) best_dev_uar = row.dev_uar;

    // final fit: dev merged into train, evaluated on test
    double test_uar = 0.0;
    if (!test_idx.empty()) {
      auto merged_x = train_x;
      merged_x.insert(merged_x.end(), dev_x.begin(), dev_x.end());
      auto merged_y = train_y;
      merged_y.insert(merged_y.end(), dev_y.begin(), dev_y.end());
      svm::KernelParams params{cfg.svm.gamma, tune.best_c};
      auto final_model = svm::train_svm(merged_x, merged_y, params);
      svm::write_svm(aug_dir / "svm_final.svm1", final_model);
      const auto pred = svm::predict(final_model, test_x);
      ConfusionMatrix cm;
      for (std::size_t i = 0; i < test_y.size(); ++i)
        cm.add(test_y[i] == 1 ? 0 : 1, pred.labels[i] == 1 ? 0 : 1);
      test_uar = uar(cm);
    }
    report.table2.push_back({aug_name, tune.best_c, best_dev_uar, test_uar});
  }

  io::atomic_write_text(work_dir / "report.txt", report.to_text());
  io::atomic_write_text(work_dir / "table1.csv", report.table1_csv());
  io::atomic_write_text(work_dir / "table2.csv", report.table2_csv());
  io::atomic_write_text(work_dir / "config.cfg", report.config_snapshot);
  return report;
}

std::string collect_plot_data(const std::filesystem::path& experiment_dir) {
  std::ostringstream out;
  out << "file,epoch,metric,value\n";
  std::vector<std::filesystem::path> files;
  for (const auto& entry :
       std::filesystem::recursive_directory_iterator(experiment_dir)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (name == "history.csv" || name.rfind("dev_history_", 0) == 0)
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    std::ifstream is(file);
    std::string header;
    if (!std::getline(is, header)) continue;
    std::vector<std::string> cols;
    {
      std::istringstream hs(header);
      std::string c;
      while (std::getline(hs, c, ',')) cols.push_back(c);
    }
    const auto rel =
        std::filesystem::relative(file, experiment_dir).generic_string();
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::vector<std::string> vals;
      std::string v;
      while (std::getline(ls, v, ',')) vals.push_back(v);
      if (vals.size() != cols.size() || vals.empty()) continue;
      for (std::size_t c = 1; c < vals.size(); ++c)
        out << rel << ',' << vals[0] << ',' << cols[c] << ',' << vals[c]
            << '\n';
    }
  }
  return out.str();
}

}  // namespace maskwave::eval
