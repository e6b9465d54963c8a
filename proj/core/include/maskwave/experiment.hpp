#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "maskwave/config.hpp"
#include "maskwave/manifest.hpp"

namespace maskwave::eval {

struct Table1Row {
  std::string augmentation;
  std::vector<double> dev_uar;  // one per family member
};

struct Table2Row {
  std::string augmentation;
  double c = 0.0;
  double dev_uar = 0.0;
  double test_uar = 0.0;
};

struct ExperimentReport {
  std::vector<std::string> model_names;
  std::vector<Table1Row> table1;
  std::vector<Table2Row> table2;
  std::string config_snapshot;
  std::uint64_t seed = 0;

  std::string to_text() const;
  std::string table1_csv() const;
  std::string table2_csv() const;
};

// Full pipeline: featurize -> (augment) -> train the classifier family with
// best-of-N runs -> concatenated embeddings -> SVM C tuning on dev ->
// dev-merged refit -> test UAR. One Table-1/Table-2 row per augmentation
// method; "none" is always present as the baseline anchor. All artifacts
// land under work_dir and are byte-reproducible for a fixed config.
ExperimentReport run_experiment(const PipelineConfig& cfg,
                                const Manifest& manifest,
                                const std::filesystem::path& work_dir);

// Long-format per-epoch curves (file,epoch,metric,value) collected from the
// history CSVs under an experiment work directory.
std::string collect_plot_data(const std::filesystem::path& experiment_dir);

}  // namespace maskwave::eval
