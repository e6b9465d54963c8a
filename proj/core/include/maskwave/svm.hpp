#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "maskwave/embed.hpp"

namespace maskwave::svm {

struct KernelParams {
  double gamma = 1e-2;
  double c = 1.0;

  void validate() const;
};

double kernel_rbf(std::span<const double> u, std::span<const double> v,
                  double gamma);

// Labels are +1 (mask) / -1 (non-mask).
struct SvmModel {
  std::vector<std::vector<double>> support_vectors;
  std::vector<double> coefficients;  // alpha_i * y_i
  double bias = 0.0;
  double gamma = 1e-2;

  int dim() const {
    return support_vectors.empty() ? 0
                                   : static_cast<int>(support_vectors[0].size());
  }
};

struct Prediction {
  std::vector<int> labels;  // +1 / -1
  std::vector<double> margins;
};

// Diagnostics from the SMO solve, kept for tests and reports.
struct SolveInfo {
  double dual_objective = 0.0;   // sum(alpha) - 0.5 * alpha' Q alpha
  double kkt_violation = 0.0;    // m(alpha) - M(alpha) at termination
  long iterations = 0;
  std::vector<double> alpha;     // full alpha vector, training order
};

// Maximal-violating-pair SMO over a cached Gram matrix. Terminates at
// KKT violation <= 1e-3; iteration cap of 100*n raises ConvergenceError.
SvmModel train_svm(const std::vector<std::vector<double>>& x,
                   const std::vector<int>& y, const KernelParams& params,
                   SolveInfo* info = nullptr);

Prediction predict(const SvmModel& model,
                   const std::vector<std::vector<double>>& x);

struct CTableRow {
  double c = 0.0;
  double dev_uar = 0.0;
};

struct TuneResult {
  double best_c = 0.0;
  std::vector<CTableRow> table;
  SvmModel best_model;  // trained at best_c on the training rows only
};

// Trains one model per C on the training rows, evaluates UAR on the dev
// rows, returns the argmax (ties break toward the smaller C).
TuneResult tune_c(const std::vector<std::vector<double>>& train_x,
                  const std::vector<int>& train_y,
                  const std::vector<std::vector<double>>& dev_x,
                  const std::vector<int>& dev_y, double gamma,
                  const std::vector<double>& grid);

// SVM1 container: "SVM1", u32 n_sv, u32 dim, f64 gamma, f64 bias, then per
// support vector {f64 coefficient, f32 values}.
void write_svm(const std::filesystem::path& path, const SvmModel& model);
SvmModel read_svm(const std::filesystem::path& path);

}  // namespace maskwave::svm
