#include "maskwave/metrics.hpp"

#include "maskwave/errors.hpp"

namespace maskwave::eval {

void ConfusionMatrix::add(int true_class, int predicted_class, long n) {
  if (true_class < 0 || true_class > 1 || predicted_class < 0 ||
      predicted_class > 1)
    throw ParameterError("class index must be 0 or 1");
  if (n < 0) throw ParameterError("count must be >= 0");
  counts[static_cast<std::size_t>(true_class)]
        [static_cast<std::size_t>(predicted_class)] += n;
}

long ConfusionMatrix::total() const {
  return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
}

long ConfusionMatrix::row_total(int true_class) const {
  return counts[static_cast<std::size_t>(true_class)][0] +
         counts[static_cast<std::size_t>(true_class)][1];
}

double uar(const ConfusionMatrix& cm) {
  double sum = 0.0;
  for (int c = 0; c < 2; ++c) {
    const long row = cm.row_total(c);
    if (row == 0)
      throw UndefinedMetricError("recall undefined: no samples of class " +
                                 std::to_string(c));
    sum += static_cast<double>(
               cm.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)]) /
           static_cast<double>(row);
  }
  return 100.0 * sum / 2.0;
}

}  // namespace maskwave::eval
