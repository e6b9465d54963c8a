#pragma once

#include <array>
#include <cstdint>

namespace maskwave::eval {

// Two-class confusion counts, indexed [true_class][predicted_class].
struct ConfusionMatrix {
  std::array<std::array<long, 2>, 2> counts{{{0, 0}, {0, 0}}};

  void add(int true_class, int predicted_class, long n = 1);
  long total() const;
  long row_total(int true_class) const;
};

// Unweighted average recall as a percentage: mean over classes of the
// per-class recall, times 100.
double uar(const ConfusionMatrix& cm);

}  // namespace maskwave::eval
