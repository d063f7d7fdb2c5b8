#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sied/corpus/dialog.hpp"
#include "sied/util/rng.hpp"

namespace sied::corpus {

struct Split {
  Dataset train, dev, test;
};

// Partitions whole dialogs. Sizes are round(ratio * n) for train and dev,
// test takes the remainder. Each part keeps the input order.
inline Split split_dataset(const Dataset& ds, std::array<double, 3> ratios, std::uint64_t seed) {
  if (ds.dialogs.empty()) throw std::invalid_argument("cannot split an empty dataset");
  for (double r : ratios)
    if (r < 0) throw std::invalid_argument("split ratios must be nonnegative");
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw std::invalid_argument("split ratios must sum to 1");

  const std::size_t n = ds.dialogs.size();
  const auto n_train = std::min(n, static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n))));
  const auto n_dev = std::min(n - n_train, static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n))));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<int> part(n);
  for (std::size_t k = 0; k < n; ++k) part[order[k]] = k < n_train ? 0 : (k < n_train + n_dev ? 1 : 2);

  Split s;
  for (auto* d : {&s.train, &s.dev, &s.test}) d->provenance = ds.provenance;
  for (std::size_t i = 0; i < n; ++i) (part[i] == 0 ? s.train : part[i] == 1 ? s.dev : s.test).dialogs.push_back(ds.dialogs[i]);
  return s;
}

}  // namespace sied::corpus
