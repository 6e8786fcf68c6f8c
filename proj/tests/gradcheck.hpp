#pragma once
// Central finite differences against analytic gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace gradcheck {

struct Result {
  double max_rel = 0.0;
  int checked = 0;
};

// `probe` lists scalars to perturb, `analytic` their analytic derivatives. Relative error
// uses max(|a|, |n|) floored at `floor` times the largest analytic magnitude, so
// coordinates whose true derivative is ~0 are judged on an absolute scale.
inline Result compare(const std::vector<double*>& probe, const std::vector<double>& analytic,
                      const std::function<double()>& loss, double h = 1e-6, double floor = 1e-3) {
  double scale = 0.0;
  for (double a : analytic) scale = std::max(scale, std::abs(a));
  Result r;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double keep = *probe[i];
    *probe[i] = keep + h;
    const double up = loss();
    *probe[i] = keep - h;
    const double down = loss();
    *probe[i] = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor * scale, 1e-12});
    r.max_rel = std::max(r.max_rel, std::abs(analytic[i] - numeric) / denom);
    ++r.checked;
  }
  return r;
}

// up to `n` distinct indices out of [0, size)
inline std::vector<std::size_t> sample(std::size_t size, std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(size);
  for (std::size_t i = 0; i < size; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(size, n));
  return idx;
}

}  // namespace gradcheck
