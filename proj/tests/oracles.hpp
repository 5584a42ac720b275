#ifndef GRAIN_TESTS_ORACLES_HPP
#define GRAIN_TESTS_ORACLES_HPP

// Reference implementations that share no code with the library: plain loops
// over flat arrays, long double where rounding matters.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "grain/layers.hpp"
#include "grain/rng.hpp"
#include "grain/tensor.hpp"

namespace oracle {

using grain::Index;
using grain::TensorXd;

// out[o,y,x] = b[o] + sum_{c,i,j} in[c,y+i,x+j] * w[o,c,i,j]
inline std::vector<double> conv(const std::vector<double>& in, Index C, Index H, Index W,
                                const std::vector<double>& w, const std::vector<double>& b, Index O, Index k) {
  const Index Ho = H - k + 1, Wo = W - k + 1;
  std::vector<double> out(static_cast<std::size_t>(O * Ho * Wo));
  for (Index o = 0; o < O; ++o)
    for (Index y = 0; y < Ho; ++y)
      for (Index x = 0; x < Wo; ++x) {
        long double acc = b[o];
        for (Index c = 0; c < C; ++c)
          for (Index i = 0; i < k; ++i)
            for (Index j = 0; j < k; ++j)
              acc += static_cast<long double>(in[(c * H + y + i) * W + x + j]) * w[((o * C + c) * k + i) * k + j];
        out[(o * Ho + y) * Wo + x] = static_cast<double>(acc);
      }
  return out;
}

inline std::vector<double> matvec(const std::vector<double>& w, Index rows, Index cols,
                                  const std::vector<double>& v, const std::vector<double>& b) {
  std::vector<double> out(static_cast<std::size_t>(rows));
  for (Index r = 0; r < rows; ++r) {
    long double acc = b[r];
    for (Index c = 0; c < cols; ++c) acc += static_cast<long double>(w[r * cols + c]) * v[c];
    out[r] = static_cast<double>(acc);
  }
  return out;
}

inline std::vector<long double> softmax(const std::vector<double>& z) {
  long double m = z[0];
  for (double v : z) m = std::max(m, static_cast<long double>(v));
  long double sum = 0;
  std::vector<long double> e;
  for (double v : z) {
    e.push_back(std::exp(static_cast<long double>(v) - m));
    sum += e.back();
  }
  for (auto& v : e) v /= sum;
  return e;
}

inline std::vector<double> to_vec(const TensorXd& t) { return {t.data().begin(), t.data().end()}; }

// Central difference of f along every coordinate of x.
inline std::vector<double> numeric_gradient(TensorXd& x, const std::function<double()>& f, double h = 1e-6) {
  std::vector<double> g(static_cast<std::size_t>(x.size()));
  for (Index i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double fp = f();
    x[i] = saved - h;
    const double fm = f();
    x[i] = saved;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// Random extent in [lo, hi].
inline Index extent(grain::Rng& rng, Index lo, Index hi) {
  return lo + static_cast<Index>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

}  // namespace oracle

#endif  // GRAIN_TESTS_ORACLES_HPP
