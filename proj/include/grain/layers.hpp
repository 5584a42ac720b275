#ifndef GRAIN_LAYERS_HPP
#define GRAIN_LAYERS_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "grain/error.hpp"
#include "grain/tensor.hpp"

namespace grain {

/// Kernels are [out_maps, in_maps, k, k]; biases are [out_maps].
template <typename Scalar>
struct ConvParams {
  Tensor<Scalar> kernels;
  Tensor<Scalar> biases;

  Index out_maps() const { return kernels.extent(0); }
  Index in_maps() const { return kernels.extent(1); }
  Index kernel_size() const { return kernels.extent(2); }

  void validate() const {
    if (kernels.rank() != 4 || kernels.extent(2) != kernels.extent(3))
      throw ShapeError("conv kernels must be [out, in, k, k], got " + shape_string(kernels.shape()));
    if (biases.shape() != Shape{out_maps()})
      throw ShapeError("conv biases must be [" + std::to_string(out_maps()) + "], got " +
                       shape_string(biases.shape()));
  }
};

/// Weights are [out_units, in_units]; biases are [out_units].
template <typename Scalar>
struct DenseParams {
  Tensor<Scalar> weights;
  Tensor<Scalar> biases;

  Index out_units() const { return weights.extent(0); }
  Index in_units() const { return weights.extent(1); }

  void validate() const {
    if (weights.rank() != 2)
      throw ShapeError("dense weights must be [out, in], got " + shape_string(weights.shape()));
    if (biases.shape() != Shape{out_units()})
      throw ShapeError("dense biases must be [" + std::to_string(out_units()) + "], got " +
                       shape_string(biases.shape()));
  }
};

/// For each pooled cell (row-major over the output), the flat input index of
/// the element that won its window.
struct PoolTrace {
  Shape input_shape;
  Shape output_shape;
  Index factor = 1;
  std::vector<Index> argmax;
};

template <typename Scalar>
struct ConvGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> kernels;
  Tensor<Scalar> biases;
};

template <typename Scalar>
struct DenseGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weights;
  Tensor<Scalar> biases;
};

namespace detail {

template <typename Scalar>
using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline void check_chw(const Shape& s, const char* what) {
  if (s.size() != 3) throw ShapeError(std::string(what) + ": expected [C,H,W], got " + shape_string(s));
}

// Row (c*k + i)*k + j, column y*Wo + x holds input[c, y+i, x+j].
template <typename Scalar>
RowMajorMatrix<Scalar> im2col(const Tensor<Scalar>& input, Index k) {
  const Index C = input.extent(0), H = input.extent(1), W = input.extent(2);
  const Index Ho = H - k + 1, Wo = W - k + 1;
  RowMajorMatrix<Scalar> cols(C * k * k, Ho * Wo);
  const Scalar* in = input.vec().data();
  for (Index c = 0; c < C; ++c)
    for (Index i = 0; i < k; ++i)
      for (Index j = 0; j < k; ++j) {
        Scalar* row = cols.row((c * k + i) * k + j).data();
        for (Index y = 0; y < Ho; ++y) {
          const Scalar* src = in + (c * H + y + i) * W + j;
          std::copy(src, src + Wo, row + y * Wo);
        }
      }
  return cols;
}

template <typename Scalar>
void col2im_add(const RowMajorMatrix<Scalar>& cols, Index k, Tensor<Scalar>& out) {
  const Index C = out.extent(0), H = out.extent(1), W = out.extent(2);
  const Index Ho = H - k + 1, Wo = W - k + 1;
  Scalar* dst = out.vec().data();
  for (Index c = 0; c < C; ++c)
    for (Index i = 0; i < k; ++i)
      for (Index j = 0; j < k; ++j) {
        const Scalar* row = cols.row((c * k + i) * k + j).data();
        for (Index y = 0; y < Ho; ++y) {
          Scalar* d = dst + (c * H + y + i) * W + j;
          const Scalar* s = row + y * Wo;
          for (Index x = 0; x < Wo; ++x) d[x] += s[x];
        }
      }
}

}  // namespace detail

/// Output extent of a valid convolution; throws ShapeError if k does not fit.
inline Shape conv2d_output_shape(const Shape& input, Index out_maps, Index k) {
  detail::check_chw(input, "conv2d");
  if (k < 1 || out_maps < 1) throw ShapeError("conv2d: kernel size and map count must be >= 1");
  if (input[1] < k || input[2] < k)
    throw ShapeError("conv2d: " + std::to_string(k) + "x" + std::to_string(k) +
                     " kernel does not fit input " + shape_string(input));
  return {out_maps, input[1] - k + 1, input[2] - k + 1};
}

inline Shape maxpool_output_shape(const Shape& input, Index factor) {
  detail::check_chw(input, "maxpool");
  if (factor < 1) throw ShapeError("maxpool: factor must be >= 1");
  if (input[1] < factor || input[2] < factor)
    throw ShapeError("maxpool: " + std::to_string(factor) + "x" + std::to_string(factor) +
                     " window larger than input " + shape_string(input));
  return {input[0], input[1] / factor, input[2] / factor};
}

/// Valid (unpadded) stride-1 cross-correlation plus per-map bias.
template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& input, const ConvParams<Scalar>& p) {
  p.validate();
  const Index k = p.kernel_size();
  Shape out_shape = conv2d_output_shape(input.shape(), p.out_maps(), k);
  if (input.extent(0) != p.in_maps())
    throw ShapeError("conv2d: input has " + std::to_string(input.extent(0)) + " maps, kernels expect " +
                     std::to_string(p.in_maps()));
  const auto cols = detail::im2col(input, k);
  const auto kmat = p.kernels.matrix(p.out_maps(), p.in_maps() * k * k);
  Tensor<Scalar> out(out_shape);
  auto omat = out.matrix(p.out_maps(), out_shape[1] * out_shape[2]);
  omat.noalias() = kmat * cols;
  omat.colwise() += p.biases.vec();
  return out;
}

template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const Tensor<Scalar>& input, const ConvParams<Scalar>& p,
                                  const Tensor<Scalar>& grad_out) {
  p.validate();
  const Index k = p.kernel_size();
  const Shape out_shape = conv2d_output_shape(input.shape(), p.out_maps(), k);
  if (input.extent(0) != p.in_maps()) throw ShapeError("conv2d_backward: input/kernel map count mismatch");
  if (grad_out.shape() != out_shape)
    throw ShapeError("conv2d_backward: grad_out " + shape_string(grad_out.shape()) + " but output is " +
                     shape_string(out_shape));
  const Index n_pix = out_shape[1] * out_shape[2];
  const auto cols = detail::im2col(input, k);
  const auto g = grad_out.matrix(p.out_maps(), n_pix);
  const auto kmat = p.kernels.matrix(p.out_maps(), p.in_maps() * k * k);

  ConvGrads<Scalar> grads{Tensor<Scalar>(input.shape()), Tensor<Scalar>(p.kernels.shape()),
                          Tensor<Scalar>(p.biases.shape())};
  grads.kernels.matrix(p.out_maps(), p.in_maps() * k * k).noalias() = g * cols.transpose();
  grads.biases.vec() = g.rowwise().sum();
  detail::RowMajorMatrix<Scalar> grad_cols = kmat.transpose() * g;
  detail::col2im_add(grad_cols, k, grads.input);
  return grads;
}

/// Non-overlapping factor x factor max pooling. Trailing rows/columns that do
/// not fill a window are dropped. Ties go to the first element in row-major
/// window order.
template <typename Scalar>
std::pair<Tensor<Scalar>, PoolTrace> maxpool_forward(const Tensor<Scalar>& input, Index factor) {
  const Shape out_shape = maxpool_output_shape(input.shape(), factor);
  const Index C = input.extent(0), H = input.extent(1), W = input.extent(2);
  const Index Ho = out_shape[1], Wo = out_shape[2];
  Tensor<Scalar> out(out_shape);
  PoolTrace trace{input.shape(), out_shape, factor, std::vector<Index>(static_cast<std::size_t>(out.size()))};
  const Scalar* in = input.vec().data();
  Index o = 0;
  for (Index c = 0; c < C; ++c)
    for (Index y = 0; y < Ho; ++y)
      for (Index x = 0; x < Wo; ++x, ++o) {
        Index best = (c * H + y * factor) * W + x * factor;
        for (Index i = 0; i < factor; ++i)
          for (Index j = 0; j < factor; ++j) {
            const Index at = (c * H + y * factor + i) * W + x * factor + j;
            if (in[at] > in[best]) best = at;
          }
        out[o] = in[best];
        trace.argmax[static_cast<std::size_t>(o)] = best;
      }
  return {std::move(out), std::move(trace)};
}

template <typename Scalar>
Tensor<Scalar> maxpool_backward(const PoolTrace& trace, const Tensor<Scalar>& grad_out) {
  if (grad_out.shape() != trace.output_shape)
    throw ShapeError("maxpool_backward: grad_out " + shape_string(grad_out.shape()) + " but pooled shape is " +
                     shape_string(trace.output_shape));
  Tensor<Scalar> grad_in(trace.input_shape);
  for (Index o = 0; o < grad_out.size(); ++o) grad_in[trace.argmax[static_cast<std::size_t>(o)]] += grad_out[o];
  return grad_in;
}

template <typename Scalar>
Tensor<Scalar> relu_forward(const Tensor<Scalar>& input) {
  return Tensor<Scalar>(input.shape(), input.vec().cwiseMax(Scalar(0)));
}

/// Subgradient 0 at exactly 0.
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& grad_out) {
  if (input.shape() != grad_out.shape()) throw ShapeError("relu_backward: shape mismatch");
  typename Tensor<Scalar>::Vector g =
      (input.vec().array() > Scalar(0)).select(grad_out.vec(), Scalar(0));
  return Tensor<Scalar>(input.shape(), std::move(g));
}

template <typename Scalar>
Tensor<Scalar> dense_forward(const Tensor<Scalar>& input, const DenseParams<Scalar>& p) {
  p.validate();
  if (input.size() != p.in_units())
    throw ShapeError("dense: input length " + std::to_string(input.size()) + " but layer expects " +
                     std::to_string(p.in_units()));
  const auto w = p.weights.matrix(p.out_units(), p.in_units());
  return Tensor<Scalar>(Shape{p.out_units()}, w * input.vec() + p.biases.vec());
}

template <typename Scalar>
DenseGrads<Scalar> dense_backward(const Tensor<Scalar>& input, const DenseParams<Scalar>& p,
                                  const Tensor<Scalar>& grad_out) {
  p.validate();
  if (input.size() != p.in_units()) throw ShapeError("dense_backward: input length mismatch");
  if (grad_out.shape() != Shape{p.out_units()}) throw ShapeError("dense_backward: grad_out length mismatch");
  const auto w = p.weights.matrix(p.out_units(), p.in_units());
  DenseGrads<Scalar> grads{Tensor<Scalar>(input.shape(), w.transpose() * grad_out.vec()),
                           Tensor<Scalar>(p.weights.shape()), grad_out};
  grads.weights.matrix(p.out_units(), p.in_units()).noalias() = grad_out.vec() * input.vec().transpose();
  return grads;
}

/// Max-shifted softmax over every element of the input.
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& input) {
  typename Tensor<Scalar>::Vector e = (input.vec().array() - input.vec().maxCoeff()).exp();
  e /= e.sum();
  return Tensor<Scalar>(input.shape(), std::move(e));
}

inline constexpr double kProbabilityFloor = 1e-12;

/// -ln(max(probs[label], 1e-12)).
template <typename Scalar>
Scalar cross_entropy(const Tensor<Scalar>& probs, Index label) {
  if (label < 0 || label >= probs.size())
    throw IndexError("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                     std::to_string(probs.size()) + ")");
  if (std::abs(probs.vec().sum() - Scalar(1)) > Scalar(1e-9))
    throw ValueError("cross_entropy: probabilities do not sum to 1");
  return -std::log(std::max(probs[label], static_cast<Scalar>(kProbabilityFloor)));
}

/// Gradient of cross_entropy(softmax(logits), label) with respect to the logits.
template <typename Scalar>
Tensor<Scalar> softmax_ce_backward(const Tensor<Scalar>& logits, Index label) {
  if (label < 0 || label >= logits.size())
    throw IndexError("softmax_ce_backward: label " + std::to_string(label) + " out of range");
  Tensor<Scalar> grad = softmax(logits);
  grad[label] -= Scalar(1);
  return grad;
}

}  // namespace grain

#endif  // GRAIN_LAYERS_HPP
