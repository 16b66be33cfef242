#include "bendr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "bendr/errors.hpp"

namespace bendr {

namespace {

struct ConvGeometry {
  std::size_t c_in, length, c_out, c_group, kernel, out_len, groups, out_per_group;
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& weight, const Conv1dOptions& opt) {
  if (input.rank() != 2) throw ShapeError("conv1d: input must be C_in x L");
  if (weight.rank() != 3) throw ShapeError("conv1d: weight must be C_out x C_in/groups x K");
  if (opt.stride == 0) throw ShapeError("conv1d: stride must be positive");
  if (opt.groups == 0) throw ShapeError("conv1d: groups must be positive");
  ConvGeometry g{};
  g.c_in = input.dim(0);
  g.length = input.dim(1);
  g.c_out = weight.dim(0);
  g.c_group = weight.dim(1);
  g.kernel = weight.dim(2);
  g.groups = opt.groups;
  if (g.c_in % g.groups != 0 || g.c_out % g.groups != 0 || g.c_group != g.c_in / g.groups) {
    throw ShapeError("conv1d: channel counts " + std::to_string(g.c_in) + "/" +
                     std::to_string(g.c_out) + " incompatible with " +
                     std::to_string(g.groups) + " groups and weight " +
                     shape_string(weight.shape()));
  }
  g.out_per_group = g.c_out / g.groups;
  g.out_len = conv1d_output_length(g.length, g.kernel, opt);
  return g;
}

// col((ci*K + k), t) = x(group*Cg + ci, t*stride + k - padding), zero outside.
void im2col(const Tensor& input, const ConvGeometry& g, const Conv1dOptions& opt,
            std::size_t group, RowMatrix& col) {
  col.resize(static_cast<Eigen::Index>(g.c_group * g.kernel), static_cast<Eigen::Index>(g.out_len));
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(opt.padding);
  const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(g.length);
  for (std::size_t ci = 0; ci < g.c_group; ++ci) {
    const double* src = input.data() + (group * g.c_group + ci) * g.length;
    for (std::size_t k = 0; k < g.kernel; ++k) {
      double* dst = col.data() + (ci * g.kernel + k) * g.out_len;
      for (std::size_t t = 0; t < g.out_len; ++t) {
        const std::ptrdiff_t pos =
            static_cast<std::ptrdiff_t>(t * opt.stride + k) - pad;
        dst[t] = (pos >= 0 && pos < len) ? src[pos] : 0.0;
      }
    }
  }
}

void col2im_add(const RowMatrix& dcol, const ConvGeometry& g, const Conv1dOptions& opt,
                std::size_t group, Tensor& grad_input) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(opt.padding);
  const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(g.length);
  for (std::size_t ci = 0; ci < g.c_group; ++ci) {
    double* dst = grad_input.data() + (group * g.c_group + ci) * g.length;
    for (std::size_t k = 0; k < g.kernel; ++k) {
      const double* src = dcol.data() + (ci * g.kernel + k) * g.out_len;
      for (std::size_t t = 0; t < g.out_len; ++t) {
        const std::ptrdiff_t pos =
            static_cast<std::ptrdiff_t>(t * opt.stride + k) - pad;
        if (pos >= 0 && pos < len) dst[pos] += src[t];
      }
    }
  }
}

}  // namespace

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, const Conv1dOptions& opt) {
  const std::size_t padded = length + 2 * opt.padding;
  if (kernel == 0 || opt.stride == 0) throw ShapeError("conv1d: kernel and stride must be positive");
  if (kernel > padded) {
    throw ShapeError("conv1d: kernel " + std::to_string(kernel) + " longer than input " +
                     std::to_string(padded));
  }
  return (padded - kernel) / opt.stride + 1;
}

Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              const Conv1dOptions& opt) {
  const ConvGeometry g = conv_geometry(input, weight, opt);
  if (!bias.empty() && bias.size() != g.c_out) throw ShapeError("conv1d: bias length mismatch");
  Tensor out({g.c_out, g.out_len});
  const auto row_len = static_cast<Eigen::Index>(g.c_group * g.kernel);
  RowMatrix col;
  for (std::size_t grp = 0; grp < g.groups; ++grp) {
    im2col(input, g, opt, grp, col);
    ConstMatrixMap w(weight.data() + grp * g.out_per_group * g.c_group * g.kernel,
                     static_cast<Eigen::Index>(g.out_per_group), row_len);
    MatrixMap y(out.data() + grp * g.out_per_group * g.out_len,
                static_cast<Eigen::Index>(g.out_per_group), static_cast<Eigen::Index>(g.out_len));
    y.noalias() = w * col;
  }
  if (!bias.empty()) {
    for (std::size_t c = 0; c < g.c_out; ++c) {
      double* r = out.data() + c * g.out_len;
      for (std::size_t t = 0; t < g.out_len; ++t) r[t] += bias[c];
    }
  }
  return out;
}

Conv1dGrads conv1d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                            const Conv1dOptions& opt, bool need_input) {
  const ConvGeometry g = conv_geometry(input, weight, opt);
  require_shape(grad_out, {g.c_out, g.out_len}, "conv1d_backward grad_out");
  Conv1dGrads grads;
  grads.weight = Tensor(weight.shape());
  grads.bias = Tensor({g.c_out});
  if (need_input) grads.input = Tensor(input.shape());
  const auto row_len = static_cast<Eigen::Index>(g.c_group * g.kernel);
  RowMatrix col;
  RowMatrix dcol;
  for (std::size_t grp = 0; grp < g.groups; ++grp) {
    im2col(input, g, opt, grp, col);
    ConstMatrixMap dy(grad_out.data() + grp * g.out_per_group * g.out_len,
                      static_cast<Eigen::Index>(g.out_per_group),
                      static_cast<Eigen::Index>(g.out_len));
    MatrixMap dw(grads.weight.data() + grp * g.out_per_group * g.c_group * g.kernel,
                 static_cast<Eigen::Index>(g.out_per_group), row_len);
    dw.noalias() = dy * col.transpose();
    if (need_input) {
      ConstMatrixMap w(weight.data() + grp * g.out_per_group * g.c_group * g.kernel,
                       static_cast<Eigen::Index>(g.out_per_group), row_len);
      dcol.noalias() = w.transpose() * dy;
      col2im_add(dcol, g, opt, grp, grads.input);
    }
  }
  for (std::size_t c = 0; c < g.c_out; ++c) {
    const double* r = grad_out.data() + c * g.out_len;
    double s = 0.0;
    for (std::size_t t = 0; t < g.out_len; ++t) s += r[t];
    grads.bias[c] = s;
  }
  return grads;
}

// ---- normalisation ----------------------------------------------------------

namespace {

// Normalises `count` contiguous blocks of `block` values each. Returns x-hat
// and the per-block inverse standard deviation.
void normalize_blocks(const double* x, double* xhat, std::size_t count, std::size_t block,
                      double eps, std::vector<double>& inv_std) {
  inv_std.resize(count);
  for (std::size_t b = 0; b < count; ++b) {
    const double* src = x + b * block;
    double mean = 0.0;
    for (std::size_t i = 0; i < block; ++i) mean += src[i];
    mean /= static_cast<double>(block);
    double var = 0.0;
    for (std::size_t i = 0; i < block; ++i) {
      const double d = src[i] - mean;
      var += d * d;
    }
    var /= static_cast<double>(block);
    const double r = 1.0 / std::sqrt(var + eps);
    inv_std[b] = r;
    double* dst = xhat + b * block;
    for (std::size_t i = 0; i < block; ++i) dst[i] = (src[i] - mean) * r;
  }
}

// dx for one normalised block given dy-hat (gradient w.r.t. x-hat).
void normalize_block_backward(const double* xhat, const double* dxhat, double* dx,
                              std::size_t block, double inv_std) {
  double sum = 0.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < block; ++i) {
    sum += dxhat[i];
    dot += dxhat[i] * xhat[i];
  }
  const double n = static_cast<double>(block);
  for (std::size_t i = 0; i < block; ++i) {
    dx[i] = inv_std / n * (n * dxhat[i] - sum - xhat[i] * dot);
  }
}

}  // namespace

Tensor group_norm(const Tensor& input, std::size_t groups, const Tensor& gamma, const Tensor& beta,
                  NormCache* cache, double eps) {
  if (input.rank() != 2) throw ShapeError("group_norm: input must be C x L");
  const std::size_t channels = input.dim(0);
  const std::size_t length = input.dim(1);
  if (groups == 0 || channels % groups != 0) {
    throw ShapeError("group_norm: " + std::to_string(channels) + " channels not divisible into " +
                     std::to_string(groups) + " groups");
  }
  if (gamma.size() != channels || beta.size() != channels) {
    throw ShapeError("group_norm: affine parameters must have one entry per channel");
  }
  NormCache local;
  NormCache& c = cache ? *cache : local;
  c.normalized = Tensor(input.shape());
  normalize_blocks(input.data(), c.normalized.data(), groups, (channels / groups) * length, eps,
                   c.inv_std);
  Tensor out(input.shape());
  for (std::size_t ch = 0; ch < channels; ++ch) {
    const double* xh = c.normalized.data() + ch * length;
    double* y = out.data() + ch * length;
    for (std::size_t t = 0; t < length; ++t) y[t] = gamma[ch] * xh[t] + beta[ch];
  }
  return out;
}

AffineNormGrads group_norm_backward(const Tensor& grad_out, std::size_t groups,
                                    const Tensor& gamma, const NormCache& cache) {
  const std::size_t channels = cache.normalized.dim(0);
  const std::size_t length = cache.normalized.dim(1);
  require_shape(grad_out, cache.normalized.shape(), "group_norm_backward grad_out");
  AffineNormGrads g{Tensor(grad_out.shape()), Tensor({channels}), Tensor({channels})};
  Tensor dxhat(grad_out.shape());
  for (std::size_t ch = 0; ch < channels; ++ch) {
    const double* dy = grad_out.data() + ch * length;
    const double* xh = cache.normalized.data() + ch * length;
    double* d = dxhat.data() + ch * length;
    double sg = 0.0, sb = 0.0;
    for (std::size_t t = 0; t < length; ++t) {
      sg += dy[t] * xh[t];
      sb += dy[t];
      d[t] = dy[t] * gamma[ch];
    }
    g.gamma[ch] = sg;
    g.beta[ch] = sb;
  }
  const std::size_t block = (channels / groups) * length;
  for (std::size_t b = 0; b < groups; ++b) {
    normalize_block_backward(cache.normalized.data() + b * block, dxhat.data() + b * block,
                             g.input.data() + b * block, block, cache.inv_std[b]);
  }
  return g;
}

Tensor layer_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, NormCache* cache,
                  double eps) {
  const std::size_t rows = input.rows();
  const std::size_t cols = input.cols();
  if (cols == 0) throw ShapeError("layer_norm: empty feature axis");
  if (gamma.size() != cols || beta.size() != cols) {
    throw ShapeError("layer_norm: affine parameters must match the feature width");
  }
  NormCache local;
  NormCache& c = cache ? *cache : local;
  c.normalized = Tensor(input.shape());
  normalize_blocks(input.data(), c.normalized.data(), rows, cols, eps, c.inv_std);
  Tensor out(input.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xh = c.normalized.data() + r * cols;
    double* y = out.data() + r * cols;
    for (std::size_t j = 0; j < cols; ++j) y[j] = gamma[j] * xh[j] + beta[j];
  }
  return out;
}

AffineNormGrads layer_norm_backward(const Tensor& grad_out, const Tensor& gamma,
                                    const NormCache& cache) {
  const std::size_t rows = cache.normalized.rows();
  const std::size_t cols = cache.normalized.cols();
  require_shape(grad_out, cache.normalized.shape(), "layer_norm_backward grad_out");
  AffineNormGrads g{Tensor(grad_out.shape()), Tensor({cols}), Tensor({cols})};
  std::vector<double> dxhat(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* dy = grad_out.data() + r * cols;
    const double* xh = cache.normalized.data() + r * cols;
    for (std::size_t j = 0; j < cols; ++j) {
      g.gamma[j] += dy[j] * xh[j];
      g.beta[j] += dy[j];
      dxhat[j] = dy[j] * gamma[j];
    }
    normalize_block_backward(xh, dxhat.data(), g.input.data() + r * cols, cols, cache.inv_std[r]);
  }
  return g;
}

// ---- dense ------------------------------------------------------------------

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2) throw ShapeError("linear: weight must be in x out");
  if (x.cols() != weight.dim(0)) {
    throw ShapeError("linear: input width " + std::to_string(x.cols()) + " vs weight " +
                     shape_string(weight.shape()));
  }
  const std::size_t out_dim = weight.dim(1);
  if (!bias.empty() && bias.size() != out_dim) throw ShapeError("linear: bias length mismatch");
  Tensor y({x.rows(), out_dim});
  y.mat().noalias() = x.mat() * weight.mat();
  if (!bias.empty()) {
    for (std::size_t r = 0; r < y.rows(); ++r) {
      for (std::size_t j = 0; j < out_dim; ++j) y.at(r, j) += bias[j];
    }
  }
  return y;
}

LinearGrads linear_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out,
                            bool need_input) {
  if (grad_out.rows() != x.rows() || grad_out.cols() != weight.dim(1)) {
    throw ShapeError("linear_backward: grad_out shape " + shape_string(grad_out.shape()));
  }
  LinearGrads g;
  g.weight = Tensor(weight.shape());
  g.weight.mat().noalias() = x.mat().transpose() * grad_out.mat();
  g.bias = Tensor({weight.dim(1)});
  for (std::size_t r = 0; r < grad_out.rows(); ++r) {
    for (std::size_t j = 0; j < grad_out.cols(); ++j) g.bias[j] += grad_out.at(r, j);
  }
  if (need_input) {
    g.input = Tensor(x.shape());
    g.input.mat().noalias() = grad_out.mat() * weight.mat().transpose();
  }
  return g;
}

// ---- elementwise ------------------------------------------------------------

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Tensor gelu(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = gelu(x[i]);
  return y;
}

Tensor gelu_backward(const Tensor& x, const Tensor& grad_out) {
  require_shape(grad_out, x.shape(), "gelu_backward grad_out");
  Tensor dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = grad_out[i] * gelu_grad(x[i]);
  return dx;
}

Tensor softmax(const Tensor& x) {
  const std::size_t cols = x.cols();
  if (cols == 0 || x.empty()) throw ShapeError("softmax over an empty axis");
  Tensor y(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      out[j] = std::exp(in[j] - mx);
      sum += out[j];
    }
    for (std::size_t j = 0; j < cols; ++j) out[j] /= sum;
  }
  return y;
}

Tensor softmax_backward(const Tensor& y, const Tensor& grad_out) {
  require_shape(grad_out, y.shape(), "softmax_backward grad_out");
  Tensor dx(y.shape());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto yr = y.row(r);
    auto dyr = grad_out.row(r);
    double dot = 0.0;
    for (std::size_t j = 0; j < yr.size(); ++j) dot += yr[j] * dyr[j];
    auto dxr = dx.row(r);
    for (std::size_t j = 0; j < yr.size(); ++j) dxr[j] = yr[j] * (dyr[j] - dot);
  }
  return dx;
}

Tensor dropout(const Tensor& x, double p, bool train, Rng& rng, DropoutMask* mask) {
  if (p < 0.0 || p > 1.0) throw ShapeError("dropout: probability must lie in [0, 1]");
  if (mask) mask->scale.clear();
  if (!train || p == 0.0) return x;
  Tensor y(x.shape());
  std::vector<double> scale(x.size());
  const double keep = p < 1.0 ? 1.0 / (1.0 - p) : 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    scale[i] = rng.uniform() < p ? 0.0 : keep;
    y[i] = x[i] * scale[i];
  }
  if (mask) mask->scale = std::move(scale);
  return y;
}

Tensor dropout_backward(const Tensor& grad_out, const DropoutMask& mask) {
  if (mask.scale.empty()) return grad_out;
  if (mask.scale.size() != grad_out.size()) throw ShapeError("dropout_backward: mask size mismatch");
  Tensor dx(grad_out.shape());
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = grad_out[i] * mask.scale[i];
  return dx;
}

}  // namespace bendr
