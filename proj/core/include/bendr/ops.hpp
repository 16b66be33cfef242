#pragma once

// Differentiable kernels with explicit backward rules. Every forward function
// is pure; the matching *_backward takes whatever the forward cached and
// returns gradients for each input.

#include <cstddef>
#include <vector>

#include "bendr/rng.hpp"
#include "bendr/tensor.hpp"

namespace bendr {

inline constexpr double kNormEps = 1e-5;

// ---- conv1d -----------------------------------------------------------------

struct Conv1dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;  // zero padding on both ends
  std::size_t groups = 1;
};

// Output length of a 1-D cross-correlation; throws ShapeError when the
// (padded) input is shorter than the kernel.
std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, const Conv1dOptions& opt);

// input C_in×L, weight C_out×(C_in/groups)×K, bias C_out (or empty).
Tensor conv1d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              const Conv1dOptions& opt = {});

struct Conv1dGrads {
  Tensor input;  // empty when not requested
  Tensor weight;
  Tensor bias;
};

Conv1dGrads conv1d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                            const Conv1dOptions& opt = {}, bool need_input = true);

// ---- normalisation ----------------------------------------------------------

struct NormCache {
  Tensor normalized;            // x-hat, same shape as input
  std::vector<double> inv_std;  // one per group (group_norm) or row (layer_norm)
};

struct AffineNormGrads {
  Tensor input;
  Tensor gamma;
  Tensor beta;
};

// input C×L; statistics over (C/groups)×L blocks, affine per channel.
Tensor group_norm(const Tensor& input, std::size_t groups, const Tensor& gamma, const Tensor& beta,
                  NormCache* cache = nullptr, double eps = kNormEps);
AffineNormGrads group_norm_backward(const Tensor& grad_out, std::size_t groups,
                                    const Tensor& gamma, const NormCache& cache);

// Row-wise normalisation over the last axis of an N×D matrix.
Tensor layer_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  NormCache* cache = nullptr, double eps = kNormEps);
AffineNormGrads layer_norm_backward(const Tensor& grad_out, const Tensor& gamma,
                                    const NormCache& cache);

// ---- dense ------------------------------------------------------------------

// y = x·W + b with x N×in, W in×out, b out (or empty).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

struct LinearGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};
LinearGrads linear_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out,
                            bool need_input = true);

// ---- elementwise ------------------------------------------------------------

double gelu(double x);
double gelu_grad(double x);
Tensor gelu(const Tensor& x);
Tensor gelu_backward(const Tensor& x, const Tensor& grad_out);

// Softmax along the last axis.
Tensor softmax(const Tensor& x);
Tensor softmax_backward(const Tensor& y, const Tensor& grad_out);

// Inverted dropout. An empty mask means identity (eval mode or p == 0).
struct DropoutMask {
  std::vector<double> scale;
};
Tensor dropout(const Tensor& x, double p, bool train, Rng& rng, DropoutMask* mask = nullptr);
Tensor dropout_backward(const Tensor& grad_out, const DropoutMask& mask);

// ---- attention --------------------------------------------------------------

struct AttentionCache {
  std::size_t heads = 0;
  Tensor input;   // S×D
  Tensor q, k, v; // S×D each
  Tensor concat;  // S×D, per-head outputs side by side
  std::vector<Tensor> probs;  // per head S×S
};

struct AttentionGrads {
  Tensor input;
  Tensor wq, wk, wv, wo;
};

// softmax(Q Kᵀ/√(D/H)) V per head, concatenated, projected by Wo. No biases.
Tensor multi_head_attention(const Tensor& x, std::size_t heads, const Tensor& wq,
                            const Tensor& wk, const Tensor& wv, const Tensor& wo,
                            AttentionCache* cache = nullptr);
AttentionGrads multi_head_attention_backward(const Tensor& grad_out, const Tensor& wq,
                                             const Tensor& wk, const Tensor& wv,
                                             const Tensor& wo, const AttentionCache& cache,
                                             bool need_input = true);

}  // namespace bendr
