#include <cmath>
#include <string>

#include "bendr/errors.hpp"
#include "bendr/ops.hpp"

namespace bendr {

namespace {

void check_attention_shapes(const Tensor& x, std::size_t heads, const Tensor& wq,
                            const Tensor& wk, const Tensor& wv, const Tensor& wo) {
  if (x.rank() != 2) throw ShapeError("attention: input must be S x D");
  const std::size_t d = x.dim(1);
  if (heads == 0 || d % heads != 0) {
    throw ShapeError("attention: model width " + std::to_string(d) + " not divisible by " +
                     std::to_string(heads) + " heads");
  }
  for (const Tensor* w : {&wq, &wk, &wv, &wo}) require_shape(*w, {d, d}, "attention weight");
}

}  // namespace

Tensor multi_head_attention(const Tensor& x, std::size_t heads, const Tensor& wq,
                            const Tensor& wk, const Tensor& wv, const Tensor& wo,
                            AttentionCache* cache) {
  check_attention_shapes(x, heads, wq, wk, wv, wo);
  const std::size_t d = x.dim(1);
  const auto dh = static_cast<Eigen::Index>(d / heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  AttentionCache local;
  AttentionCache& c = cache ? *cache : local;
  c.heads = heads;
  c.input = x;
  c.q = Tensor(x.shape());
  c.k = Tensor(x.shape());
  c.v = Tensor(x.shape());
  c.q.mat().noalias() = x.mat() * wq.mat();
  c.k.mat().noalias() = x.mat() * wk.mat();
  c.v.mat().noalias() = x.mat() * wv.mat();
  c.concat = Tensor(x.shape());
  c.probs.assign(heads, Tensor());

  for (std::size_t h = 0; h < heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * dh;
    Tensor logits({x.dim(0), x.dim(0)});
    logits.mat().noalias() =
        c.q.mat().middleCols(off, dh) * c.k.mat().middleCols(off, dh).transpose() * scale;
    c.probs[h] = softmax(logits);
    c.concat.mat().middleCols(off, dh).noalias() = c.probs[h].mat() * c.v.mat().middleCols(off, dh);
  }
  Tensor y(x.shape());
  y.mat().noalias() = c.concat.mat() * wo.mat();
  return y;
}

AttentionGrads multi_head_attention_backward(const Tensor& grad_out, const Tensor& wq,
                                             const Tensor& wk, const Tensor& wv,
                                             const Tensor& wo, const AttentionCache& c,
                                             bool need_input) {
  require_shape(grad_out, c.input.shape(), "attention_backward grad_out");
  const std::size_t d = c.input.dim(1);
  const std::size_t heads = c.heads;
  const auto dh = static_cast<Eigen::Index>(d / heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  AttentionGrads g;
  g.wo = Tensor(wo.shape());
  g.wo.mat().noalias() = c.concat.mat().transpose() * grad_out.mat();
  Tensor dconcat(c.input.shape());
  dconcat.mat().noalias() = grad_out.mat() * wo.mat().transpose();

  Tensor dq(c.input.shape()), dk(c.input.shape()), dv(c.input.shape());
  for (std::size_t h = 0; h < heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * dh;
    const Tensor& p = c.probs[h];
    auto dout = dconcat.mat().middleCols(off, dh);
    dv.mat().middleCols(off, dh).noalias() = p.mat().transpose() * dout;
    Tensor dp(p.shape());
    dp.mat().noalias() = dout * c.v.mat().middleCols(off, dh).transpose();
    Tensor dlogits = softmax_backward(p, dp);
    dlogits *= scale;
    dq.mat().middleCols(off, dh).noalias() = dlogits.mat() * c.k.mat().middleCols(off, dh);
    dk.mat().middleCols(off, dh).noalias() =
        dlogits.mat().transpose() * c.q.mat().middleCols(off, dh);
  }

  g.wq = Tensor(wq.shape());
  g.wk = Tensor(wk.shape());
  g.wv = Tensor(wv.shape());
  g.wq.mat().noalias() = c.input.mat().transpose() * dq.mat();
  g.wk.mat().noalias() = c.input.mat().transpose() * dk.mat();
  g.wv.mat().noalias() = c.input.mat().transpose() * dv.mat();
  if (need_input) {
    g.input = Tensor(c.input.shape());
    g.input.mat().noalias() = dq.mat() * wq.mat().transpose();
    g.input.mat().noalias() += dk.mat() * wk.mat().transpose();
    g.input.mat().noalias() += dv.mat() * wv.mat().transpose();
  }
  return g;
}

}  // namespace bendr
