#include "ffasynth/layers.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "ffasynth/error.hpp"
#include "ffasynth/filters.hpp"

namespace ffasynth {

namespace {

Tensor normal_tensor(std::vector<int> shape, std::mt19937_64& rng, double stddev) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Tensor pad(const Tensor& x, int p, Padding mode) {
  if (p == 0) return x;
  const int c = x.channels();
  const int h = x.height();
  const int w = x.width();
  Tensor out = Tensor::chw(c, h + 2 * p, w + 2 * p);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h + 2 * p; ++y) {
      for (int xx = 0; xx < w + 2 * p; ++xx) {
        const int sy = y - p;
        const int sx = xx - p;
        if (mode == Padding::zero) {
          if (sy >= 0 && sy < h && sx >= 0 && sx < w) out.at(ch, y, xx) = x.at(ch, sy, sx);
        } else {
          out.at(ch, y, xx) = x.at(ch, reflect_index(sy, h), reflect_index(sx, w));
        }
      }
    }
  }
  return out;
}

// Folds a gradient w.r.t. the padded tensor back onto the unpadded input.
Tensor unpad_grad(const Tensor& g, int p, Padding mode, int h, int w) {
  if (p == 0) return g;
  const int c = g.channels();
  Tensor out = Tensor::chw(c, h, w);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h + 2 * p; ++y) {
      for (int xx = 0; xx < w + 2 * p; ++xx) {
        const int sy = y - p;
        const int sx = xx - p;
        if (mode == Padding::zero) {
          if (sy >= 0 && sy < h && sx >= 0 && sx < w) out.at(ch, sy, sx) += g.at(ch, y, xx);
        } else {
          out.at(ch, reflect_index(sy, h), reflect_index(sx, w)) += g.at(ch, y, xx);
        }
      }
    }
  }
  return out;
}

// cols[(c*k + ky)*k + kx][oy*ow + ox] = x[c][oy*s + ky][ox*s + kx]
std::vector<double> im2col(const Tensor& x, int k, int s, int oh, int ow) {
  const int c = x.channels();
  std::vector<double> cols(static_cast<std::size_t>(c) * k * k * oh * ow);
  std::size_t row = 0;
  for (int ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        double* dst = cols.data() + row * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const double* src = x.raw() + (static_cast<std::size_t>(ch) * x.height() + oy * s + ky) * x.width() + kx;
          for (int ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = src[ox * s];
        }
      }
    }
  }
  return cols;
}

void col2im(const std::vector<double>& cols, int k, int s, int oh, int ow, Tensor& x) {
  const int c = x.channels();
  std::size_t row = 0;
  for (int ch = 0; ch < c; ++ch) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx, ++row) {
        const double* src = cols.data() + row * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          double* dst = x.raw() + (static_cast<std::size_t>(ch) * x.height() + oy * s + ky) * x.width() + kx;
          for (int ox = 0; ox < ow; ++ox) dst[ox * s] += src[oy * ow + ox];
        }
      }
    }
  }
}

void require_rank3(const Tensor& x, const std::string& layer) {
  if (x.shape().size() != 3) {
    throw ParameterError(layer + ": expected a (C,H,W) tensor, got " + x.shape_string());
  }
}

}  // namespace

// ---- Conv2d ---------------------------------------------------------------

Conv2d::Conv2d(std::string name, ConvSpec spec, ParamSet& params, std::mt19937_64& rng,
               double stddev)
    : Layer(name), spec_(spec) {
  if (spec.in <= 0 || spec.out <= 0 || spec.kernel <= 0 || spec.stride <= 0 || spec.pad < 0) {
    throw ParameterError(name + ": invalid convolution geometry");
  }
  weight_ = params.add(name + ".weight",
                       normal_tensor({spec.out, spec.in, spec.kernel, spec.kernel}, rng, stddev));
  bias_ = params.add(name + ".bias", Tensor({spec.out}, 0.0));
}

Tensor Conv2d::forward(const Tensor& x, const ParamSet& params, const ForwardContext&) {
  require_rank3(x, name());
  if (x.channels() != spec_.in) {
    throw ParameterError(name() + ": expected " + std::to_string(spec_.in) + " input channels, got " +
                         std::to_string(x.channels()));
  }
  if (spec_.padding == Padding::reflect && spec_.pad >= std::min(x.height(), x.width())) {
    throw ParameterError(name() + ": reflect padding exceeds input extent");
  }
  in_h_ = x.height();
  in_w_ = x.width();
  const int oh = conv_out_size(in_h_, spec_.kernel, spec_.stride, spec_.pad);
  const int ow = conv_out_size(in_w_, spec_.kernel, spec_.stride, spec_.pad);
  if (oh <= 0 || ow <= 0) {
    throw ParameterError(name() + ": input " + x.shape_string() + " too small for kernel");
  }
  padded_ = pad(x, spec_.pad, spec_.padding);
  const auto cols = im2col(padded_, spec_.kernel, spec_.stride, oh, ow);
  const int kk = spec_.in * spec_.kernel * spec_.kernel;
  const int n = oh * ow;
  Tensor out = Tensor::chw(spec_.out, oh, ow);
  const Tensor& w = params[weight_].value;
  const Tensor& b = params[bias_].value;
  for (int o = 0; o < spec_.out; ++o) std::fill_n(out.raw() + static_cast<std::size_t>(o) * n, n, b[o]);
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, spec_.out, n, kk, 1.0, w.raw(), kk,
              cols.data(), n, 1.0, out.raw(), n);
  return out;
}

Tensor Conv2d::backward(const Tensor& grad_out, ParamSet& params, bool accumulate) {
  const int oh = grad_out.height();
  const int ow = grad_out.width();
  const int kk = spec_.in * spec_.kernel * spec_.kernel;
  const int n = oh * ow;
  const auto cols = im2col(padded_, spec_.kernel, spec_.stride, oh, ow);
  if (accumulate) {
    Tensor& dw = params[weight_].grad;
    Tensor& db = params[bias_].grad;
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, spec_.out, kk, n, 1.0, grad_out.raw(), n,
                cols.data(), n, 1.0, dw.raw(), kk);
    for (int o = 0; o < spec_.out; ++o) {
      const double* g = grad_out.raw() + static_cast<std::size_t>(o) * n;
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += g[i];
      db[o] += s;
    }
  }
  std::vector<double> dcols(static_cast<std::size_t>(kk) * n);
  cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, kk, n, spec_.out, 1.0,
              params[weight_].value.raw(), kk, grad_out.raw(), n, 0.0, dcols.data(), n);
  Tensor dpadded(padded_.shape(), 0.0);
  col2im(dcols, spec_.kernel, spec_.stride, oh, ow, dpadded);
  return unpad_grad(dpadded, spec_.pad, spec_.padding, in_h_, in_w_);
}

// ---- ConvTranspose2d ------------------------------------------------------

ConvTranspose2d::ConvTranspose2d(std::string name, int in, int out, int kernel, int stride,
                                 int pad, int output_pad, ParamSet& params, std::mt19937_64& rng,
                                 double stddev)
    : Layer(name), in_(in), out_(out), kernel_(kernel), stride_(stride), pad_(pad),
      output_pad_(output_pad) {
  if (output_pad >= stride) throw ParameterError(name + ": output padding must be < stride");
  weight_ = params.add(name + ".weight", normal_tensor({in, out, kernel, kernel}, rng, stddev));
  bias_ = params.add(name + ".bias", Tensor({out}, 0.0));
}

Tensor ConvTranspose2d::forward(const Tensor& x, const ParamSet& params, const ForwardContext&) {
  require_rank3(x, name());
  if (x.channels() != in_) throw ParameterError(name() + ": input channel mismatch");
  input_ = x;
  const int h = x.height();
  const int w = x.width();
  const int oh = (h - 1) * stride_ - 2 * pad_ + kernel_ + output_pad_;
  const int ow = (w - 1) * stride_ - 2 * pad_ + kernel_ + output_pad_;
  const int okk = out_ * kernel_ * kernel_;
  const int n = h * w;
  std::vector<double> cols(static_cast<std::size_t>(okk) * n);
  cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, okk, n, in_, 1.0, params[weight_].value.raw(),
              okk, x.raw(), n, 0.0, cols.data(), n);
  Tensor buffer = Tensor::chw(out_, oh + 2 * pad_, ow + 2 * pad_);
  col2im(cols, kernel_, stride_, h, w, buffer);
  Tensor out = Tensor::chw(out_, oh, ow);
  const Tensor& b = params[bias_].value;
  for (int c = 0; c < out_; ++c)
    for (int y = 0; y < oh; ++y)
      for (int xx = 0; xx < ow; ++xx) out.at(c, y, xx) = buffer.at(c, y + pad_, xx + pad_) + b[c];
  return out;
}

Tensor ConvTranspose2d::backward(const Tensor& grad_out, ParamSet& params, bool accumulate) {
  const int h = input_.height();
  const int w = input_.width();
  const int okk = out_ * kernel_ * kernel_;
  const int n = h * w;
  const Tensor padded = pad(grad_out, pad_, Padding::zero);
  const auto cols = im2col(padded, kernel_, stride_, h, w);
  if (accumulate) {
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, in_, okk, n, 1.0, input_.raw(), n,
                cols.data(), n, 1.0, params[weight_].grad.raw(), okk);
    Tensor& db = params[bias_].grad;
    const std::size_t plane = grad_out.plane();
    for (int c = 0; c < out_; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += grad_out[c * plane + i];
      db[c] += s;
    }
  }
  Tensor dx = Tensor::chw(in_, h, w);
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, in_, n, okk, 1.0,
              params[weight_].value.raw(), okk, cols.data(), n, 0.0, dx.raw(), n);
  return dx;
}

// ---- InstanceNorm ---------------------------------------------------------

Tensor InstanceNorm::forward(const Tensor& x, const ParamSet&, const ForwardContext&) {
  require_rank3(x, name());
  const std::size_t plane = x.plane();
  normalized_ = Tensor(x.shape());
  inv_std_.assign(static_cast<std::size_t>(x.channels()), 0.0);
  for (int c = 0; c < x.channels(); ++c) {
    const double* src = x.raw() + c * plane;
    double mean = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mean += src[i];
    mean /= static_cast<double>(plane);
    double var = 0.0;
    for (std::size_t i = 0; i < plane; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= static_cast<double>(plane);
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[c] = inv;
    double* dst = normalized_.raw() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = (src[i] - mean) * inv;
  }
  return normalized_;
}

Tensor InstanceNorm::backward(const Tensor& grad_out, ParamSet&, bool) {
  const std::size_t plane = grad_out.plane();
  Tensor dx(grad_out.shape());
  for (int c = 0; c < grad_out.channels(); ++c) {
    const double* g = grad_out.raw() + c * plane;
    const double* y = normalized_.raw() + c * plane;
    double mean_g = 0.0;
    double mean_gy = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      mean_g += g[i];
      mean_gy += g[i] * y[i];
    }
    mean_g /= static_cast<double>(plane);
    mean_gy /= static_cast<double>(plane);
    double* d = dx.raw() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) d[i] = inv_std_[c] * (g[i] - mean_g - y[i] * mean_gy);
  }
  return dx;
}

// ---- pointwise ------------------------------------------------------------

Tensor LeakyReLU::forward(const Tensor& x, const ParamSet&, const ForwardContext&) {
  input_ = x;
  Tensor out = x;
  for (double& v : out.values()) v = v > 0.0 ? v : slope_ * v;
  return out;
}

Tensor LeakyReLU::backward(const Tensor& grad_out, ParamSet&, bool) {
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= input_[i] > 0.0 ? 1.0 : slope_;
  return dx;
}

Tensor Tanh::forward(const Tensor& x, const ParamSet&, const ForwardContext&) {
  output_ = x;
  for (double& v : output_.values()) v = std::tanh(v);
  return output_;
}

Tensor Tanh::backward(const Tensor& grad_out, ParamSet&, bool) {
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= 1.0 - output_[i] * output_[i];
  return dx;
}

Tensor Sigmoid::forward(const Tensor& x, const ParamSet&, const ForwardContext&) {
  output_ = x;
  for (double& v : output_.values()) v = 1.0 / (1.0 + std::exp(-v));
  return output_;
}

Tensor Sigmoid::backward(const Tensor& grad_out, ParamSet&, bool) {
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= output_[i] * (1.0 - output_[i]);
  return dx;
}

Tensor Affine::forward(const Tensor& x, const ParamSet&, const ForwardContext&) {
  Tensor out = x;
  for (double& v : out.values()) v = scale_ * v + shift_;
  return out;
}

Tensor Affine::backward(const Tensor& grad_out, ParamSet&, bool) {
  Tensor dx = grad_out;
  dx *= scale_;
  return dx;
}

Tensor Dropout::forward(const Tensor& x, const ParamSet&, const ForwardContext& ctx) {
  if (!ctx.training || p_ <= 0.0) {
    mask_.assign(x.size(), 1.0);
    return x;
  }
  if (ctx.rng == nullptr) throw ParameterError(name() + ": training-mode dropout needs an rng");
  std::bernoulli_distribution keep(1.0 - p_);
  mask_.resize(x.size());
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask_[i] = keep(*ctx.rng) ? 1.0 / (1.0 - p_) : 0.0;
    out[i] *= mask_[i];
  }
  return out;
}

Tensor Dropout::backward(const Tensor& grad_out, ParamSet&, bool) {
  Tensor dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask_[i];
  return dx;
}

Tensor MaxPool2::forward(const Tensor& x, const ParamSet&, const ForwardContext&) {
  require_rank3(x, name());
  in_shape_ = x.shape();
  const int oh = x.height() / 2;
  const int ow = x.width() / 2;
  if (oh == 0 || ow == 0) throw ParameterError(name() + ": input too small to pool");
  Tensor out = Tensor::chw(x.channels(), oh, ow);
  argmax_.resize(out.size());
  std::size_t o = 0;
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx, ++o) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx =
                (static_cast<std::size_t>(c) * x.height() + 2 * y + dy) * x.width() + 2 * xx + dx;
            if (x[idx] > best) {
              best = x[idx];
              arg = idx;
            }
          }
        }
        out[o] = best;
        argmax_[o] = arg;
      }
    }
  }
  return out;
}

Tensor MaxPool2::backward(const Tensor& grad_out, ParamSet&, bool) {
  Tensor dx(in_shape_, 0.0);
  for (std::size_t o = 0; o < grad_out.size(); ++o) dx[argmax_[o]] += grad_out[o];
  return dx;
}

// ---- composites -----------------------------------------------------------

Sequential::Sequential(const Sequential& other) : Layer(other.name()) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Tensor Sequential::forward(const Tensor& x, const ParamSet& params, const ForwardContext& ctx) {
  Tensor h = x;
  for (auto& layer : layers_) {
    h = layer->forward(h, params, ctx);
    if (!h.all_finite()) {
      throw NumericFault(layer->name(), "non-finite activation produced by layer '" + layer->name() + "'");
    }
  }
  return h;
}

Tensor Sequential::backward(const Tensor& grad_out, ParamSet& params, bool accumulate) {
  Tensor g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g, params, accumulate);
  return g;
}

Tensor Residual::forward(const Tensor& x, const ParamSet& params, const ForwardContext& ctx) {
  Tensor out = body_.forward(x, params, ctx);
  out += x;
  return out;
}

Tensor Residual::backward(const Tensor& grad_out, ParamSet& params, bool accumulate) {
  Tensor dx = body_.backward(grad_out, params, accumulate);
  dx += grad_out;
  return dx;
}

}  // namespace ffasynth
