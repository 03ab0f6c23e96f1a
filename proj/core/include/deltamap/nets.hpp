#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "deltamap/autodiff.hpp"
#include "deltamap/rng.hpp"

namespace deltamap::nets {

struct GeneratorConfig {
  int depth = 5;        // resolution levels
  int base_width = 32;  // features at the top level; widths double per level
  int input_h = 256;
  int input_w = 256;

  void validate() const {
    if (depth < 1 || base_width < 1) throw std::invalid_argument("GeneratorConfig: bad depth/width");
    int f = 1 << (depth - 1);
    if (input_h % f || input_w % f)
      throw std::invalid_argument("GeneratorConfig: input size must be divisible by 2^(depth-1)");
  }
  int width_at(int level) const { return base_width << level; }
};

struct CriticConfig {
  int depth = 5;
  int base_width = 16;
  int input_h = 256;
  int input_w = 256;

  void validate() const {
    if (depth < 1 || base_width < 1) throw std::invalid_argument("CriticConfig: bad depth/width");
    int f = 1 << (depth - 1);
    if (input_h % f || input_w % f)
      throw std::invalid_argument("CriticConfig: input size must be divisible by 2^(depth-1)");
  }
  int width_at(int level) const { return base_width << level; }
  // 3x3 convolution count per level grows toward the bottom
  int convs_at(int level) const { return level < depth / 2 ? 1 : 2; }
};

// structural description used by tests and tooling
struct LayerInfo {
  std::string kind;  // conv | batchnorm | relu | maxpool | upconv | concat
  int level = 0;
  int in_ch = 0, out_ch = 0;
  int kernel = 0, stride = 0, pad = 0;
};

enum class ForwardMode {
  kTrain,              // batch statistics, running stats updated
  kTrainNoStatUpdate,  // batch statistics, running stats frozen
  kEval,               // running statistics
};

namespace detail {

template <class S>
struct ConvLayer {
  ad::Var<S> w, b;
  int cin = 0, cout = 0, k = 3, stride = 1, pad = 1;

  void build(int cin_, int cout_, int k_, int stride_, int pad_, const std::string& name) {
    cin = cin_;
    cout = cout_;
    k = k_;
    stride = stride_;
    pad = pad_;
    w = ad::make_leaf<S>(ad::Tensor<S>(cout, cin, k, k), true, name + ".w");
    b = ad::make_leaf<S>(ad::Tensor<S>(1, cout, 1, 1), true, name + ".b");
  }

  void init(Rng& rng) {
    double bound = std::sqrt(6.0 / (static_cast<double>(cin) * k * k));
    for (auto& x : w->val.v) x = static_cast<S>(rng.uniform(-bound, bound));
    std::fill(b->val.v.begin(), b->val.v.end(), S(0));
  }

  ad::Var<S> operator()(const ad::Var<S>& x) const {
    auto geom = ad::make_conv_geom(cin, cout, x->val.h(), x->val.w(), k, stride, pad);
    return ad::bias_add(ad::conv_fwd_op(x, w, geom), b);
  }
};

// 4x4 transposed convolution with stride 2, expressed as the input-gradient
// of the matching strided convolution
template <class S>
struct UpconvLayer {
  ad::Var<S> w, b;
  int cin = 0, cout = 0;

  void build(int cin_, int cout_, const std::string& name) {
    cin = cin_;
    cout = cout_;
    w = ad::make_leaf<S>(ad::Tensor<S>(cin, cout, 4, 4), true, name + ".w");
    b = ad::make_leaf<S>(ad::Tensor<S>(1, cout, 1, 1), true, name + ".b");
  }

  void init(Rng& rng) {
    double bound = std::sqrt(6.0 / (static_cast<double>(cin) * 16.0));
    for (auto& x : w->val.v) x = static_cast<S>(rng.uniform(-bound, bound));
    std::fill(b->val.v.begin(), b->val.v.end(), S(0));
  }

  ad::Var<S> operator()(const ad::Var<S>& x) const {
    auto geom = ad::make_upconv_geom(cin, cout, x->val.h(), x->val.w(), 4, 2, 1);
    return ad::bias_add(ad::conv_bwd_input_op(x, w, geom), b);
  }
};

template <class S>
struct BatchNorm2d {
  ad::Var<S> gamma, beta;
  ad::Tensor<S> running_mean, running_var;
  double momentum = 0.1;
  double eps = 1e-5;
  int channels = 0;

  void build(int c, const std::string& name) {
    channels = c;
    gamma = ad::make_leaf<S>(ad::Tensor<S>(1, c, 1, 1, S(1)), true, name + ".gamma");
    beta = ad::make_leaf<S>(ad::Tensor<S>(1, c, 1, 1, S(0)), true, name + ".beta");
    running_mean = ad::Tensor<S>(1, c, 1, 1, S(0));
    running_var = ad::Tensor<S>(1, c, 1, 1, S(1));
  }

  ad::Var<S> operator()(const ad::Var<S>& x, ForwardMode mode) {
    const auto& t = x->val;
    if (mode == ForwardMode::kEval) {
      // affine with frozen statistics
      ad::Tensor<S> a(1, channels, 1, 1), c(1, channels, 1, 1);
      for (int i = 0; i < channels; ++i) {
        double inv = 1.0 / std::sqrt(static_cast<double>(running_var.v[i]) + eps);
        a.v[i] = static_cast<S>(static_cast<double>(gamma->val.v[i]) * inv);
        c.v[i] = static_cast<S>(static_cast<double>(beta->val.v[i]) -
                                static_cast<double>(running_mean.v[i]) * static_cast<double>(a.v[i]));
      }
      return ad::bias_add(ad::mul_channel(x, ad::make_leaf<S>(std::move(a))), ad::make_leaf<S>(std::move(c)));
    }
    auto mu = ad::mean_nhw(x);
    auto xc = ad::sub(x, ad::broadcast_c(mu, t.n(), t.h(), t.w()));
    auto var = ad::mean_nhw(ad::mul(xc, xc));
    if (mode == ForwardMode::kTrain) {
      for (int i = 0; i < channels; ++i) {
        running_mean.v[i] = static_cast<S>((1 - momentum) * static_cast<double>(running_mean.v[i]) +
                                           momentum * static_cast<double>(mu->val.v[i]));
        running_var.v[i] = static_cast<S>((1 - momentum) * static_cast<double>(running_var.v[i]) +
                                          momentum * static_cast<double>(var->val.v[i]));
      }
    }
    auto inv = ad::upow(ad::add_scalar(var, eps), -0.5);
    auto xhat = ad::mul_channel(xc, inv);
    return ad::bias_add(ad::mul_channel(xhat, gamma), beta);
  }
};

template <class S>
struct ConvBnRelu {
  ConvLayer<S> conv;
  BatchNorm2d<S> bn;

  void build(int cin, int cout, const std::string& name) {
    conv.build(cin, cout, 3, 1, 1, name + ".conv");
    bn.build(cout, name + ".bn");
  }
  ad::Var<S> operator()(const ad::Var<S>& x, ForwardMode mode) { return ad::relu(bn(conv(x), mode)); }
};

}  // namespace detail

// Slice-wise U-Net producing the additive change map (linear 1x1 head).
template <class S>
class Generator {
 public:
  explicit Generator(GeneratorConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    const int d = cfg_.depth;
    enc_.resize(d);
    for (int i = 0; i < d; ++i) {
      int cin = i == 0 ? 1 : cfg_.width_at(i - 1);
      int cw = cfg_.width_at(i);
      enc_[i][0].build(cin, cw, "enc" + std::to_string(i) + ".block0");
      enc_[i][1].build(cw, cw, "enc" + std::to_string(i) + ".block1");
    }
    dec_.resize(d - 1);
    for (int j = d - 2; j >= 0; --j) {
      int cw = cfg_.width_at(j);
      dec_[j].up.build(cfg_.width_at(j + 1), cw, "dec" + std::to_string(j) + ".up");
      dec_[j].blocks[0].build(2 * cw, cw, "dec" + std::to_string(j) + ".block0");
      dec_[j].blocks[1].build(cw, cw, "dec" + std::to_string(j) + ".block1");
    }
    head_.build(cfg_.width_at(0), 1, 1, 1, 0, "head");
  }

  void init_params(uint64_t seed) {
    Rng rng(hash_combine(seed, 0x67656e /* "gen" */));
    for (auto& level : enc_)
      for (auto& blk : level) {
        blk.conv.init(rng);
      }
    for (auto& d : dec_) {
      d.up.init(rng);
      for (auto& blk : d.blocks) blk.conv.init(rng);
    }
    head_.init(rng);
  }

  // returns the additive map M; output spatial shape equals input shape
  ad::Var<S> forward(const ad::Var<S>& x, ForwardMode mode = ForwardMode::kEval) {
    check_input(x->val);
    std::vector<ad::Var<S>> skips;
    ad::Var<S> h = x;
    for (int i = 0; i < cfg_.depth; ++i) {
      h = enc_[i][0](h, mode);
      h = enc_[i][1](h, mode);
      if (i + 1 < cfg_.depth) {
        skips.push_back(h);
        h = ad::maxpool2(h);
      }
    }
    for (int j = cfg_.depth - 2; j >= 0; --j) {
      h = dec_[j].up(h);
      h = ad::concat_c(skips[j], h);
      h = dec_[j].blocks[0](h, mode);
      h = dec_[j].blocks[1](h, mode);
    }
    return head_(h);
  }

  std::vector<ad::Var<S>> parameters() const {
    std::vector<ad::Var<S>> out;
    for (const auto& level : enc_)
      for (const auto& blk : level) {
        out.push_back(blk.conv.w);
        out.push_back(blk.conv.b);
        out.push_back(blk.bn.gamma);
        out.push_back(blk.bn.beta);
      }
    for (const auto& d : dec_) {
      out.push_back(d.up.w);
      out.push_back(d.up.b);
      for (const auto& blk : d.blocks) {
        out.push_back(blk.conv.w);
        out.push_back(blk.conv.b);
        out.push_back(blk.bn.gamma);
        out.push_back(blk.bn.beta);
      }
    }
    out.push_back(head_.w);
    out.push_back(head_.b);
    return out;
  }

  // named buffers (batchnorm running statistics), in a stable order
  std::vector<std::pair<std::string, ad::Tensor<S>*>> buffers() {
    std::vector<std::pair<std::string, ad::Tensor<S>*>> out;
    for (size_t i = 0; i < enc_.size(); ++i)
      for (int k = 0; k < 2; ++k) {
        std::string base = "enc" + std::to_string(i) + ".block" + std::to_string(k) + ".bn";
        out.push_back({base + ".running_mean", &enc_[i][k].bn.running_mean});
        out.push_back({base + ".running_var", &enc_[i][k].bn.running_var});
      }
    for (size_t j = 0; j < dec_.size(); ++j)
      for (int k = 0; k < 2; ++k) {
        std::string base = "dec" + std::to_string(j) + ".block" + std::to_string(k) + ".bn";
        out.push_back({base + ".running_mean", &dec_[j].blocks[k].bn.running_mean});
        out.push_back({base + ".running_var", &dec_[j].blocks[k].bn.running_var});
      }
    return out;
  }

  std::vector<LayerInfo> layer_manifest() const {
    std::vector<LayerInfo> m;
    auto push_block = [&m](int level, int cin, int cout) {
      m.push_back({"conv", level, cin, cout, 3, 1, 1});
      m.push_back({"batchnorm", level, cout, cout, 0, 0, 0});
      m.push_back({"relu", level, cout, cout, 0, 0, 0});
    };
    for (int i = 0; i < cfg_.depth; ++i) {
      int cin = i == 0 ? 1 : cfg_.width_at(i - 1);
      int cw = cfg_.width_at(i);
      push_block(i, cin, cw);
      push_block(i, cw, cw);
      if (i + 1 < cfg_.depth) m.push_back({"maxpool", i, cw, cw, 2, 2, 0});
    }
    for (int j = cfg_.depth - 2; j >= 0; --j) {
      int cw = cfg_.width_at(j);
      m.push_back({"upconv", j, cfg_.width_at(j + 1), cw, 4, 2, 1});
      m.push_back({"concat", j, 2 * cw, 2 * cw, 0, 0, 0});
      push_block(j, 2 * cw, cw);
      push_block(j, cw, cw);
    }
    m.push_back({"conv", 0, cfg_.width_at(0), 1, 1, 1, 0});
    return m;
  }

  const GeneratorConfig& config() const { return cfg_; }

 private:
  struct DecLevel {
    detail::UpconvLayer<S> up;
    std::array<detail::ConvBnRelu<S>, 2> blocks;
  };

  void check_input(const ad::Tensor<S>& t) const {
    if (t.c() != 1 || t.h() != cfg_.input_h || t.w() != cfg_.input_w)
      throw std::invalid_argument("Generator: input shape mismatch (want 1x" + std::to_string(cfg_.input_h) +
                                  "x" + std::to_string(cfg_.input_w) + ")");
  }

  GeneratorConfig cfg_;
  std::vector<std::array<detail::ConvBnRelu<S>, 2>> enc_;
  std::vector<DecLevel> dec_;
  detail::ConvLayer<S> head_;
};

// elementwise x + m, no clamping
template <class S>
ad::Var<S> fake_t2(const ad::Var<S>& x, const ad::Var<S>& m) {
  if (!x->val.same_shape(m->val)) throw std::invalid_argument("fake_t2: shape mismatch");
  return ad::add(x, m);
}

// Encoder critic: 3x3 conv + ReLU stacks (no normalization, which would
// break the gradient penalty), 2x2 max pooling between levels, 1x1 conv to a
// single feature, spatial average to one score per sample.
template <class S>
class Critic {
 public:
  explicit Critic(CriticConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    for (int i = 0; i < cfg_.depth; ++i) {
      int cw = cfg_.width_at(i);
      int cin = i == 0 ? 1 : cfg_.width_at(i - 1);
      for (int k = 0; k < cfg_.convs_at(i); ++k) {
        convs_.emplace_back();
        convs_.back().build(k == 0 ? cin : cw, cw, 3, 1, 1,
                            "lvl" + std::to_string(i) + ".conv" + std::to_string(k));
        conv_level_.push_back(i);
      }
    }
    head_.build(cfg_.width_at(cfg_.depth - 1), 1, 1, 1, 0, "head");
  }

  void init_params(uint64_t seed) {
    Rng rng(hash_combine(seed, 0x637269 /* "cri" */));
    for (auto& c : convs_) c.init(rng);
    head_.init(rng);
  }

  // one real score per batch item, (N,1,1,1)
  ad::Var<S> forward(const ad::Var<S>& x) {
    check_input(x->val);
    ad::Var<S> h = x;
    int li = 0;
    for (int i = 0; i < cfg_.depth; ++i) {
      for (int k = 0; k < cfg_.convs_at(i); ++k) h = ad::relu(convs_[li++](h));
      if (i + 1 < cfg_.depth) h = ad::maxpool2(h);
    }
    h = head_(h);
    return ad::mean_chw(h);
  }

  std::vector<ad::Var<S>> parameters() const {
    std::vector<ad::Var<S>> out;
    for (const auto& c : convs_) {
      out.push_back(c.w);
      out.push_back(c.b);
    }
    out.push_back(head_.w);
    out.push_back(head_.b);
    return out;
  }

  std::vector<LayerInfo> layer_manifest() const {
    std::vector<LayerInfo> m;
    int li = 0;
    for (int i = 0; i < cfg_.depth; ++i) {
      for (int k = 0; k < cfg_.convs_at(i); ++k) {
        const auto& c = convs_[li++];
        m.push_back({"conv", i, c.cin, c.cout, 3, 1, 1});
        m.push_back({"relu", i, c.cout, c.cout, 0, 0, 0});
      }
      if (i + 1 < cfg_.depth) m.push_back({"maxpool", i, cfg_.width_at(i), cfg_.width_at(i), 2, 2, 0});
    }
    m.push_back({"conv", cfg_.depth - 1, cfg_.width_at(cfg_.depth - 1), 1, 1, 1, 0});
    m.push_back({"mean", cfg_.depth - 1, 1, 1, 0, 0, 0});
    return m;
  }

  const CriticConfig& config() const { return cfg_; }

 private:
  void check_input(const ad::Tensor<S>& t) const {
    if (t.c() != 1 || t.h() != cfg_.input_h || t.w() != cfg_.input_w)
      throw std::invalid_argument("Critic: input shape mismatch");
  }

  CriticConfig cfg_;
  std::vector<detail::ConvLayer<S>> convs_;
  std::vector<int> conv_level_;
  detail::ConvLayer<S> head_;
};

}  // namespace deltamap::nets
