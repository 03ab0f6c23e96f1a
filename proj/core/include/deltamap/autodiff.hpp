#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "deltamap/tensor.hpp"

// Reverse-mode autodiff over Tensor<S> with define-by-run graphs. Every VJP
// is expressed through the public ops, so running a backward sweep while
// recording yields a differentiable gradient graph (what the gradient
// penalty needs); running it without recording yields plain numeric grads.
// ReLU masks and pooling argmax indices are treated as constants of the
// backward pass.

namespace deltamap::ad {

template <class S>
struct Node;
template <class S>
using Var = std::shared_ptr<Node<S>>;

template <class S>
using VjpFn = std::function<Var<S>(const Node<S>&, const Var<S>&, int)>;

inline std::atomic<uint64_t>& node_counter() {
  static std::atomic<uint64_t> c{0};
  return c;
}

template <class S>
struct Node {
  Tensor<S> val;
  Tensor<S> grad;  // numeric accumulation slot for leaves
  bool requires_grad = false;
  uint64_t id = 0;
  std::vector<Var<S>> parents;
  VjpFn<S> vjp;
  std::shared_ptr<std::vector<int32_t>> indices;  // maxpool argmax
  std::shared_ptr<std::vector<uint8_t>> mask;     // relu mask
  std::string name;

  bool has_grad_buffer() const { return grad.size() == val.size(); }
  void ensure_grad_buffer() {
    if (!has_grad_buffer()) grad = Tensor<S>::zeros_like(val);
  }
  void zero_grad() {
    if (has_grad_buffer()) std::fill(grad.v.begin(), grad.v.end(), S(0));
  }
};

template <class S>
inline thread_local bool t_recording = false;

template <class S>
struct RecordingGuard {
  bool prev;
  explicit RecordingGuard(bool on) : prev(t_recording<S>) { t_recording<S> = on; }
  ~RecordingGuard() { t_recording<S> = prev; }
};

template <class S>
Var<S> make_leaf(Tensor<S> value, bool requires_grad = false, std::string name = {}) {
  auto n = std::make_shared<Node<S>>();
  n->val = std::move(value);
  n->requires_grad = requires_grad;
  n->id = node_counter()++;
  n->name = std::move(name);
  return n;
}

template <class S>
Var<S> make_op(Tensor<S> value, std::vector<Var<S>> parents, VjpFn<S> vjp) {
  auto n = std::make_shared<Node<S>>();
  n->val = std::move(value);
  n->id = node_counter()++;
  if (t_recording<S>) {
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    if (rg) {
      n->requires_grad = true;
      n->parents = std::move(parents);
      n->vjp = std::move(vjp);
    }
  }
  return n;
}

// ---------------------------------------------------------------- elementwise

template <class S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  if (!(a->val.same_shape(b->val))) throw std::invalid_argument("add: shape mismatch");
  Tensor<S> out = a->val;
  for (size_t i = 0; i < out.size(); ++i) out.v[i] += b->val.v[i];
  return make_op<S>(std::move(out), {a, b},
                    [](const Node<S>&, const Var<S>& g, int) { return g; });
}

template <class S>
Var<S> sub(const Var<S>& a, const Var<S>& b);

template <class S>
Var<S> scale(const Var<S>& a, double c) {
  Tensor<S> out = a->val;
  const S cs = static_cast<S>(c);
  for (auto& x : out.v) x *= cs;
  return make_op<S>(std::move(out), {a},
                    [c](const Node<S>&, const Var<S>& g, int) { return scale(g, c); });
}

template <class S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  if (!(a->val.same_shape(b->val))) throw std::invalid_argument("sub: shape mismatch");
  Tensor<S> out = a->val;
  for (size_t i = 0; i < out.size(); ++i) out.v[i] -= b->val.v[i];
  return make_op<S>(std::move(out), {a, b}, [](const Node<S>&, const Var<S>& g, int pidx) {
    return pidx == 0 ? g : scale(g, -1.0);
  });
}

template <class S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  if (!(a->val.same_shape(b->val))) throw std::invalid_argument("mul: shape mismatch");
  Tensor<S> out = a->val;
  for (size_t i = 0; i < out.size(); ++i) out.v[i] *= b->val.v[i];
  return make_op<S>(std::move(out), {a, b}, [](const Node<S>& self, const Var<S>& g, int pidx) {
    return mul(g, self.parents[pidx == 0 ? 1 : 0]);
  });
}

template <class S>
Var<S> add_scalar(const Var<S>& a, double c) {
  Tensor<S> out = a->val;
  const S cs = static_cast<S>(c);
  for (auto& x : out.v) x += cs;
  return make_op<S>(std::move(out), {a}, [](const Node<S>&, const Var<S>& g, int) { return g; });
}

// x^p with the base floored at a tiny positive value for negative exponents
// (keeps derivative chains finite at zero)
template <class S>
Var<S> upow(const Var<S>& a, double p) {
  constexpr double kFloor = 1e-30;
  Tensor<S> out = a->val;
  for (auto& x : out.v) {
    double b = static_cast<double>(x);
    if (p < 0 && b < kFloor) b = kFloor;
    if (p > 0 && p < 1 && b < 0) b = 0;
    x = static_cast<S>(std::pow(b, p));
  }
  return make_op<S>(std::move(out), {a}, [p](const Node<S>& self, const Var<S>& g, int) {
    return scale(mul(g, upow(self.parents[0], p - 1.0)), p);
  });
}

// ------------------------------------------------------------- broadcast/sum

template <class S>
Var<S> sum_nhw(const Var<S>& x);
template <class S>
Var<S> sum_chw(const Var<S>& x);
template <class S>
Var<S> sum_all(const Var<S>& x);

// (1,C,1,1) -> (n,C,h,w)
template <class S>
Var<S> broadcast_c(const Var<S>& t, int n, int h, int w) {
  const int c = t->val.c();
  if (t->val.n() != 1 || t->val.h() != 1 || t->val.w() != 1)
    throw std::invalid_argument("broadcast_c: expects (1,C,1,1)");
  Tensor<S> out(n, c, h, w);
  const size_t plane = static_cast<size_t>(h) * w;
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < c; ++ci) {
      S vv = t->val.v[ci];
      S* dst = out.data() + (static_cast<size_t>(ni) * c + ci) * plane;
      std::fill(dst, dst + plane, vv);
    }
  return make_op<S>(std::move(out), {t},
                    [](const Node<S>&, const Var<S>& g, int) { return sum_nhw(g); });
}

// (N,1,1,1) -> (N,c,h,w)
template <class S>
Var<S> broadcast_s(const Var<S>& t, int c, int h, int w) {
  const int n = t->val.n();
  if (t->val.c() != 1 || t->val.h() != 1 || t->val.w() != 1)
    throw std::invalid_argument("broadcast_s: expects (N,1,1,1)");
  Tensor<S> out(n, c, h, w);
  const size_t per = static_cast<size_t>(c) * h * w;
  for (int ni = 0; ni < n; ++ni) {
    S vv = t->val.v[ni];
    S* dst = out.data() + ni * per;
    std::fill(dst, dst + per, vv);
  }
  return make_op<S>(std::move(out), {t},
                    [](const Node<S>&, const Var<S>& g, int) { return sum_chw(g); });
}

// (1,1,1,1) -> shape
template <class S>
Var<S> broadcast_all(const Var<S>& t, std::array<int, 4> sh) {
  if (t->val.size() != 1) throw std::invalid_argument("broadcast_all: expects scalar");
  Tensor<S> out(sh[0], sh[1], sh[2], sh[3], t->val.v[0]);
  return make_op<S>(std::move(out), {t},
                    [](const Node<S>&, const Var<S>& g, int) { return sum_all(g); });
}

template <class S>
Var<S> sum_nhw(const Var<S>& x) {
  const auto& t = x->val;
  Tensor<S> out(1, t.c(), 1, 1);
  const size_t plane = static_cast<size_t>(t.h()) * t.w();
  for (int c = 0; c < t.c(); ++c) {
    double acc = 0;
    for (int n = 0; n < t.n(); ++n) {
      const S* p = t.data() + (static_cast<size_t>(n) * t.c() + c) * plane;
      for (size_t i = 0; i < plane; ++i) acc += static_cast<double>(p[i]);
    }
    out.v[c] = static_cast<S>(acc);
  }
  return make_op<S>(std::move(out), {x}, [](const Node<S>& self, const Var<S>& g, int) {
    const auto& s = self.parents[0]->val;
    return broadcast_c(g, s.n(), s.h(), s.w());
  });
}

template <class S>
Var<S> sum_chw(const Var<S>& x) {
  const auto& t = x->val;
  Tensor<S> out(t.n(), 1, 1, 1);
  const size_t per = static_cast<size_t>(t.c()) * t.h() * t.w();
  for (int n = 0; n < t.n(); ++n) {
    double acc = 0;
    const S* p = t.data() + n * per;
    for (size_t i = 0; i < per; ++i) acc += static_cast<double>(p[i]);
    out.v[n] = static_cast<S>(acc);
  }
  return make_op<S>(std::move(out), {x}, [](const Node<S>& self, const Var<S>& g, int) {
    const auto& s = self.parents[0]->val;
    return broadcast_s(g, s.c(), s.h(), s.w());
  });
}

template <class S>
Var<S> sum_all(const Var<S>& x) {
  double acc = 0;
  for (const auto& v : x->val.v) acc += static_cast<double>(v);
  return make_op<S>(Tensor<S>::scalar(static_cast<S>(acc)), {x},
                    [](const Node<S>& self, const Var<S>& g, int) {
                      return broadcast_all(g, self.parents[0]->val.sh);
                    });
}

template <class S>
Var<S> mean_all(const Var<S>& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x->val.size()));
}

// mean over (C,H,W) per sample -> (N,1,1,1)
template <class S>
Var<S> mean_chw(const Var<S>& x) {
  const auto& t = x->val;
  return scale(sum_chw(x), 1.0 / (static_cast<double>(t.c()) * t.h() * t.w()));
}

// mean over (N,H,W) per channel -> (1,C,1,1)
template <class S>
Var<S> mean_nhw(const Var<S>& x) {
  const auto& t = x->val;
  return scale(sum_nhw(x), 1.0 / (static_cast<double>(t.n()) * t.h() * t.w()));
}

// x * t[n] with t (N,1,1,1)
template <class S>
Var<S> mul_sample(const Var<S>& x, const Var<S>& t) {
  if (t->val.n() != x->val.n() || t->val.c() != 1 || t->val.h() != 1 || t->val.w() != 1)
    throw std::invalid_argument("mul_sample: scale must be (N,1,1,1)");
  Tensor<S> out = x->val;
  const size_t per = static_cast<size_t>(out.c()) * out.h() * out.w();
  for (int n = 0; n < out.n(); ++n) {
    S vv = t->val.v[n];
    S* p = out.data() + n * per;
    for (size_t i = 0; i < per; ++i) p[i] *= vv;
  }
  return make_op<S>(std::move(out), {x, t}, [](const Node<S>& self, const Var<S>& g, int pidx) {
    if (pidx == 0) return mul_sample(g, self.parents[1]);
    return sum_chw(mul(g, self.parents[0]));
  });
}

// x * t[c] with t (1,C,1,1)
template <class S>
Var<S> mul_channel(const Var<S>& x, const Var<S>& t) {
  if (t->val.c() != x->val.c() || t->val.n() != 1 || t->val.h() != 1 || t->val.w() != 1)
    throw std::invalid_argument("mul_channel: scale must be (1,C,1,1)");
  Tensor<S> out = x->val;
  const size_t plane = static_cast<size_t>(out.h()) * out.w();
  for (int n = 0; n < out.n(); ++n)
    for (int c = 0; c < out.c(); ++c) {
      S vv = t->val.v[c];
      S* p = out.data() + (static_cast<size_t>(n) * out.c() + c) * plane;
      for (size_t i = 0; i < plane; ++i) p[i] *= vv;
    }
  return make_op<S>(std::move(out), {x, t}, [](const Node<S>& self, const Var<S>& g, int pidx) {
    if (pidx == 0) return mul_channel(g, self.parents[1]);
    return sum_nhw(mul(g, self.parents[0]));
  });
}

// -------------------------------------------------------------- nonlinearity

template <class S>
Var<S> mask_mul(const Var<S>& x, std::shared_ptr<std::vector<uint8_t>> mask) {
  if (mask->size() != x->val.size()) throw std::invalid_argument("mask_mul: mask size mismatch");
  Tensor<S> out = x->val;
  for (size_t i = 0; i < out.size(); ++i)
    if (!(*mask)[i]) out.v[i] = S(0);
  auto node = make_op<S>(std::move(out), {x}, [](const Node<S>& self, const Var<S>& g, int) {
    return mask_mul(g, self.mask);
  });
  node->mask = std::move(mask);
  return node;
}

template <class S>
Var<S> relu(const Var<S>& x) {
  auto mask = std::make_shared<std::vector<uint8_t>>(x->val.size());
  Tensor<S> out = x->val;
  for (size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = out.v[i] > S(0);
    if (!(*mask)[i]) out.v[i] = S(0);
  }
  auto node = make_op<S>(std::move(out), {x}, [](const Node<S>& self, const Var<S>& g, int) {
    return mask_mul(g, self.mask);
  });
  node->mask = std::move(mask);
  return node;
}

// ------------------------------------------------------------------- pooling

template <class S>
Var<S> unpool2(const Var<S>& g, std::shared_ptr<std::vector<int32_t>> idx, std::array<int, 4> in_shape);

template <class S>
Var<S> gather2(const Var<S>& x, std::shared_ptr<std::vector<int32_t>> idx, std::array<int, 4> out_shape) {
  Tensor<S> out(out_shape[0], out_shape[1], out_shape[2], out_shape[3]);
  for (size_t i = 0; i < out.size(); ++i) out.v[i] = x->val.v[(*idx)[i]];
  auto in_shape = x->val.sh;
  auto node = make_op<S>(std::move(out), {x},
                         [in_shape](const Node<S>& self, const Var<S>& g, int) {
                           return unpool2(g, self.indices, in_shape);
                         });
  node->indices = std::move(idx);
  return node;
}

template <class S>
Var<S> unpool2(const Var<S>& g, std::shared_ptr<std::vector<int32_t>> idx, std::array<int, 4> in_shape) {
  Tensor<S> out(in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
  for (size_t i = 0; i < g->val.size(); ++i) out.v[(*idx)[i]] += g->val.v[i];
  auto out_shape = g->val.sh;
  auto node = make_op<S>(std::move(out), {g},
                         [out_shape](const Node<S>& self, const Var<S>& gg, int) {
                           return gather2(gg, self.indices, out_shape);
                         });
  node->indices = std::move(idx);
  return node;
}

// 2x2 max pooling, stride 2; ties resolve to the first maximum in scan order
template <class S>
Var<S> maxpool2(const Var<S>& x) {
  const auto& t = x->val;
  if (t.h() % 2 || t.w() % 2) throw std::invalid_argument("maxpool2: H and W must be even");
  const int oh = t.h() / 2, ow = t.w() / 2;
  Tensor<S> out(t.n(), t.c(), oh, ow);
  auto idx = std::make_shared<std::vector<int32_t>>(out.size());
  size_t o = 0;
  for (int n = 0; n < t.n(); ++n)
    for (int c = 0; c < t.c(); ++c)
      for (int y = 0; y < oh; ++y)
        for (int xw = 0; xw < ow; ++xw) {
          size_t base = t.offset(n, c, 2 * y, 2 * xw);
          size_t cand[4] = {base, base + 1, base + t.w(), base + t.w() + 1};
          size_t best = cand[0];
          for (int k = 1; k < 4; ++k)
            if (t.v[cand[k]] > t.v[best]) best = cand[k];
          out.v[o] = t.v[best];
          (*idx)[o] = static_cast<int32_t>(best);
          ++o;
        }
  auto in_shape = t.sh;
  auto node = make_op<S>(std::move(out), {x},
                         [in_shape](const Node<S>& self, const Var<S>& g, int) {
                           return unpool2(g, self.indices, in_shape);
                         });
  node->indices = std::move(idx);
  return node;
}

// ------------------------------------------------------------------ channels

template <class S>
Var<S> narrow_c(const Var<S>& x, int c0, int len);

// zero-embed len channels at offset c0 within c_total channels
template <class S>
Var<S> pad_c(const Var<S>& x, int c0, int c_total) {
  const auto& t = x->val;
  Tensor<S> out(t.n(), c_total, t.h(), t.w());
  const size_t plane = static_cast<size_t>(t.h()) * t.w();
  for (int n = 0; n < t.n(); ++n)
    for (int c = 0; c < t.c(); ++c)
      std::copy_n(t.data() + (static_cast<size_t>(n) * t.c() + c) * plane, plane,
                  out.data() + (static_cast<size_t>(n) * c_total + c0 + c) * plane);
  int len = t.c();
  return make_op<S>(std::move(out), {x}, [c0, len](const Node<S>&, const Var<S>& g, int) {
    return narrow_c(g, c0, len);
  });
}

template <class S>
Var<S> narrow_c(const Var<S>& x, int c0, int len) {
  const auto& t = x->val;
  if (c0 < 0 || c0 + len > t.c()) throw std::invalid_argument("narrow_c: out of range");
  Tensor<S> out(t.n(), len, t.h(), t.w());
  const size_t plane = static_cast<size_t>(t.h()) * t.w();
  for (int n = 0; n < t.n(); ++n)
    for (int c = 0; c < len; ++c)
      std::copy_n(t.data() + (static_cast<size_t>(n) * t.c() + c0 + c) * plane, plane,
                  out.data() + (static_cast<size_t>(n) * len + c) * plane);
  const int c_total = t.c();
  return make_op<S>(std::move(out), {x}, [c0, c_total](const Node<S>&, const Var<S>& g, int) {
    return pad_c(g, c0, c_total);
  });
}

template <class S>
Var<S> concat_c(const Var<S>& a, const Var<S>& b) {
  const auto& ta = a->val;
  const auto& tb = b->val;
  if (ta.n() != tb.n() || ta.h() != tb.h() || ta.w() != tb.w())
    throw std::invalid_argument("concat_c: shape mismatch");
  Tensor<S> out(ta.n(), ta.c() + tb.c(), ta.h(), ta.w());
  const size_t plane = static_cast<size_t>(ta.h()) * ta.w();
  for (int n = 0; n < ta.n(); ++n) {
    std::copy_n(ta.data() + static_cast<size_t>(n) * ta.c() * plane, ta.c() * plane,
                out.data() + static_cast<size_t>(n) * out.c() * plane);
    std::copy_n(tb.data() + static_cast<size_t>(n) * tb.c() * plane, tb.c() * plane,
                out.data() + (static_cast<size_t>(n) * out.c() + ta.c()) * plane);
  }
  const int ca = ta.c(), cb = tb.c();
  return make_op<S>(std::move(out), {a, b}, [ca, cb](const Node<S>&, const Var<S>& g, int pidx) {
    return pidx == 0 ? narrow_c(g, 0, ca) : narrow_c(g, ca, cb);
  });
}

// --------------------------------------------------------------- convolution

template <class S>
Var<S> conv_bwd_input_op(const Var<S>& g, const Var<S>& w, const ConvGeom& geom);
template <class S>
Var<S> conv_bwd_weight_op(const Var<S>& x, const Var<S>& g, const ConvGeom& geom);

template <class S>
Var<S> conv_fwd_op(const Var<S>& x, const Var<S>& w, const ConvGeom& geom) {
  return make_op<S>(conv_fwd_kernel(x->val, w->val, geom), {x, w},
                    [geom](const Node<S>& self, const Var<S>& g, int pidx) {
                      if (pidx == 0) return conv_bwd_input_op(g, self.parents[1], geom);
                      return conv_bwd_weight_op(self.parents[0], g, geom);
                    });
}

template <class S>
Var<S> conv_bwd_input_op(const Var<S>& g, const Var<S>& w, const ConvGeom& geom) {
  return make_op<S>(conv_bwd_input_kernel(g->val, w->val, geom), {g, w},
                    [geom](const Node<S>& self, const Var<S>& gg, int pidx) {
                      if (pidx == 0) return conv_fwd_op(gg, self.parents[1], geom);
                      return conv_bwd_weight_op(gg, self.parents[0], geom);
                    });
}

template <class S>
Var<S> conv_bwd_weight_op(const Var<S>& x, const Var<S>& g, const ConvGeom& geom) {
  return make_op<S>(conv_bwd_weight_kernel(x->val, g->val, geom), {x, g},
                    [geom](const Node<S>& self, const Var<S>& gg, int pidx) {
                      if (pidx == 0) return conv_bwd_input_op(self.parents[1], gg, geom);
                      return conv_fwd_op(self.parents[0], gg, geom);
                    });
}

// per-channel bias over spatial maps; b is (1,C,1,1)
template <class S>
Var<S> bias_add(const Var<S>& x, const Var<S>& b) {
  if (b->val.c() != x->val.c() || b->val.n() != 1) throw std::invalid_argument("bias_add: bad bias shape");
  Tensor<S> out = x->val;
  const size_t plane = static_cast<size_t>(out.h()) * out.w();
  for (int n = 0; n < out.n(); ++n)
    for (int c = 0; c < out.c(); ++c) {
      S vv = b->val.v[c];
      S* p = out.data() + (static_cast<size_t>(n) * out.c() + c) * plane;
      for (size_t i = 0; i < plane; ++i) p[i] += vv;
    }
  return make_op<S>(std::move(out), {x, b}, [](const Node<S>&, const Var<S>& g, int pidx) {
    if (pidx == 0) return g;
    return sum_nhw(g);
  });
}

// ------------------------------------------------------------------ backward

template <class S>
using GradMap = std::unordered_map<const Node<S>*, Var<S>>;

// Reverse sweep from `root` restricted to nodes that lead to one of
// `targets`. With create_graph the VJPs are recorded, producing
// differentiable gradients; without it they are plain computations.
template <class S>
GradMap<S> backward(const Var<S>& root, const std::vector<Var<S>>& targets, bool create_graph,
                    const Tensor<S>* seed = nullptr) {
  std::unordered_set<const Node<S>*> target_set;
  for (const auto& t : targets) target_set.insert(t.get());

  // post-order mark: does this node's ancestry contain a target?
  std::unordered_map<const Node<S>*, bool> leads;
  {
    std::vector<std::pair<Node<S>*, bool>> stack{{root.get(), false}};
    while (!stack.empty()) {
      auto [n, processed] = stack.back();
      stack.pop_back();
      if (processed) {
        bool l = target_set.count(n) > 0;
        for (const auto& p : n->parents)
          if (p->requires_grad) l = l || leads[p.get()];
        leads[n] = l;
        continue;
      }
      if (leads.count(n)) continue;
      stack.push_back({n, true});
      for (const auto& p : n->parents)
        if (p->requires_grad && !leads.count(p.get())) stack.push_back({p.get(), false});
    }
  }

  // collect active nodes (reachable from root and leading to a target)
  std::vector<Node<S>*> order;
  {
    std::unordered_set<const Node<S>*> seen;
    std::vector<Node<S>*> stack{root.get()};
    while (!stack.empty()) {
      Node<S>* n = stack.back();
      stack.pop_back();
      if (seen.count(n)) continue;
      seen.insert(n);
      auto it = leads.find(n);
      if (it == leads.end() || !it->second) continue;
      order.push_back(n);
      for (const auto& p : n->parents)
        if (p->requires_grad) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(), [](const Node<S>* a, const Node<S>* b) { return a->id > b->id; });

  GradMap<S> gmap;
  if (order.empty()) return gmap;

  RecordingGuard<S> rec(create_graph);
  Tensor<S> seed_t = seed ? *seed : Tensor<S>(root->val.sh[0], root->val.sh[1], root->val.sh[2], root->val.sh[3], S(1));
  gmap[root.get()] = make_leaf<S>(std::move(seed_t));

  for (Node<S>* n : order) {
    auto git = gmap.find(n);
    if (git == gmap.end()) continue;  // unreachable seed-wise
    const Var<S>& g = git->second;
    if (!n->vjp) continue;  // leaf
    for (int pidx = 0; pidx < static_cast<int>(n->parents.size()); ++pidx) {
      Node<S>* p = n->parents[pidx].get();
      if (!p->requires_grad) continue;
      auto lit = leads.find(p);
      if (lit == leads.end() || !lit->second) continue;
      Var<S> contrib = n->vjp(*n, g, pidx);
      auto it = gmap.find(p);
      if (it == gmap.end())
        gmap[p] = contrib;
      else
        it->second = add(it->second, contrib);
    }
  }
  return gmap;
}

// numeric gradients accumulated into the params' grad buffers
template <class S>
void accumulate_grads(const Var<S>& loss, const std::vector<Var<S>>& params) {
  GradMap<S> g = backward(loss, params, /*create_graph=*/false);
  for (const auto& p : params) {
    auto it = g.find(p.get());
    if (it == g.end()) continue;
    p->ensure_grad_buffer();
    const auto& gv = it->second->val;
    for (size_t i = 0; i < gv.size(); ++i) p->grad.v[i] += gv.v[i];
  }
}

// gradient of a scalar `out` with respect to `input`; with create_graph the
// result is itself differentiable
template <class S>
Var<S> grad_of(const Var<S>& out, const Var<S>& input, bool create_graph) {
  GradMap<S> g = backward(out, {input}, create_graph);
  auto it = g.find(input.get());
  if (it == g.end()) {
    RecordingGuard<S> rec(false);
    return make_leaf<S>(Tensor<S>::zeros_like(input->val));
  }
  return it->second;
}

template <class S>
void zero_grads(const std::vector<Var<S>>& params) {
  for (const auto& p : params) p->zero_grad();
}

}  // namespace deltamap::ad
