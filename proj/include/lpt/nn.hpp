#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lpt/autodiff.hpp"
#include "lpt/rng.hpp"
#include "lpt/tensor.hpp"

namespace lpt {

// Named, insertion-ordered parameter tensors. Name prefixes mark the
// component: "alpha." prior transform, "gen." trajectory generator,
// "ret." return predictor. Order is the canonical serialization and
// gradient-reduction order.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw std::logic_error("ParamStore: duplicate " + name);
    index_[name] = items_.size();
    items_.emplace_back(name, std::move(t));
    return items_.back().second;
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  Tensor& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamStore: missing " + name);
    return items_[it->second].second;
  }
  const Tensor& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamStore: missing " + name);
    return items_[it->second].second;
  }

  std::size_t count() const { return items_.size(); }
  std::size_t total_values() const {
    std::size_t n = 0;
    for (const auto& [k, v] : items_) n += v.size();
    return n;
  }

  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::vector<std::pair<std::string, Tensor>>& items() { return items_; }

  // Same names and shapes, all zeros. Gradient accumulators start here.
  ParamStore zeros_like() const {
    ParamStore out;
    for (const auto& [k, v] : items_) out.add(k, Tensor(v.rows(), v.cols()));
    return out;
  }

  void axpy(const ParamStore& other, double c) {
    if (other.count() != count()) throw std::logic_error("ParamStore::axpy: mismatch");
    for (std::size_t i = 0; i < items_.size(); ++i) {
      auto& dst = items_[i].second;
      const auto& src = other.items_[i].second;
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += c * src[j];
    }
  }

  void scale(double c) {
    for (auto& [k, v] : items_)
      for (auto& x : v.vec()) x *= c;
  }

  double global_norm() const {
    double s = 0.0;
    for (const auto& [k, v] : items_)
      for (double x : v.vec()) s += x * x;
    return std::sqrt(s);
  }

  // First parameter name holding a non-finite value, or empty string.
  std::string first_nonfinite() const {
    for (const auto& [k, v] : items_)
      for (double x : v.vec())
        if (!std::isfinite(x)) return k;
    return {};
  }

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Binds parameters to a tape as leaves, once each, and collects their
// gradients after backward. trainable=false freezes every parameter leaf,
// which prunes the backward pass down to the latent path (Langevin mode).
class Binder {
 public:
  Binder(ad::Tape& tape, const ParamStore& params, bool trainable)
      : tape_(&tape), params_(&params), trainable_(trainable) {}

  ad::Var operator[](const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return ad::Var{tape_, it->second};
    ad::Var v = tape_->leaf(params_->at(name), trainable_);
    bound_[name] = v.id;
    return v;
  }

  bool trainable() const { return trainable_; }

  // Full-shape gradient store; parameters never touched by the graph (or
  // never reached by backward) contribute zeros.
  ParamStore collect_grads() const {
    ParamStore out = params_->zeros_like();
    for (const auto& [name, id] : bound_) {
      const auto& node = tape_->node(id);
      if (node.grad_live) out.at(name) = node.grad;
    }
    return out;
  }

 private:
  ad::Tape* tape_;
  const ParamStore* params_;
  bool trainable_;
  std::unordered_map<std::string, int> bound_;
};

// ---- initializers ----

inline void init_linear(ParamStore& ps, const std::string& prefix, std::size_t in,
                        std::size_t out, RngStream& rng, bool zero = false) {
  if (zero) {
    ps.add(prefix + ".w", Tensor(in, out));
  } else {
    ps.add(prefix + ".w", Tensor::randn(in, out, rng, 1.0 / std::sqrt(double(in))));
  }
  ps.add(prefix + ".b", Tensor(1, out));
}

inline void init_layernorm(ParamStore& ps, const std::string& prefix, std::size_t dim) {
  ps.add(prefix + ".g", Tensor(1, dim, 1.0));
  ps.add(prefix + ".b", Tensor(1, dim));
}

// Conv weight layout: (out_ch x in_ch*k).
inline void init_conv(ParamStore& ps, const std::string& prefix, std::size_t in_ch,
                      std::size_t out_ch, std::size_t k, RngStream& rng,
                      bool zero = false) {
  if (zero) {
    ps.add(prefix + ".w", Tensor(out_ch, in_ch * k));
  } else {
    ps.add(prefix + ".w", Tensor::randn(out_ch, in_ch * k, rng,
                                        1.0 / std::sqrt(double(in_ch * k))));
  }
  ps.add(prefix + ".b", Tensor(1, out_ch));
}

// ---- layer applications ----

inline ad::Var linear(Binder& p, const std::string& prefix, ad::Var x) {
  return ad::add_rowvec(ad::matmul(x, p[prefix + ".w"]), p[prefix + ".b"]);
}

inline ad::Var layer_norm(Binder& p, const std::string& prefix, ad::Var x) {
  return ad::layernorm_rows(x, p[prefix + ".g"], p[prefix + ".b"]);
}

inline ad::Var conv(Binder& p, const std::string& prefix, ad::Var x, std::size_t k,
                    std::size_t stride, std::size_t pad) {
  return ad::conv1d(x, p[prefix + ".w"], p[prefix + ".b"], k, stride, pad);
}

}  // namespace lpt
