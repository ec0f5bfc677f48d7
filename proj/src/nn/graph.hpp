#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "core/rng.hpp"
#include "nn/ops.hpp"

namespace pipofan::nn {

// Named parameter registry. Running statistics live here as non-trainable
// entries so checkpointing covers them without a side channel.
template <class T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    bool trainable = true;
  };

  int add(const std::string& name, std::vector<int64_t> shape, bool trainable = true) {
    if (by_name_.count(name)) throw InvalidArgumentError("duplicate parameter: " + name);
    int id = static_cast<int>(entries_.size());
    entries_.push_back({name, Tensor<T>(std::move(shape)), Tensor<T>(), trainable});
    by_name_.emplace(name, id);
    return id;
  }

  Entry& operator[](int id) { return entries_[static_cast<size_t>(id)]; }
  const Entry& operator[](int id) const { return entries_[static_cast<size_t>(id)]; }
  int find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? -1 : it->second;
  }
  size_t size() const { return entries_.size(); }

  void zero_grad() {
    for (auto& e : entries_) {
      e.grad.resize(e.value.shape());
      e.grad.fill(T(0));
    }
  }

  int64_t trainable_count() const {
    int64_t n = 0;
    for (const auto& e : entries_)
      if (e.trainable) n += e.value.numel();
    return n;
  }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> by_name_;
};

enum class OpKind : uint8_t { input, conv, bn, relu, avgpool2, upsample2, add, concat };

// Static feed-forward DAG executor. Nodes are appended in topological order;
// backward walks them in reverse and accumulates into shared inputs, so
// multi-consumer outputs (skip connections) need no special casing.
template <class T>
class LayerGraph {
 public:
  explicit LayerGraph(ParamStore<T>& params) : params_(params) {}

  int add_input() { return push({OpKind::input}); }

  int add_conv(int src, int64_t in_ch, int64_t out_ch, int k, bool bias,
               const std::string& name) {
    NodeSpec s{OpKind::conv};
    s.in0 = src;
    s.weight = params_.add(name + ".weight", {out_ch, in_ch, k, k});
    if (bias) s.bias = params_.add(name + ".bias", {out_ch});
    return push(s);
  }

  int add_bn(int src, int64_t ch, const std::string& name) {
    NodeSpec s{OpKind::bn};
    s.in0 = src;
    s.gamma = params_.add(name + ".gamma", {ch});
    s.beta = params_.add(name + ".beta", {ch});
    s.rmean = params_.add(name + ".running_mean", {ch}, /*trainable=*/false);
    s.rvar = params_.add(name + ".running_var", {ch}, /*trainable=*/false);
    params_[s.gamma].value.fill(T(1));
    params_[s.rvar].value.fill(T(1));
    return push(s);
  }

  int add_relu(int src) { return push({OpKind::relu, src}); }
  int add_avgpool2(int src) { return push({OpKind::avgpool2, src}); }
  int add_upsample2(int src) { return push({OpKind::upsample2, src}); }
  int add_add(int a, int b) { return push({OpKind::add, a, b}); }
  int add_concat(int a, int b) { return push({OpKind::concat, a, b}); }

  size_t node_count() const { return nodes_.size(); }
  const Tensor<T>& value(int id) const { return values_[static_cast<size_t>(id)]; }
  Tensor<T>& grad(int id) { return grads_[static_cast<size_t>(id)]; }

  void set_input(int id, Tensor<T> v) { values_[static_cast<size_t>(id)] = std::move(v); }

  void forward(bool training) {
    training_ = training;
    for (size_t i = 0; i < nodes_.size(); ++i) run_forward(static_cast<int>(i));
  }

  // Seeds are (node id, dL/d output). Parameter gradients accumulate into the
  // store; call ParamStore::zero_grad between steps.
  void backward(const std::vector<std::pair<int, const Tensor<T>*>>& seeds) {
    grads_.resize(nodes_.size());
    for (size_t i = 0; i < nodes_.size(); ++i) {
      grads_[i].resize(values_[i].shape());
      grads_[i].fill(T(0));
    }
    for (auto& [id, g] : seeds) {
      Tensor<T>& dst = grads_[static_cast<size_t>(id)];
      for (int64_t i = 0; i < dst.numel(); ++i) dst[i] += (*g)[i];
    }
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) run_backward(i);
  }

 private:
  struct NodeSpec {
    OpKind kind;
    int in0 = -1, in1 = -1;
    int weight = -1, bias = -1;
    int gamma = -1, beta = -1, rmean = -1, rvar = -1;
    std::vector<T> bn_mean, bn_invstd;
  };

  int push(NodeSpec s) {
    nodes_.push_back(std::move(s));
    values_.emplace_back();
    return static_cast<int>(nodes_.size()) - 1;
  }

  void run_forward(int id) {
    NodeSpec& s = nodes_[static_cast<size_t>(id)];
    Tensor<T>& out = values_[static_cast<size_t>(id)];
    auto& in0 = values_[static_cast<size_t>(s.in0 >= 0 ? s.in0 : 0)];
    switch (s.kind) {
      case OpKind::input:
        break;
      case OpKind::conv:
        conv2d_forward(in0, params_[s.weight].value,
                       s.bias >= 0 ? &params_[s.bias].value : nullptr, out, col_);
        break;
      case OpKind::bn:
        batchnorm_forward(in0, params_[s.gamma].value, params_[s.beta].value,
                          params_[s.rmean].value, params_[s.rvar].value, out, training_,
                          s.bn_mean, s.bn_invstd);
        break;
      case OpKind::relu:
        relu_forward(in0, out);
        break;
      case OpKind::avgpool2:
        avgpool2_forward(in0, out);
        break;
      case OpKind::upsample2:
        bilinear_resize_forward(in0, in0.size(2) * 2, in0.size(3) * 2, out);
        break;
      case OpKind::add:
        add_forward(in0, values_[static_cast<size_t>(s.in1)], out);
        break;
      case OpKind::concat:
        concat_channels_forward(in0, values_[static_cast<size_t>(s.in1)], out);
        break;
    }
  }

  void run_backward(int id) {
    NodeSpec& s = nodes_[static_cast<size_t>(id)];
    Tensor<T>& dy = grads_[static_cast<size_t>(id)];
    switch (s.kind) {
      case OpKind::input:
        break;
      case OpKind::conv:
        conv2d_backward(values_[static_cast<size_t>(s.in0)], params_[s.weight].value, dy,
                        &grads_[static_cast<size_t>(s.in0)], &params_[s.weight].grad,
                        s.bias >= 0 ? &params_[s.bias].grad : nullptr, col_);
        break;
      case OpKind::bn:
        batchnorm_backward(values_[static_cast<size_t>(s.in0)], params_[s.gamma].value, dy,
                           s.bn_mean, s.bn_invstd, training_,
                           &grads_[static_cast<size_t>(s.in0)], &params_[s.gamma].grad,
                           &params_[s.beta].grad);
        break;
      case OpKind::relu:
        relu_backward(values_[static_cast<size_t>(id)], dy, grads_[static_cast<size_t>(s.in0)]);
        break;
      case OpKind::avgpool2:
        avgpool2_backward(dy, grads_[static_cast<size_t>(s.in0)]);
        break;
      case OpKind::upsample2:
        bilinear_resize_backward(dy, grads_[static_cast<size_t>(s.in0)]);
        break;
      case OpKind::add:
        for (int64_t i = 0; i < dy.numel(); ++i) {
          grads_[static_cast<size_t>(s.in0)][i] += dy[i];
          grads_[static_cast<size_t>(s.in1)][i] += dy[i];
        }
        break;
      case OpKind::concat:
        concat_channels_backward(dy, grads_[static_cast<size_t>(s.in0)],
                                 grads_[static_cast<size_t>(s.in1)]);
        break;
    }
  }

  ParamStore<T>& params_;
  std::vector<NodeSpec> nodes_;
  std::vector<Tensor<T>> values_;
  std::vector<Tensor<T>> grads_;
  std::vector<T> col_;
  bool training_ = false;
};

// He fan-in initialization for conv weights; biases start at zero.
template <class T>
void init_conv_weight(Tensor<T>& w, Rng& rng) {
  int64_t fan_in = w.size(1) * w.size(2) * w.size(3);
  double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = static_cast<T>(rng.normal() * std);
}

}  // namespace pipofan::nn
