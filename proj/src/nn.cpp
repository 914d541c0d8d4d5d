#include "emoconv/nn.hpp"

#include <cmath>
#include <map>

#include "emoconv/errors.hpp"

namespace emoconv::nn {

Tensor normal_init(const Shape& shape, std::size_t fan_in, double gain, Rng& rng) {
  const double std = gain / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::normal_distribution<double> dist(0.0, std);
  Tensor t(shape, 0.0);
  for (auto& v : t.vec()) v = dist(rng);
  return t;
}

Conv1d Conv1d::make(std::size_t cin, std::size_t cout, std::size_t kernel, ad::Conv1dSpec spec, Rng& rng,
                    double gain) {
  if (cin % spec.groups != 0 || cout % spec.groups != 0) {
    throw ContractError("Conv1d: channels must be divisible by groups");
  }
  Conv1d c;
  const std::size_t cin_g = cin / spec.groups;
  c.weight = ad::parameter(normal_init({cout, cin_g, kernel}, cin_g * kernel, gain, rng));
  c.bias = ad::parameter(Tensor(Shape{cout}, 0.0));
  c.spec = spec;
  return c;
}

ad::Conv1dSpec Conv1d::same(std::size_t kernel, std::size_t dilation) {
  ad::Conv1dSpec s;
  s.dilation = dilation;
  s.pad_left = s.pad_right = dilation * (kernel - 1) / 2;
  return s;
}

void Conv1d::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

ConvTranspose1d ConvTranspose1d::make(std::size_t cin, std::size_t cout, std::size_t kernel, std::size_t stride,
                                      Rng& rng, double gain) {
  if (kernel < stride) throw ContractError("ConvTranspose1d: kernel must be at least the stride");
  ConvTranspose1d c;
  // Each output sample receives about cin * kernel / stride contributions.
  const std::size_t fan_in = std::max<std::size_t>(1, cin * kernel / stride);
  c.weight = ad::parameter(normal_init({cin, cout, kernel}, fan_in, gain, rng));
  c.bias = ad::parameter(Tensor(Shape{cout}, 0.0));
  c.stride = stride;
  c.crop_left = (kernel - stride) / 2;
  return c;
}

ad::Var ConvTranspose1d::operator()(const ad::Var& x) const {
  return ad::conv_transpose1d(x, weight, bias, stride, crop_left, x.shape()[2] * stride);
}

void ConvTranspose1d::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Linear Linear::make(std::size_t din, std::size_t dout, Rng& rng, double gain) {
  Linear l;
  l.weight = ad::parameter(normal_init({dout, din}, din, gain, rng));
  l.bias = ad::parameter(Tensor(Shape{dout}, 0.0));
  return l;
}

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

void assign_params(const ParamList& dst, const ParamList& src) {
  std::map<std::string, const ad::Var*> by_name;
  for (const auto& p : src) by_name[p.name] = &p.var;
  if (by_name.size() != dst.size()) {
    throw ConfigError("parameter count mismatch: expected " + std::to_string(dst.size()) + ", got " +
                      std::to_string(by_name.size()));
  }
  for (const auto& p : dst) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw ConfigError("missing parameter '" + p.name + "'");
    if (it->second->shape() != p.var.shape()) {
      throw ConfigError("parameter '" + p.name + "' shape " + shape_str(it->second->shape()) + " != " +
                        shape_str(p.var.shape()));
    }
    ad::Var handle = p.var;
    handle.mutable_value() = it->second->value();
  }
}

ParamList clone_params(const ParamList& params) {
  ParamList out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back({p.name, ad::constant(p.var.value())});
  return out;
}

std::size_t count_params(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.var.size();
  return n;
}

}  // namespace emoconv::nn
