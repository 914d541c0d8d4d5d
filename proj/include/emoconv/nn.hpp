#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "emoconv/autograd.hpp"

namespace emoconv::nn {

struct NamedParam {
  std::string name;
  ad::Var var;
};
using ParamList = std::vector<NamedParam>;

using Rng = std::mt19937_64;

// Zero-mean normal weights with std = gain / sqrt(fan_in).
Tensor normal_init(const Shape& shape, std::size_t fan_in, double gain, Rng& rng);

struct Conv1d {
  ad::Var weight;  // [Cout, Cin/groups, K]
  ad::Var bias;    // [Cout]
  ad::Conv1dSpec spec;

  static Conv1d make(std::size_t cin, std::size_t cout, std::size_t kernel, ad::Conv1dSpec spec, Rng& rng,
                     double gain = 1.0);
  // "same" padding for odd kernels at stride 1.
  static ad::Conv1dSpec same(std::size_t kernel, std::size_t dilation = 1);

  ad::Var operator()(const ad::Var& x) const { return ad::conv1d(x, weight, bias, spec); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct ConvTranspose1d {
  ad::Var weight;  // [Cin, Cout, K]
  ad::Var bias;    // [Cout]
  std::size_t stride = 1;
  std::size_t crop_left = 0;

  static ConvTranspose1d make(std::size_t cin, std::size_t cout, std::size_t kernel, std::size_t stride,
                              Rng& rng, double gain = 1.0);
  // Output length is exactly len * stride.
  ad::Var operator()(const ad::Var& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

struct Linear {
  ad::Var weight;  // [Dout, Din]
  ad::Var bias;    // [Dout]

  static Linear make(std::size_t din, std::size_t dout, Rng& rng, double gain = 1.0);
  ad::Var operator()(const ad::Var& x) const { return ad::linear(x, weight, bias); }
  void collect(const std::string& prefix, ParamList& out) const;
};

// Copies values by name from `src` into `dst`; every name and shape must match.
void assign_params(const ParamList& dst, const ParamList& src);
ParamList clone_params(const ParamList& params);
std::size_t count_params(const ParamList& params);

}  // namespace emoconv::nn
