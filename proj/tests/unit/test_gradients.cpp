#include <catch_amalgamated.hpp>

#include "emoconv/autograd.hpp"
#include "gradient_suite.hpp"
#include "oracles.hpp"

using namespace emoconv;

TEST_CASE("every loss and the emotion embedder pass finite-difference checks", "[gradients]") {
  const auto checks = oracle::gradient_suite();
  REQUIRE(checks.size() >= 12);
  for (const auto& c : checks) {
    INFO(c.name << ": " << c.result.detail);
    CHECK(c.result.checked > 0);
    CHECK(c.result.worst_ratio <= 1.0);
  }
}

TEST_CASE("primitive ops match finite differences", "[gradients]") {
  oracle::Rng rng(3);
  ad::Var x = ad::parameter(oracle::randn_tensor({2, 3, 9}, rng));
  ad::Var w = ad::parameter(oracle::randn_tensor({4, 3, 3}, rng));
  ad::Var b = ad::parameter(oracle::randn_tensor({4}, rng));
  ad::Var wt = ad::parameter(oracle::randn_tensor({3, 2, 4}, rng));
  const Tensor target = oracle::randn_tensor({2, 4, 5}, rng);
  const std::vector<std::size_t> all_x = oracle::spread_coords(x.size(), x.size(), rng);

  auto conv = [&] {
    ad::Conv1dSpec s;
    s.stride = 2;
    s.dilation = 1;
    s.pad_left = 1;
    s.pad_right = 1;
    return ad::l1_distance(ad::conv1d(x, w, b, s), ad::constant(target));
  };
  CHECK(oracle::grad_check(x, conv, all_x).worst_ratio <= 1.0);
  CHECK(oracle::grad_check(w, conv, oracle::spread_coords(w.size(), w.size(), rng)).worst_ratio <= 1.0);
  CHECK(oracle::grad_check(b, conv, oracle::spread_coords(4, 4, rng)).worst_ratio <= 1.0);

  auto tconv = [&] { return ad::sum_sq_dev(ad::tanh(ad::conv_transpose1d(x, wt, ad::Var{}, 2, 1, 18)), 0.3); };
  CHECK(oracle::grad_check(x, tconv, all_x).worst_ratio <= 1.0);
  CHECK(oracle::grad_check(wt, tconv, oracle::spread_coords(wt.size(), wt.size(), rng)).worst_ratio <= 1.0);

  auto pool = [&] { return ad::sum_sq_dev(ad::avg_pool1d(ad::leaky_relu(x, 0.1), 4, 2, 2), -0.2); };
  CHECK(oracle::grad_check(x, pool, all_x).worst_ratio <= 1.0);

  auto fold = [&] { return ad::sum_sq_dev(ad::sigmoid(ad::fold_period(x, 4)), 0.5); };
  CHECK(oracle::grad_check(x, fold, all_x).worst_ratio <= 1.0);

  ad::Var y = ad::parameter(oracle::randn_tensor({7}, rng));
  ad::Var z = ad::parameter(oracle::randn_tensor({7}, rng));
  auto c = [&] { return ad::ccc(y, z); };
  CHECK(oracle::grad_check(y, c, oracle::spread_coords(7, 7, rng)).worst_ratio <= 1.0);
  CHECK(oracle::grad_check(z, c, oracle::spread_coords(7, 7, rng)).worst_ratio <= 1.0);
}

TEST_CASE("no-grad guard stops graph recording", "[gradients]") {
  ad::Var p = ad::parameter(Tensor({3}, 1.0));
  {
    ad::NoGradGuard g;
    CHECK_FALSE(ad::grad_enabled());
    CHECK_FALSE(ad::scale(p, 2.0).requires_grad());
  }
  CHECK(ad::grad_enabled());
  CHECK(ad::scale(p, 2.0).requires_grad());
  CHECK_FALSE(p.detach().requires_grad());
}
