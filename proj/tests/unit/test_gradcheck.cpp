#include <gtest/gtest.h>

#include "grad_cases.hpp"

TEST(GradCheck, AllBlocksMatchFiniteDifferences) {
  for (const oracle::GradCase& c : oracle::run_grad_cases()) {
    EXPECT_LT(c.result.max_rel_err, 1e-3) << c.name << " worst " << c.result.worst;
    EXPECT_GT(c.result.checked, 0u) << c.name;
  }
}

TEST(GradCheck, OracleCatchesAWrongGradient) {
  using namespace skelfont;
  Var<double> a(Tensor<double>({3}, {0.3, -0.7, 1.2}), true);
  // Forward computes a^2 but the recorded backward pretends it is a.
  auto broken = [&] {
    Tensor<double> v = a.value();
    for (double& e : v.values()) e = e * e;
    return ops::sum(Var<double>::make(std::move(v), {a}, [a](Node<double>& n) mutable {
      for (std::size_t i = 0; i < n.value.size(); ++i) a.mutable_grad()[i] += n.grad[i];
    }));
  };
  EXPECT_GT(oracle::grad_check(broken, {{"a", a}}).max_rel_err, 0.1);
}
