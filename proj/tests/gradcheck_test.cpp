#include <gtest/gtest.h>

#include <set>

#include "op_registry.hpp"

using namespace megadance;
using megadance::testing::check_op;
using megadance::testing::differentiable_ops;

namespace {

class OpGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(OpGradient, TenSeedsAgreeWithCentralDifferences) {
  const auto op = differentiable_ops()[GetParam()];
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = check_op(op, seed);
    EXPECT_GT(r.checked, 0u);
    EXPECT_LT(r.max_rel_error, 1e-4) << op.name << " seed " << seed << " abs " << r.max_abs_error;
  }
}

INSTANTIATE_TEST_SUITE_P(Registry, OpGradient, ::testing::Range<std::size_t>(0, differentiable_ops().size()),
                         [](const ::testing::TestParamInfo<std::size_t>& info) {
                           return differentiable_ops()[info.param].name;
                         });

TEST(OpRegistry, NamesAreUnique) {
  std::set<std::string> names;
  for (const auto& op : differentiable_ops()) EXPECT_TRUE(names.insert(op.name).second) << op.name;
}

// The straight-through op must not match its own (piecewise constant) forward.
TEST(OpRegistry, StraightThroughDiffersFromStepFunction) {
  for (const auto& op : differentiable_ops()) {
    if (!op.reference) continue;
    Rng rng(3);
    const auto r = megadance::testing::gradcheck(op.fn, op.inputs(rng), 3);
    EXPECT_GT(r.max_rel_error, 0.5) << op.name;
  }
}

}  // namespace
