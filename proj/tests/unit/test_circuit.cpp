#include <gtest/gtest.h>

#include <filesystem>
#include <iostream>

#include "circuit_checks.hpp"
#include "pql3/circuit/executor.hpp"
#include "pql3/circuit/plan_cache.hpp"
#include "pql3/common/error.hpp"

using namespace pql3;
using namespace pql3::circuit;

namespace {

fhe::KeyMaterial& micro_keys() {
  static fhe::KeyMaterial km = fhe::keygen(fhe::CryptoParams::micro(2, 3, 31));
  return km;
}

Graph one_product() {
  Graph g;
  g.begin_segment(0, 0);
  NodeId a = g.input(0, 3, {});
  NodeId b = g.input(-2, 1, {});
  g.output(g.ct_mult(a, b, {}));
  return g;
}

}  // namespace

TEST(Placement, ChainJustBelowBudgetNeedsNoRefresh) {
  auto p = fhe::CryptoParams::micro();
  int k = checks::refresh_free_depth(p);
  ASSERT_GT(k, 0);
  auto plan = compile(checks::doubling_chain(k), p, 1);
  EXPECT_EQ(plan.refresh_count(), 0u);
  EXPECT_EQ(plan.pbs_count(), 0u);
}

TEST(Placement, OneMoreAddNeedsExactlyOneRefresh) {
  auto p = fhe::CryptoParams::micro();
  int k = checks::refresh_free_depth(p);
  auto plan = compile(checks::doubling_chain(k + 1), p, 1);
  EXPECT_EQ(plan.refresh_count(), 1u);
  EXPECT_EQ(plan.pbs_count(), 1u);
  for (const auto& n : plan.nodes) EXPECT_LT(n.noise, p.decrypt_budget());
}

TEST(Placement, RefreshedChainDecryptsUnderEncryption) {
  auto& km = micro_keys();
  const auto& p = km.client.params();
  auto plan = compile(checks::doubling_chain(checks::refresh_free_depth(p) + 3), p, 1);
  fhe::BlindRotatePbs engine(km.server);
  CipherExecutor ex(plan, CipherBackend(plan, engine));
  ex.set_input(plan.segments[0].inputs[0], km.client.encrypt(0, p.total_bits()));
  ex.run_segment(0);
  EXPECT_EQ(km.client.decrypt(ex.value(plan.segments[0].outputs[0])), 0u);
  EXPECT_EQ(engine.count(), plan.pbs_count());
}

TEST(Placement, AbsurdWeightIsUncompilable) {
  Graph g;
  g.begin_segment(0, 0);
  NodeId x = g.input(0, 0, {});
  g.output(g.linear({x}, {std::int64_t{1} << 30}, 0, {}));
  EXPECT_THROW(compile(g, fhe::CryptoParams::micro(), 1), CompileError);
}

TEST(Placement, RangeWiderThanModulusIsUncompilable) {
  Graph g;
  g.begin_segment(0, 0);
  NodeId x = g.input(0, 15, {});
  g.output(g.linear({x}, {3}, 0, {}));
  EXPECT_THROW(compile(g, fhe::CryptoParams::micro(), 1), CompileError);
}

TEST(StaticCount, EmptyPlanIsZero) {
  auto plan = compile(Graph{}, fhe::CryptoParams::micro(), 1);
  EXPECT_EQ(static_pbs_count(plan), 0u);
  EXPECT_TRUE(plan.nodes.empty());
}

TEST(StaticCount, OneProductIsTwo) {
  auto plan = compile(one_product(), fhe::CryptoParams::micro(), 1);
  EXPECT_EQ(static_pbs_count(plan), 2u);
  EXPECT_EQ(plan.refresh_count(), 0u);
}

TEST(StaticCount, DeadNodesAreRemoved) {
  Graph g;
  g.begin_segment(0, 0);
  NodeId a = g.input(0, 3, {});
  g.lut(a, [](std::int64_t v) { return v; }, {});
  g.output(g.lut(a, [](std::int64_t v) { return 3 - v; }, {}));
  auto plan = compile(g, fhe::CryptoParams::micro(), 1);
  EXPECT_EQ(plan.pbs_count(), 1u);
  EXPECT_EQ(plan.nodes.size(), 2u);
}

TEST(StaticCount, CountForPrefixOfPositions) {
  Graph g;
  for (int pos = 0; pos < 3; ++pos) {
    g.begin_segment(0, pos);
    NodeId a = g.input(0, 3, {});
    NodeId b = g.input(0, 3, {});
    g.output(g.ct_mult(a, b, {}));
  }
  auto plan = compile(g, fhe::CryptoParams::micro(), 3);
  EXPECT_EQ(plan.pbs_count(), 6u);
  EXPECT_EQ(plan.pbs_count_for(2), 4u);
  EXPECT_EQ(plan.segment_index(0, 2), 2u);
  EXPECT_THROW(plan.segment_index(1, 0), PlanError);
}

TEST(PlanFile, RoundtripIsByteExact) {
  auto p = fhe::CryptoParams::micro();
  auto plan = compile(checks::random_graph(p, 5).graph, p, 4, "cfg");
  auto bytes = plan.serialize();
  auto back = ExecutionPlan::deserialize(bytes, p);
  EXPECT_EQ(back.serialize(), bytes);
  EXPECT_EQ(back.pbs_count(), plan.pbs_count());
  EXPECT_EQ(back.label, "cfg");
  EXPECT_EQ(back.seq_len, 4u);
}

TEST(PlanFile, TamperedFingerprintRejected) {
  auto p = fhe::CryptoParams::micro();
  auto bytes = compile(one_product(), p, 1).serialize();
  bytes[8] ^= 1;  // first fingerprint byte follows magic and version
  EXPECT_THROW(ExecutionPlan::deserialize(bytes, p), PlanError);
}

TEST(PlanFile, OtherParametersRejected) {
  auto bytes = compile(one_product(), fhe::CryptoParams::micro(), 1).serialize();
  EXPECT_THROW(ExecutionPlan::deserialize(bytes, fhe::CryptoParams::micro(2, 4)), PlanError);
}

TEST(PlanFile, VersionAndTruncationRejected) {
  auto p = fhe::CryptoParams::micro();
  auto bytes = compile(one_product(), p, 1).serialize();
  auto v = bytes;
  v[4] = 9;
  EXPECT_THROW(ExecutionPlan::deserialize(v, p), PlanError);
  bytes.resize(bytes.size() - 3);
  EXPECT_THROW(ExecutionPlan::deserialize(bytes, p), IoError);
}

TEST(PlanCache, CompilesOncePerKeyAndLength) {
  auto dir = std::filesystem::temp_directory_path() / "pql3_plan_cache_test";
  std::filesystem::remove_all(dir);
  auto p = fhe::CryptoParams::micro();
  int builds = 0;
  auto build = [&] {
    ++builds;
    return one_product();
  };
  {
    PlanCache cache(dir.string());
    auto a = cache.get("k", 1, p, build);
    auto b = cache.get("k", 1, p, build);
    EXPECT_EQ(a.get(), b.get());
    cache.get("k", 2, p, build);
    EXPECT_EQ(cache.compile_count(), 2u);
  }
  PlanCache reopened(dir.string());
  reopened.get("k", 1, p, build);
  EXPECT_EQ(reopened.compile_count(), 0u);
  EXPECT_EQ(reopened.disk_hits(), 1u);
  EXPECT_EQ(builds, 2);
  std::filesystem::remove_all(dir);
}

TEST(Executor, MissingInputIsAnError) {
  auto p = fhe::CryptoParams::micro();
  auto plan = compile(one_product(), p, 1);
  ClearExecutor ex(plan, ClearBackend(plan));
  EXPECT_THROW(ex.run_segment(0), PlanError);
}

TEST(Executor, ClearMatchesIntegerOracle) {
  auto r = checks::random_plans(fhe::CryptoParams::micro(), 300, 11);
  EXPECT_TRUE(r.ok()) << r.first_failure;
}

TEST(Executor, EncryptedMatchesOracleAndStaticCount) {
  auto r = checks::random_plans(micro_keys().client.params(), 40, 12, &micro_keys());
  std::cout << r.note << "\n";
  EXPECT_TRUE(r.ok()) << r.first_failure << " (" << r.note << ")";
}
