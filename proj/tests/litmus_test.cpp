#include <gtest/gtest.h>

#include "fedcoh/litmus.hpp"

using namespace fedcoh;
using namespace fedcoh::litmus;

TEST(Litmus, CatalogNames) {
  std::vector<std::string> names;
  for (const auto& c : litmus_catalog()) names.push_back(c.name);
  EXPECT_EQ(names, (std::vector<std::string>{"L1", "L2", "L3", "L4", "L5", "L6", "L7"}));
  EXPECT_THROW(find_case("L9"), UsageError);
}

TEST(Litmus, DeclaredVerdicts) {
  auto verdicts = [](const char* n) {
    const auto& c = find_case(n);
    return std::array<Expect, 3>{c.full, c.weak, c.federated};
  };
  using E = Expect;
  EXPECT_EQ(verdicts("L1"), (std::array<E, 3>{E::kReject, E::kAccept, E::kAccept}));
  EXPECT_EQ(verdicts("L2"), (std::array<E, 3>{E::kReject, E::kAccept, E::kAccept}));
  EXPECT_EQ(verdicts("L3"), (std::array<E, 3>{E::kReject, E::kAccept, E::kAccept}));
  EXPECT_EQ(verdicts("L4"), (std::array<E, 3>{E::kAccept, E::kReject, E::kAccept}));
  EXPECT_EQ(verdicts("L5"), (std::array<E, 3>{E::kAccept, E::kReject, E::kAccept}));
}

class LitmusCaseTest : public ::testing::TestWithParam<std::string> {};

TEST_P(LitmusCaseTest, AllRunsMatchExpectations) {
  const auto rep = litmus_run(GetParam(), 42, GetParam() == "L7" ? 20 : 100);
  EXPECT_TRUE(rep.ok()) << to_json(rep).dump();
  EXPECT_EQ(rep.pass, rep.runs);
}

INSTANTIATE_TEST_SUITE_P(Catalog, LitmusCaseTest, ::testing::Values("L1", "L2", "L3", "L4", "L5", "L6", "L7"));

TEST(Litmus, BrokenCasOnlyFederatedExplains) {
  const auto r = find_case("L2").run(7);
  EXPECT_TRUE(r.problem.empty());
  const auto v = check_trace(r.trace);
  EXPECT_FALSE(v.full);
  EXPECT_TRUE(v.federated);
}

TEST(Litmus, DeterministicReport) {
  EXPECT_EQ(to_json(litmus_run("L3", 5, 30)).dump(), to_json(litmus_run("L3", 5, 30)).dump());
}

TEST(Litmus, ReportJson) {
  const auto j = to_json(litmus_run("L1", 1, 3));
  EXPECT_EQ(j["case"], "L1");
  EXPECT_EQ(j["runs"], 3);
  EXPECT_EQ(j["verdicts"]["full"], "reject");
}
