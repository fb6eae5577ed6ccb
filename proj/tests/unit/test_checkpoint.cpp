#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "droute/checkpoint.hpp"
#include "droute/error.hpp"

using namespace droute;
namespace fs = std::filesystem;

TEST(Checkpoint, PolicyRoundTripIsBitExact) {
  const PolicyParams p = PolicyParams::init(PolicyConfig::desk(ProblemType::cvrp), 3);
  std::stringstream ss;
  write_checkpoint(ss, policy_entries(p));
  const auto back = policy_from_entries(read_checkpoint(ss));
  EXPECT_EQ(back, p);
  EXPECT_EQ(back.flatten(), p.flatten());
}

TEST(Checkpoint, LayoutStartsWithMagicAndLittleEndianCount) {
  std::stringstream ss;
  write_checkpoint(ss, {{"a", nn::Tensor::vector({1.5})}});
  const std::string bytes = ss.str();
  ASSERT_GE(bytes.size(), 17u);
  EXPECT_EQ(bytes.substr(0, 9), "DROROUTE1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[9]), 1u);
  for (int i = 10; i < 17; ++i) EXPECT_EQ(bytes[static_cast<std::size_t>(i)], 0);
}

TEST(Checkpoint, RejectsBadMagicTruncationAndShapeMismatch) {
  std::stringstream bad("NOTROUTE1........");
  EXPECT_THROW(read_checkpoint(bad), ParseError);

  std::stringstream ss;
  write_checkpoint(ss, policy_entries(PolicyParams::init(PolicyConfig::desk(ProblemType::tsp), 1)));
  const std::string full = ss.str();
  std::stringstream cut(full.substr(0, full.size() - 5));
  EXPECT_THROW(read_checkpoint(cut), ParseError);

  auto entries = policy_entries(PolicyParams::init(PolicyConfig::desk(ProblemType::tsp), 1));
  for (auto& e : entries) {
    if (e.name == "dec.key") e.value = nn::Tensor({3, 3}, 0.0);
  }
  EXPECT_THROW(policy_from_entries(entries), ShapeError);
}

TEST(Checkpoint, FileSaveAndLoad) {
  const fs::path path = fs::temp_directory_path() / "droute_ckpt_test.bin";
  const PolicyParams p = PolicyParams::init(PolicyConfig::desk(ProblemType::tsp), 8);
  save_policy(path, p);
  EXPECT_EQ(load_policy(path), p);
  fs::remove(path);
  EXPECT_THROW(load_policy(path), ParseError);
}
