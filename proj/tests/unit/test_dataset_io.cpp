#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "droute/dataset_io.hpp"
#include "droute/error.hpp"

using namespace droute;
namespace fs = std::filesystem;

TEST(DatasetIo, RecordsRoundTripExactly) {
  DistributionSpec s;
  s.kind = DistributionKind::explosion;
  std::vector<AnyInstance> recs;
  recs.push_back(generate(s, 13, 4));
  recs.push_back(attach_vrp(generate(s, 9, 5), 30, 6));
  std::stringstream ss;
  write_records(ss, recs);
  const auto back = read_records(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(std::get<Instance>(back[0]), std::get<Instance>(recs[0]));
  EXPECT_EQ(std::get<CvrpInstance>(back[1]), std::get<CvrpInstance>(recs[1]));
}

TEST(DatasetIo, HeaderFormat) {
  std::stringstream ss;
  write_record(ss, Instance{{{0, 0}, {1, 0.5}}});
  EXPECT_EQ(ss.str(), "TSP 2\n0 0\n1 0.5\n");
}

TEST(DatasetIo, MalformedInputThrowsParseError) {
  std::istringstream a("TSP 3\n0 0\n1 1\n");
  EXPECT_THROW(read_records(a), ParseError);
  std::istringstream b("TSPX 2\n0 0\n1 1\n");
  EXPECT_THROW(read_records(b), ParseError);
  std::istringstream c("CVRP 1 10\n0.5 0.5 0\n0.1 0.1 abc\n");
  EXPECT_THROW(read_records(c), ParseError);
}

TEST(DatasetIo, GroupFilesLoadInNameOrder) {
  const fs::path dir = fs::temp_directory_path() / "droute_dsio_test";
  fs::remove_all(dir);
  GroupSpec u{DistributionSpec{}, 4, 10, 1, std::nullopt};
  GroupSpec c{DistributionSpec{DistributionKind::cluster}, 2, 10, 2, std::nullopt};
  EXPECT_EQ(save_group_file(dir, u, generate_group(u)).filename(), "uniform_10_1.txt");
  save_group_file(dir, c, generate_group(c));
  const GroupedDataset ds = load_dataset_dir(dir);
  ASSERT_EQ(ds.group_count(), 2u);
  EXPECT_EQ(ds.groups[0].kind, DistributionKind::cluster);
  EXPECT_EQ(ds.groups[1].instances, generate_group(u));
  EXPECT_EQ(group_file_name(DistributionKind::grid, 20, 7), "grid_20_7.txt");
  fs::remove_all(dir);
  EXPECT_THROW(load_dataset_dir(dir), DatasetError);
}
