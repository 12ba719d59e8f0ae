#include <gtest/gtest.h>

#include "support.hpp"
#include "tcp/ingest.hpp"
#include "tcp/log.hpp"

using namespace tcp;

namespace {

const std::string kHashA(40, 'a');
const std::string kHashB(40, 'b');

DatasetLayout write_dataset(const tcptest::TempDir& dir, const std::string& builds, const std::string& exec) {
  tcptest::write_file(dir / "builds.csv", builds);
  tcptest::write_file(dir / "exec_records.csv", exec);
  DatasetLayout l;
  l.root = dir.path();
  return l;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::Invariant;
}

ExecutionRecord rec(const std::string& test) { return tcptest::record(1, test, false, 1); }

}  // namespace

TEST(Iso8601, ParseAndFormat) {
  EXPECT_EQ(parse_iso8601("1970-01-01T00:00:00Z"), 0);
  EXPECT_EQ(parse_iso8601("2020-09-13T12:26:40Z"), 1600000000);
  EXPECT_EQ(parse_iso8601("2020-09-13T14:26:40+02:00"), 1600000000);
  EXPECT_EQ(parse_iso8601("2020-09-13T12:26:40.123Z"), 1600000000);
  EXPECT_EQ(format_iso8601(1600000000), "2020-09-13T12:26:40Z");
  EXPECT_THROW(parse_iso8601("2020-02-30T00:00:00Z"), Error);
  EXPECT_THROW(parse_iso8601("yesterday"), Error);
}

TEST(PrimaryJob, MostDistinctTests) {
  JobRecords one = {{"j1", {rec("a"), rec("b"), rec("c")}}};
  EXPECT_EQ(select_primary_job(one), "j1");
  JobRecords two = {{"j1", {rec("a"), rec("b"), rec("c")}}, {"j2", {rec("a"), rec("b"), rec("c"), rec("d"), rec("e")}}};
  EXPECT_EQ(select_primary_job(two), "j2");
  EXPECT_THROW(select_primary_job({}), Error);
}

TEST(PrimaryJob, TieGoesToSmallestIdInEitherInsertionOrder) {
  JobRecords forward;
  forward.emplace("j1", std::vector<ExecutionRecord>{rec("a"), rec("b"), rec("c"), rec("d")});
  forward.emplace("j2", std::vector<ExecutionRecord>{rec("e"), rec("f"), rec("g"), rec("h")});
  JobRecords backward;
  backward.emplace("j2", std::vector<ExecutionRecord>{rec("e"), rec("f"), rec("g"), rec("h")});
  backward.emplace("j1", std::vector<ExecutionRecord>{rec("a"), rec("b"), rec("c"), rec("d")});
  EXPECT_EQ(select_primary_job(forward), "j1");
  EXPECT_EQ(select_primary_job(backward), "j1");
}

TEST(ExecRecords, EmptyExecFile) {
  tcptest::TempDir dir;
  auto l = write_dataset(dir, "build_id,timestamp_iso8601,commits\n1,2020-01-01T00:00:00Z," + kHashA + "\n",
                         "build_id,job_id,test_path,verdict,duration_ms\n");
  auto h = ingest_exec_records(l);
  ASSERT_EQ(h.builds.size(), 1u);
  EXPECT_TRUE(h.builds[0].records.empty());
  EXPECT_EQ(h.builds[0].change_set.commits, std::vector<CommitId>{kHashA});
}

TEST(ExecRecords, OneRecord) {
  tcptest::TempDir dir;
  auto l = write_dataset(dir, "build_id,timestamp_iso8601,commits\n1,,\n",
                         "build_id,job_id,test_path,verdict,duration_ms\n1,j,T.java,1,1200\n");
  auto h = ingest_exec_records(l);
  ASSERT_EQ(h.builds[0].records.size(), 1u);
  const auto& r = h.builds[0].records[0];
  EXPECT_EQ(r.verdict, Verdict::AssertionFailure);
  EXPECT_EQ(r.duration_ms, 1200.0);
  EXPECT_EQ(r.test.path(), "T.java");
  EXPECT_FALSE(h.builds[0].wall_clock);
}

TEST(ExecRecords, KeepsOnlyPrimaryJobPerBuild) {
  tcptest::TempDir dir;
  std::string exec = "build_id,job_id,test_path,verdict,duration_ms\n";
  for (auto t : {"a", "b", "c", "d", "e"}) exec += std::string("1,A,") + t + ",0,5\n";
  for (auto t : {"a", "b", "c"}) exec += std::string("1,B,") + t + ",1,5\n";
  for (auto t : {"a", "b"}) exec += std::string("2,A,") + t + ",0,5\n";
  for (auto t : {"x", "y", "z"}) exec += std::string("2,B,") + t + ",0,5\n";
  auto l = write_dataset(dir, "build_id,timestamp_iso8601,commits\n2,,\n1,,\n", exec);
  auto h = ingest_exec_records(l);
  ASSERT_EQ(h.builds.size(), 2u);
  EXPECT_EQ(h.builds[0].id.ordinal, 1);
  EXPECT_EQ(h.builds[0].records.size(), 5u);
  EXPECT_FALSE(h.builds[0].failed());
  EXPECT_EQ(h.builds[1].records.size(), 3u);
  EXPECT_EQ(h.builds[1].records[0].test.path(), "x");
}

TEST(ExecRecords, SchemaErrors) {
  const std::string builds = "build_id,timestamp_iso8601,commits\n1,,\n";
  const std::string head = "build_id,job_id,test_path,verdict,duration_ms\n";
  struct Case {
    std::string builds, exec;
    Errc code;
  };
  const std::vector<Case> cases = {
      {builds, head + "1,j,T,9,1\n", Errc::SchemaError},
      {builds, head + "1,j,T,0,-3\n", Errc::SchemaError},
      {builds, head + "1,j,T,0,abc\n", Errc::SchemaError},
      {builds, head + "7,j,T,0,1\n", Errc::SchemaError},
      {builds, head + "1,j,,0,1\n", Errc::SchemaError},
      {builds, head + "1,j,T,0\n", Errc::SchemaError},
      {builds, head + "1,j,T,0,1\n1,j,T,1,2\n", Errc::DuplicateRecord},
      {"build_id,timestamp_iso8601,commits\nx,,\n", head, Errc::SchemaError},
      {"build_id,timestamp_iso8601,commits\n1,,nothex\n", head, Errc::SchemaError},
      {"build_id,timestamp_iso8601,commits\n1,not-a-date,\n", head, Errc::SchemaError},
      {"build_id,commits\n1,\n", head, Errc::SchemaError},
  };
  for (const auto& c : cases) {
    tcptest::TempDir dir;
    auto l = write_dataset(dir, c.builds, c.exec);
    EXPECT_EQ(code_of([&] { ingest_exec_records(l); }), c.code) << c.builds << c.exec;
  }
}

TEST(ExecRecords, ErrorNamesTheLine) {
  tcptest::TempDir dir;
  auto l = write_dataset(dir, "build_id,timestamp_iso8601,commits\n1,,\n",
                         "build_id,job_id,test_path,verdict,duration_ms\n1,j,A,0,1\n1,j,B,5,1\n");
  try {
    ingest_exec_records(l);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
}

TEST(Commits, JsonlRoundTrip) {
  tcptest::TempDir dir;
  Commit c;
  c.id = kHashA;
  c.timestamp = 1600000000;
  c.author = "Ann \"the\" Dev";
  c.message = "Fix bug\n\nlong body";
  FileChange fc;
  fc.path = "src/A.java";
  fc.lines_added = 3;
  fc.lines_deleted = 1;
  fc.added_chunks = {4, 10};
  fc.deleted_chunks = {4};
  UnitChange u;
  u.added = 2;
  u.low_risk[1] = false;
  fc.unit_changes = {u};
  c.file_changes = {fc};
  write_commits_jsonl(dir / "c.jsonl", {c, c});
  auto back = read_commits_jsonl(dir / "c.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], c);
}

TEST(Dataset, HistoryRoundTripAndLoad) {
  tcptest::TempDir dir;
  BuildHistory h;
  for (int i = 1; i <= 3; ++i) {
    Build b;
    b.id = BuildId{i};
    b.change_set.build = b.id;
    b.change_set.commits = {i == 1 ? kHashA : kHashB};
    b.wall_clock = 1600000000 + i;
    b.records = {tcptest::record(i, "T1.java", i == 2, 10.5), tcptest::record(i, "T2.java", false, 3)};
    h.builds.push_back(b);
  }
  DatasetLayout l;
  l.root = dir.path();
  write_history(l, h);
  EXPECT_EQ(ingest_exec_records(l), h);

  Commit a;
  a.id = kHashA;
  a.file_changes = {FileChange{"A.java", 1, 0, {1}, {}, {}}};
  Commit b;
  b.id = kHashB;
  b.file_changes = {FileChange{"B.java", 1, 0, {1}, {}, {}}};
  write_commits_jsonl(l.commits_jsonl(), {a, b});
  auto ds = load_dataset(dir.path());
  EXPECT_EQ(ds.commits.size(), 2u);
  EXPECT_EQ(ds.history.builds[0].change_set.changed_files, (std::set<std::string>{"A.java"}));
  EXPECT_EQ(ds.history.builds[2].change_set.changed_files, (std::set<std::string>{"B.java"}));
  EXPECT_EQ(ds.commit(kHashB).file_changes[0].path, "B.java");
  EXPECT_THROW(ds.commit("zz"), Error);
}

TEST(Dataset, UnknownCommitIsSchemaError) {
  tcptest::TempDir dir;
  auto l = write_dataset(dir, "build_id,timestamp_iso8601,commits\n1,," + kHashB + "\n",
                         "build_id,job_id,test_path,verdict,duration_ms\n");
  Commit a;
  a.id = kHashA;
  write_commits_jsonl(l.commits_jsonl(), {a});
  EXPECT_EQ(code_of([&] { load_dataset(dir.path()); }), Errc::SchemaError);
}

TEST(Dataset, ReadsRepoWhenNoJsonl) {
  tcptest::TempDir dir;
  tcptest::git_init(dir / "repo");
  tcptest::write_file(dir / "repo/A.java", "class A {}\n");
  auto sha = tcptest::git_commit_all(dir / "repo", "add A");
  write_dataset(dir, "build_id,timestamp_iso8601,commits\n1,," + sha + "\n",
                "build_id,job_id,test_path,verdict,duration_ms\n1,j,T.java,0,1\n");
  auto ds = load_dataset(dir.path());
  ASSERT_TRUE(ds.layout.repo);
  ASSERT_EQ(ds.commits.size(), 1u);
  EXPECT_EQ(ds.history.builds[0].change_set.changed_files, (std::set<std::string>{"A.java"}));
}

TEST(Dataset, DatasetJsonPointsAtRepo) {
  tcptest::TempDir dir;
  tcptest::git_init(dir / "elsewhere");
  DatasetLayout l;
  l.root = dir / "ds";
  l.repo = std::filesystem::absolute(dir / "elsewhere");
  std::filesystem::create_directories(l.root);
  write_dataset_json(l);
  auto back = DatasetLayout::open(l.root);
  ASSERT_TRUE(back.repo);
  EXPECT_EQ(std::filesystem::weakly_canonical(*back.repo), std::filesystem::weakly_canonical(*l.repo));
}
