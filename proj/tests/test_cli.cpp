#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "app.hpp"
#include "deer/record_io.hpp"
#include "deer/script_gen.hpp"
#include "mock_server.hpp"

namespace fs = std::filesystem;
using deer::testing::MockCompletionServer;
using nlohmann::json;

namespace {

struct CliResult {
  int exit_code = 0;
  std::string stderr_text;
};

CliResult invoke(std::vector<std::string> args) {
  std::vector<const char*> argv;
  argv.push_back("deer");
  for (const auto& a : args) argv.push_back(a.c_str());

  std::ostringstream captured;
  std::ostringstream stdout_sink;
  std::streambuf* old_err = std::cerr.rdbuf(captured.rdbuf());
  std::streambuf* old_out = std::cout.rdbuf(stdout_sink.rdbuf());
  const int code = deer::cli::run(static_cast<int>(argv.size()), argv.data());
  std::cerr.rdbuf(old_err);
  std::cout.rdbuf(old_out);
  return {code, captured.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("deer-cli-test-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path);
  out << contents;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("cli: script-gen, run and bench round-trip") {
  TempDir dir;
  const std::string script = dir.file("scenario.jsonl");
  const std::string records = dir.file("records.jsonl");
  const std::string baseline = dir.file("baseline.jsonl");
  const std::string dataset = dir.file("dataset.jsonl");
  const std::string report = dir.file("report.json");

  auto gen = invoke({"script-gen", "--chunks", "5", "--pearl", "2", "--confidences",
                     "0.3,0.99", "--question", "What is 6 times 7?", "--answer", "42",
                     "--out", script});
  CAPTURE(gen.stderr_text);
  REQUIRE(gen.exit_code == 0);

  write_file(dataset, R"({"id":"q0","question":"What is 6 times 7?","answer":"42","task":"math"})"
                      "\n");

  auto run_deer_cmd = invoke({"run", "--mode", "deer", "--script", script, "--dataset",
                              dataset, "--out", records});
  CAPTURE(run_deer_cmd.stderr_text);
  REQUIRE(run_deer_cmd.exit_code == 0);

  auto run_vanilla_cmd = invoke({"run", "--mode", "vanilla", "--script", script,
                                 "--dataset", dataset, "--out", baseline});
  REQUIRE(run_vanilla_cmd.exit_code == 0);

  auto recs = deer::read_records(records);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].exited_early);
  CHECK(recs[0].exit_chunk_index == 2);

  auto bench = invoke({"bench", "--dataset", dataset, "--records", records,
                       "--baseline", baseline, "--out", report});
  REQUIRE(bench.exit_code == 0);

  json rj = json::parse(read_file(report));
  CHECK(rj.at("report").at("accuracy").get<double>() == doctest::Approx(1.0));
  CHECK(rj.at("report").at("early_exit_rate").get<double>() == doctest::Approx(1.0));
  CHECK(rj.at("report").at("compression_rate").get<double>() < 1.0);
  CHECK(rj.at("version").get<std::string>().find("deer") == 0);
}

TEST_CASE("cli: unknown mode exits 2 and names the key") {
  TempDir dir;
  auto res = invoke({"run", "--mode", "turbo", "--script", "nowhere.jsonl", "--out",
                     dir.file("r.jsonl")});
  CHECK(res.exit_code == 2);
  CHECK(res.stderr_text.find("mode") != std::string::npos);
}

TEST_CASE("cli: unknown config-file key fails closed") {
  TempDir dir;
  const std::string cfg = dir.file("deer.json");
  write_file(cfg, R"({"version":1,"lambda":0.9,"turbo_mode":true})");
  auto res = invoke({"--config", cfg, "run", "--script", "s.jsonl", "--out",
                     dir.file("r.jsonl")});
  CHECK(res.exit_code == 2);
  CHECK(res.stderr_text.find("turbo_mode") != std::string::npos);
}

TEST_CASE("cli: config file values apply and flags override them") {
  TempDir dir;
  const std::string script = dir.file("scenario.jsonl");
  auto gen = invoke({"script-gen", "--chunks", "3", "--pearl", "1", "--out", script});
  REQUIRE(gen.exit_code == 0);

  // lambda 0.999 from the file blocks the exit.
  const std::string cfg = dir.file("deer.json");
  write_file(cfg, R"({"version":1,"lambda":0.999})");
  const std::string records = dir.file("records.jsonl");
  auto res = invoke({"--config", cfg, "run", "--script", script, "--out", records});
  REQUIRE(res.exit_code == 0);
  CHECK_FALSE(deer::read_records(records)[0].exited_early);

  // The flag wins over the file.
  auto res2 = invoke({"--config", cfg, "run", "--script", script, "--lambda", "0.9",
                      "--out", records});
  REQUIRE(res2.exit_code == 0);
  CHECK(deer::read_records(records)[0].exited_early);
}

TEST_CASE("cli: mid-run backend failure exits 1 with completed records only") {
  deer::Script s;
  s.main = {{"answer ", 0.9, {}}, {"\\boxed{3}", 0.9, {}}};
  MockCompletionServer server(s);
  server.fail_after(1);  // the first item's single request succeeds

  TempDir dir;
  const std::string dataset = dir.file("dataset.jsonl");
  write_file(dataset,
             R"({"id":"q1","question":"first","answer":"3","task":"math"})"
             "\n"
             R"({"id":"q2","question":"second","answer":"3","task":"math"})"
             "\n");
  const std::string records = dir.file("records.jsonl");

  auto res = invoke({"run", "--mode", "vanilla", "--endpoint", server.endpoint(),
                     "--model", "mock", "--workers", "1", "--dataset", dataset, "--out",
                     records});
  CHECK(res.exit_code == 1);

  const std::string contents = read_file(records);
  CHECK(contents.find("\"q1\"") != std::string::npos);
  CHECK(contents.find("\"q2\"") == std::string::npos);
  CHECK(contents.find("\"incomplete\":true") != std::string::npos);

  // The reader skips the incomplete marker and yields completed items only.
  auto recs = deer::read_records(records);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].question_id == "q1");
}

TEST_CASE("cli: run against the mock endpoint over the wire") {
  deer::ScenarioSpec spec;
  spec.chunks = 3;
  spec.pearl = 1;
  MockCompletionServer server(deer::generate_script(spec));

  TempDir dir;
  const std::string dataset = dir.file("dataset.jsonl");
  write_file(dataset, R"({"id":"q0","question":"Q?","answer":"42","task":"math"})"
                      "\n");
  const std::string records = dir.file("records.jsonl");

  auto res = invoke({"run", "--mode", "deer", "--endpoint", server.endpoint(), "--model",
                     "mock", "--dataset", dataset, "--out", records});
  CAPTURE(res.stderr_text);
  REQUIRE(res.exit_code == 0);
  auto recs = deer::read_records(records);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].exited_early);
  CHECK(recs[0].final_answer == "42");
  CHECK(recs[0].induction_attempts.size() == 1);
}

TEST_CASE("cli: script-gen validation catches inconsistent scenarios") {
  TempDir dir;
  // Pearl beyond the chunk count.
  auto res = invoke({"script-gen", "--chunks", "5", "--pearl", "7", "--out",
                     dir.file("s.jsonl")});
  CHECK(res.exit_code == 2);

  // Confidences that never clear the threshold contradict the pearl.
  auto res2 = invoke({"script-gen", "--chunks", "4", "--pearl", "2", "--confidences",
                      "0.3,0.3,0.3", "--out", dir.file("s2.jsonl")});
  CHECK(res2.exit_code == 2);
  CHECK(res2.stderr_text.find("validation") != std::string::npos);
}

TEST_CASE("cli: noise-lab writes a structured report") {
  TempDir dir;
  const std::string grid = dir.file("grid.json");
  write_file(grid, R"({"mu":[0.9],"sigma":[0.05],"n":[1,4],"alpha":[1.0]})");
  const std::string report = dir.file("noise.json");

  auto res = invoke({"noise-lab", "--grid", grid, "--trials", "20000", "--seed", "3",
                     "--out", report});
  REQUIRE(res.exit_code == 0);

  json rj = json::parse(read_file(report));
  CHECK(rj.at("trials").get<int>() == 20000);
  const auto& rows = rj.at("rows");
  CHECK(rows.size() == 2 * 4);  // two scenarios, four strategies
  bool found_analytic = false;
  for (const auto& row : rows) {
    if (row.contains("analytic")) found_analytic = true;
  }
  CHECK(found_analytic);

  // Unknown grid keys fail closed.
  write_file(grid, R"({"mu":[0.9],"rho":[1]})");
  auto bad = invoke({"noise-lab", "--grid", grid, "--out", report});
  CHECK(bad.exit_code == 2);
  CHECK(bad.stderr_text.find("rho") != std::string::npos);
}

TEST_CASE("cli: rounds repeat items with distinct ids") {
  TempDir dir;
  const std::string script = dir.file("scenario.jsonl");
  REQUIRE(invoke({"script-gen", "--chunks", "3", "--pearl", "1", "--out", script})
              .exit_code == 0);
  const std::string dataset = dir.file("dataset.jsonl");
  write_file(dataset, R"({"id":"q0","question":"Q?","answer":"42","task":"math"})"
                      "\n");
  const std::string records = dir.file("records.jsonl");

  auto res = invoke({"run", "--script", script, "--dataset", dataset, "--rounds", "3",
                     "--out", records});
  REQUIRE(res.exit_code == 0);
  auto recs = deer::read_records(records);
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].question_id == "q0#r0");
  CHECK(recs[2].question_id == "q0#r2");

  // bench averages over rounds transparently.
  auto bench = invoke({"bench", "--dataset", dataset, "--records", records, "--out",
                       dir.file("rep.json")});
  CHECK(bench.exit_code == 0);
  json rj = json::parse(read_file(dir.file("rep.json")));
  CHECK(rj.at("rounds").get<int>() == 3);
  CHECK(rj.at("report").at("accuracy").get<double>() == doctest::Approx(1.0));
}
