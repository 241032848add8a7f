#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using std::string;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int exit_code = -1;
  string out;
  string err;
};

CmdResult run_cli(const string& args) {
  const string out_file = (fs::temp_directory_path() / "subspec_cli_out.txt").string();
  const string err_file = (fs::temp_directory_path() / "subspec_cli_err.txt").string();
  const string cmd =
      string(SUBSPEC_CLI_PATH) + " " + args + " >" + out_file + " 2>" + err_file;
  const int status = std::system(cmd.c_str());
  CmdResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  auto slurp = [](const string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  result.out = slurp(out_file);
  result.err = slurp(err_file);
  return result;
}

string temp_dir(const string& name) {
  const string dir = (fs::temp_directory_path() / name).string();
  fs::remove_all(dir);
  return dir;
}

string slurp_file(const string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Tiny dataset spec shared by the CLI tests; written once per process.
string tiny_spec_path() {
  static string path;
  if (path.empty()) {
    path = (fs::temp_directory_path() / "subspec_tiny_spec.json").string();
    std::ofstream out(path);
    out << R"({"n_train": 16, "n_test": 8, "features": {"n_mels": 16}})";
  }
  return path;
}

}  // namespace

TEST_CASE("help output enumerates all subcommands and flags (snapshot)") {
  const CmdResult r = run_cli("--help-all");
  CHECK(r.exit_code == 0);
  const string want = slurp_file(SUBSPEC_HELP_SNAPSHOT);
  CHECK(r.out == want);
}

TEST_CASE("unknown flags are rejected with machine-readable JSON") {
  const CmdResult r = run_cli("gen-data --no-such-flag");
  CHECK(r.exit_code != 0);
  CHECK(r.err.find("\"error\"") != string::npos);
  CHECK(r.err.find("CliParse") != string::npos);
}

TEST_CASE("gen-data twice with the same seed is byte identical") {
  const string dir_a = temp_dir("subspec_cli_data_a");
  const string dir_b = temp_dir("subspec_cli_data_b");
  const string spec = tiny_spec_path();
  CHECK(run_cli("gen-data --spec " + spec + " --out " + dir_a + " --seed 99").exit_code == 0);
  CHECK(run_cli("gen-data --spec " + spec + " --out " + dir_b + " --seed 99").exit_code == 0);

  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(dir_a)) {
    const string name = entry.path().filename().string();
    ++files;
    CHECK(slurp_file(dir_a + "/" + name) == slurp_file(dir_b + "/" + name));
  }
  CHECK(files == 16 + 8 + 1);
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("train on indivisible band count exits nonzero with the right error kind") {
  const string data = temp_dir("subspec_cli_data_ind");
  REQUIRE(run_cli("gen-data --spec " + tiny_spec_path() + " --out " + data).exit_code == 0);
  // F = 16 mel bins, 16 % 3 != 0
  const string ckpt = temp_dir("subspec_cli_ckpt_ind");
  const CmdResult r =
      run_cli("train --data " + data + " --norm ssn --s 3 --epochs 1 --out " + ckpt);
  CHECK(r.exit_code != 0);
  CHECK(r.err.find("IndivisibleFrequency") != string::npos);
  fs::remove_all(data);
  fs::remove_all(ckpt);
}

TEST_CASE("train, fuse-check and analyze round trip through checkpoints") {
  const string data = temp_dir("subspec_cli_data_rt");
  REQUIRE(run_cli("gen-data --spec " + tiny_spec_path() + " --out " + data).exit_code == 0);

  // 0 epochs keeps the identity affine, so the fused path is exact everywhere
  const string ckpt = temp_dir("subspec_cli_ckpt_rt");
  const CmdResult tr = run_cli("train --data " + data +
                               " --norm ssn --s 2 --affine sub --epochs 0 --out " + ckpt);
  REQUIRE(tr.exit_code == 0);
  CHECK(fs::exists(ckpt + "/checkpoint.json"));
  CHECK(fs::exists(ckpt + "/report.json"));
  CHECK(fs::exists(ckpt + "/report.csv"));

  const CmdResult fc = run_cli("fuse-check --checkpoint " + ckpt);
  CHECK(fc.exit_code == 0);
  CHECK(fc.out.find("\"worst_interior_max_abs_diff\": 0.0") != string::npos);

  const string prof = temp_dir("subspec_cli_profile");
  const CmdResult an = run_cli("analyze --checkpoint " + ckpt + " --data " + data +
                               " --layer 1 --bands 4 --out " + prof);
  CHECK(an.exit_code == 0);
  CHECK(fs::exists(prof + "/profile.csv"));
  CHECK(fs::exists(prof + "/profile.json"));
  CHECK(an.out.find("inter_band_std") != string::npos);

  fs::remove_all(data);
  fs::remove_all(ckpt);
  fs::remove_all(prof);
}

TEST_CASE("gradcheck subcommand reports a passing BN-equivalent check") {
  const CmdResult r = run_cli("gradcheck --s 1 --trials 3 --seed 7");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("\"pass\": true") != string::npos);
  // the reported error is far below the gate
  CHECK(r.out.find("max_rel_err") != string::npos);
}

TEST_CASE("missing checkpoint produces MissingBlob error JSON") {
  const CmdResult r = run_cli("fuse-check --checkpoint /nonexistent/subspec_x");
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("MissingBlob") != string::npos);
}
