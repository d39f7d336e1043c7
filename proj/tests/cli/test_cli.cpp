// End-to-end tests of the installed command-line binary. The binary path is
// injected at compile time (LYAP_CLI_PATH).

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#ifndef LYAP_CLI_PATH
#error "LYAP_CLI_PATH must point at the CLI binary"
#endif

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "lyaprnn_cli_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string s((std::istreambuf_iterator<char>(in)),
                std::istreambuf_iterator<char>());
  return s;
}

void spit(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out);
  out << contents;
}

RunResult run_cli(const std::string& args) {
  const std::string out_file = temp_path("stdout.txt");
  const std::string err_file = temp_path("stderr.txt");
  const std::string cmd = std::string(LYAP_CLI_PATH) + " " + args + " > " +
                          out_file + " 2> " + err_file;
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

double value_after(const std::string& text, const std::string& key) {
  const auto pos = text.find(key + " = ");
  REQUIRE(pos != std::string::npos);
  return std::stod(text.substr(pos + key.size() + 3));
}

std::string line_with(const std::string& text, const std::string& key) {
  const auto pos = text.find(key);
  REQUIRE(pos != std::string::npos);
  const auto end = text.find('\n', pos);
  return text.substr(pos, end - pos);
}

}  // namespace

TEST_CASE("help exits zero for the tool and every subcommand") {
  REQUIRE(run_cli("--help").exit_code == 0);
  REQUIRE(run_cli("simulate --help").exit_code == 0);
  REQUIRE(run_cli("compute --help").exit_code == 0);
  REQUIRE(run_cli("features --help").exit_code == 0);
  REQUIRE(run_cli("check --help").exit_code == 0);
}

TEST_CASE("usage problems exit with code 2") {
  REQUIRE(run_cli("").exit_code == 2);                    // missing subcommand
  REQUIRE(run_cli("frobnicate").exit_code == 2);          // unknown subcommand
  REQUIRE(run_cli("simulate --n 4 --init uniform:0.5 --no-such-flag")
              .exit_code == 2);
  REQUIRE(run_cli("simulate --init uniform:0.5").exit_code == 2);  // --n missing
  REQUIRE(run_cli("simulate --n 4 --init pineapple:1").exit_code == 2);
  REQUIRE(run_cli("simulate --n 4 --init uniform:abc").exit_code == 2);
  REQUIRE(run_cli("simulate --n 4 --init uniform:0.5 --t 10 --t-on 11")
              .exit_code == 2);
  REQUIRE(run_cli("simulate --arch vanilla --n 4 --n-in 3 --init uniform:0.5")
              .exit_code == 2);
  REQUIRE(run_cli("simulate --arch emu --n 4 --init uniform:0.5").exit_code ==
          2);
}

TEST_CASE("simulate reproduces the weak- and strong-gain regimes") {
  const RunResult stable = run_cli(
      "simulate --arch vanilla --n 32 --init orthogonal:0.002 --t 60 "
      "--batch 3 --seed 7");
  REQUIRE(stable.exit_code == 0);
  REQUIRE(line_with(stable.out, "regime") == "regime = stable");
  REQUIRE(value_after(stable.out, "lambda_max") < -0.05);

  const RunResult chaotic = run_cli(
      "simulate --arch vanilla --n 32 --init orthogonal:500 --t 60 "
      "--batch 3 --seed 7");
  REQUIRE(chaotic.exit_code == 0);
  REQUIRE(line_with(chaotic.out, "regime") == "regime = chaotic");
  REQUIRE(value_after(chaotic.out, "lambda_max") > 0.05);
}

TEST_CASE("an identity-activation isometry sits at exponent zero") {
  const RunResult r = run_cli(
      "simulate --arch vanilla --n 4 --init orthogonal:1 --sigma-x 0 --t 50 "
      "--nonlinearity identity");
  REQUIRE(r.exit_code == 0);
  REQUIRE(std::abs(value_after(r.out, "lambda_max")) < 1e-10);
  REQUIRE(line_with(r.out, "regime") == "regime = marginal");
}

TEST_CASE("lstm and gru simulate runs complete and report features") {
  for (const std::string arch : {"lstm", "gru"}) {
    const RunResult r = run_cli("simulate --arch " + arch +
                                " --n 8 --n-in 3 --init uniform:0.08 --t 30 "
                                "--batch 2 --seed 3");
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.out.find("lambda_max = ") != std::string::npos);
    REQUIRE(r.out.find("regime = ") != std::string::npos);
  }
}

TEST_CASE("simulate writes loadable spectrum files in both formats") {
  const std::string structured = temp_path("sim_structured.json");
  const std::string tabular = temp_path("sim_tabular.csv");
  REQUIRE(run_cli("simulate --arch vanilla --n 6 --init orthogonal:1 --t 20 "
                  "--t-on 5 --batch 2 --seed 1 --out " +
                  structured)
              .exit_code == 0);
  REQUIRE(run_cli("simulate --arch vanilla --n 6 --init orthogonal:1 --t 20 "
                  "--t-on 5 --batch 2 --seed 1 --format tabular --out " +
                  tabular)
              .exit_code == 0);
  const std::string sj = slurp(structured);
  REQUIRE(sj.find("\"per_sequence\"") != std::string::npos);
  REQUIRE(sj.find("\"cell_fingerprint\"") != std::string::npos);
  const std::string tc = slurp(tabular);
  REQUIRE(tc.rfind("t,lambda_1,", 0) == 0);
}

TEST_CASE("identical flags and seed give byte-identical outputs at any "
          "thread count") {
  const std::string a = temp_path("det_a.json");
  const std::string b = temp_path("det_b.json");
  const std::string flags =
      "simulate --arch gru --n 10 --n-in 10 --init uniform:0.3 --t 25 "
      "--batch 5 --seed 99 --out ";
  REQUIRE(run_cli(flags + a + " --threads 1").exit_code == 0);
  REQUIRE(run_cli(flags + b + " --threads 4").exit_code == 0);
  REQUIRE(slurp(a) == slurp(b));
  REQUIRE_FALSE(slurp(a).empty());
}

TEST_CASE("compute runs a hand-written weights file to its analytic value") {
  const std::string w = temp_path("double_cell.json");
  spit(w, R"({
  "format_version": 1,
  "arch": "vanilla",
  "layers": [
    {"n_hidden": 1, "n_input": 1, "nonlinearity": "identity",
     "V": [[2.0]], "U": [[1.0]], "b": [0.0]}
  ]
}
)");
  const RunResult r =
      run_cli("compute --weights " + w + " --sigma-x 0 --t 16 --batch 2");
  REQUIRE(r.exit_code == 0);
  REQUIRE(value_after(r.out, "lambda_max") ==
          Catch::Approx(std::log(2.0)).margin(1e-12));
}

TEST_CASE("compute consumes sequence files and infers their length") {
  const std::string w = temp_path("seq_cell.json");
  spit(w, R"({
  "format_version": 1,
  "arch": "vanilla",
  "layers": [
    {"n_hidden": 2, "n_input": 2, "nonlinearity": "tanh",
     "V": [[0.3, 0.1], [-0.2, 0.4]], "U": [[1.0, 0.0], [0.0, 1.0]],
     "b": [0.0, 0.0]}
  ]
}
)");
  const std::string seqs = temp_path("drive.csv");
  spit(seqs, "0.1,0.2\n0.3,-0.1\n0.05,0.02\n-0.2,0.1\n\n"
             "0.2,0.1\n-0.3,0.2\n0.15,0.12\n0.2,-0.1\n");
  const std::string out = temp_path("seq_spec.json");
  const RunResult r =
      run_cli("compute --weights " + w + " --inputs " + seqs + " --out " + out);
  REQUIRE(r.exit_code == 0);
  const std::string written = slurp(out);
  REQUIRE(written.find("\"batch_size\": 2") != std::string::npos);
  REQUIRE(written.find("\"T\": 4") != std::string::npos);
}

TEST_CASE("compute rejects a batch flag that contradicts the sequence file") {
  const std::string w = temp_path("seq_cell2.json");
  spit(w, R"({
  "format_version": 1,
  "arch": "vanilla",
  "layers": [
    {"n_hidden": 1, "n_input": 1, "nonlinearity": "tanh",
     "V": [[0.5]], "U": [[1.0]], "b": [0.0]}
  ]
}
)");
  const std::string seqs = temp_path("drive2.csv");
  spit(seqs, "0.1\n0.2\n\n0.3\n0.4\n");
  REQUIRE(run_cli("compute --weights " + w + " --inputs " + seqs +
                  " --batch 5")
              .exit_code == 2);
}

TEST_CASE("compute names both widths when inputs do not fit the network") {
  const std::string w = temp_path("narrow_cell.json");
  spit(w, R"({
  "format_version": 1,
  "arch": "vanilla",
  "layers": [
    {"n_hidden": 1, "n_input": 1, "nonlinearity": "tanh",
     "V": [[0.5]], "U": [[1.0]], "b": [0.0]}
  ]
}
)");
  const std::string seqs = temp_path("wide_inputs.csv");
  spit(seqs, "0.1,0.2,0.3\n0.1,0.2,0.3\n");
  const RunResult r = run_cli("compute --weights " + w + " --inputs " + seqs);
  REQUIRE(r.exit_code == 1);
  REQUIRE(r.err.find("3") != std::string::npos);
  REQUIRE(r.err.find("1") != std::string::npos);
}

TEST_CASE("compute without inputs or an input variance is a usage error") {
  const std::string w = temp_path("lonely_cell.json");
  spit(w, R"({
  "format_version": 1,
  "arch": "vanilla",
  "layers": [
    {"n_hidden": 1, "n_input": 1, "nonlinearity": "tanh",
     "V": [[0.5]], "U": [[1.0]], "b": [0.0]}
  ]
}
)");
  REQUIRE(run_cli("compute --weights " + w).exit_code == 2);
}

TEST_CASE("missing files exit with code 1 and name the path") {
  const RunResult r =
      run_cli("compute --weights /nonexistent/w.json --sigma-x 0.5");
  REQUIRE(r.exit_code == 1);
  REQUIRE(r.err.find("/nonexistent/w.json") != std::string::npos);
  REQUIRE(run_cli("features /nonexistent/s.json").exit_code == 1);
}

TEST_CASE("features summarizes one spectrum and compares two") {
  const std::string s1 = temp_path("f_one.json");
  const std::string s2 = temp_path("f_two.json");
  REQUIRE(run_cli("simulate --arch vanilla --n 6 --init orthogonal:0.002 "
                  "--t 30 --batch 2 --seed 1 --out " +
                  s1)
              .exit_code == 0);
  REQUIRE(run_cli("simulate --arch vanilla --n 6 --init orthogonal:0.002 "
                  "--t 30 --batch 2 --seed 2 --out " +
                  s2)
              .exit_code == 0);

  const RunResult one = run_cli("features " + s1);
  REQUIRE(one.exit_code == 0);
  REQUIRE(line_with(one.out, "regime") == "regime = stable");
  REQUIRE(one.out.find("rms_distance") == std::string::npos);

  const RunResult two = run_cli("features " + s1 + " " + s2);
  REQUIRE(two.exit_code == 0);
  REQUIRE(value_after(two.out, "rms_distance") >= 0.0);
  REQUIRE(two.out.find("mean_difference = ") != std::string::npos);

  const RunResult js = run_cli("features " + s1 + " " + s2 + " --format json");
  REQUIRE(js.exit_code == 0);
  REQUIRE(js.out.find("\"lambda_max\"") != std::string::npos);
  REQUIRE(js.out.find("\"rms_distance\"") != std::string::npos);

  REQUIRE(run_cli("features " + s1 + " " + s2 + " " + s1).exit_code == 2);
}

TEST_CASE("the self-check command reports named checks and honors faults") {
  const RunResult ok = run_cli("check");
  REQUIRE(ok.exit_code == 0);
  REQUIRE(ok.out.find("jacobian-fd-vanilla") != std::string::npos);
  REQUIRE(ok.out.find("jacobian-fd-lstm") != std::string::npos);
  REQUIRE(ok.out.find("jacobian-fd-gru") != std::string::npos);
  REQUIRE(ok.out.find("telescoping-qr") != std::string::npos);
  REQUIRE(ok.out.find("volume-identity") != std::string::npos);
  REQUIRE(ok.out.find("linear-analytic-spectrum") != std::string::npos);
  REQUIRE(ok.out.find("[FAIL]") == std::string::npos);

  const RunResult bad = run_cli("check --inject-fault");
  REQUIRE(bad.exit_code == 1);
  REQUIRE(bad.out.find("[FAIL]") != std::string::npos);
}
