#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include "dust/dust.hpp"

using Catch::Matchers::WithinAbs;

namespace {

const std::string& scratch_dir() {
  static const std::string dir = [] {
    const std::filesystem::path p =
        std::filesystem::temp_directory_path() /
        ("dust_cli_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(p);
    return p.string();
  }();
  return dir;
}

std::string scratch(const std::string& name) {
  return scratch_dir() + "/" + name;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
}

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args, const std::string& stdin_path = "") {
  const std::string out_path = scratch("last_stdout.txt");
  const std::string err_path = scratch("last_stderr.txt");
  std::string cmd = std::string("\"") + DUST_CLI_PATH + "\" " + args;
  if (!stdin_path.empty()) cmd += " < \"" + stdin_path + "\"";
  cmd += " > \"" + out_path + "\" 2> \"" + err_path + "\"";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out_path);
  return r;
}

struct Report {
  std::string format;
  std::map<std::string, std::string> kv;
};

Report parse_report(const std::string& text) {
  std::istringstream in(text);
  Report rep;
  REQUIRE(std::getline(in, rep.format));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t sp = line.find(' ');
    if (sp == std::string::npos) {
      rep.kv[line] = "";
    } else {
      rep.kv[line.substr(0, sp)] = line.substr(sp + 1);
    }
  }
  return rep;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_lines(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

dust::Series read_series(const std::string& path, bool header = false) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return dust::read_csv(in, header);
}

const std::string& tiny_csv() {
  static const std::string path = [] {
    const std::string p = scratch("tiny.csv");
    write_file(p, "2\n-1\n0\n");
    return p;
  }();
  return path;
}

}  // namespace

TEST_CASE("help text exits zero") {
  const RunResult top = run_cli("--help");
  CHECK(top.code == 0);
  CHECK(top.out.find("segment") != std::string::npos);
  CHECK(top.out.find("bench") != std::string::npos);
  CHECK(run_cli("segment --help").code == 0);
}

TEST_CASE("configuration mistakes exit with code 1") {
  CHECK(run_cli("").code == 1);
  CHECK(run_cli("segment --bogus-flag").code == 1);
  CHECK(run_cli("segment --model gumbo -i " + tiny_csv()).code == 1);
  CHECK(run_cli("segment --penalty bic:3 -i " + tiny_csv()).code == 1);
  CHECK(run_cli("segment --strategy warp -i " + tiny_csv()).code == 1);

  const std::string mv = scratch("mv4.csv");
  write_file(mv, "1\n4\n2\n8\n");
  CHECK(run_cli("segment --model meanvar --strategy exact1d -i " + mv).code ==
        1);

  CHECK(run_cli("worstcase --model poisson --n 20 --penalty abs:1").code == 1);
  CHECK(run_cli("bench --lengths abc --reps 1").code == 1);
}

TEST_CASE("malformed or invalid input exits with code 2") {
  CHECK(run_cli("segment -i " + scratch("does_not_exist.csv")).code == 2);

  const std::string ragged = scratch("ragged.csv");
  write_file(ragged, "1,2\n3\n");
  CHECK(run_cli("segment -i " + ragged).code == 2);

  const std::string junk = scratch("junk.csv");
  write_file(junk, "1\nabc\n");
  CHECK(run_cli("segment -i " + junk).code == 2);

  const std::string neg = scratch("neg.csv");
  write_file(neg, "3\n-1\n2\n");
  CHECK(run_cli("segment --model poisson -i " + neg).code == 2);

  const std::string one = scratch("one.csv");
  write_file(one, "5\n");
  CHECK(run_cli("segment --model meanvar --strategy none -i " + one).code ==
        2);
}

TEST_CASE("segment report lists the exact solution") {
  const RunResult r = run_cli(
      "segment --model gauss --penalty abs:2 --q0=-2 --strategy none "
      "--trace -i " +
      tiny_csv());
  REQUIRE(r.code == 0);

  const Report rep = parse_report(r.out);
  CHECK(rep.format == "dustseg.segment.v1");
  CHECK(rep.kv.at("model") == "gauss");
  CHECK(rep.kv.at("n") == "3");
  CHECK(rep.kv.at("cols") == "1");
  CHECK(rep.kv.at("penalty") == "abs:2");
  CHECK_THAT(std::stod(rep.kv.at("beta")), WithinAbs(2.0, 1e-15));
  CHECK(rep.kv.at("pruning") == "none");
  CHECK_THAT(std::stod(rep.kv.at("q0")), WithinAbs(-2.0, 1e-15));
  CHECK_THAT(std::stod(rep.kv.at("cost")), WithinAbs(-0.25, 1e-12));
  CHECK(rep.kv.at("changepoints") == "1 3");
  CHECK(rep.kv.at("remaining") == "3");
  CHECK(rep.kv.at("trace") == "1 2 3");
  CHECK(rep.kv.count("strategy") == 0);
  CHECK(rep.kv.count("constraints") == 0);
}

TEST_CASE("dust runs add strategy lines and agree with the unpruned cost") {
  const std::string out = scratch("report.txt");
  const RunResult r = run_cli(
      "segment --model gauss --penalty abs:2 --q0=-2 --strategy exact1d -i " +
      tiny_csv() + " -o " + out);
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());

  const Report rep = parse_report(read_file(out));
  CHECK(rep.format == "dustseg.segment.v1");
  CHECK(rep.kv.at("pruning") == "dust");
  CHECK(rep.kv.at("strategy") == "exact1d");
  CHECK(rep.kv.at("constraints") == "1");
  CHECK_THAT(std::stod(rep.kv.at("cost")), WithinAbs(-0.25, 1e-12));
  CHECK(rep.kv.at("changepoints") == "1 3");
  CHECK(std::stoul(rep.kv.at("remaining")) <= 3);

  const RunResult pelt = run_cli(
      "segment --model gauss --penalty abs:2 --q0=-2 --strategy pelt -i " +
      tiny_csv());
  REQUIRE(pelt.code == 0);
  const Report prep = parse_report(pelt.out);
  CHECK(prep.kv.at("pruning") == "pelt");
  CHECK(prep.kv.count("strategy") == 0);
  CHECK(prep.kv.at("changepoints") == "1 3");
}

TEST_CASE("stdin and explicit input agree") {
  const std::string args = "segment --model gauss --penalty abs:2 --q0=-2";
  const RunResult from_file = run_cli(args + " -i " + tiny_csv());
  const RunResult from_stdin = run_cli(args, tiny_csv());
  REQUIRE(from_file.code == 0);
  REQUIRE(from_stdin.code == 0);
  CHECK(from_file.out == from_stdin.out);
}

TEST_CASE("simulate emits a parseable deterministic csv") {
  const std::string a = scratch("sim_a.csv");
  const std::string b = scratch("sim_b.csv");
  const std::string c = scratch("sim_c.csv");

  REQUIRE(run_cli("simulate --model gauss --n 40 --segments 4 --p1=0 --p2=6 "
                  "--seed 7 -o " +
                  a)
              .code == 0);
  const dust::Series sa = read_series(a);
  CHECK(sa.n == 40);
  CHECK(sa.cols == 1);

  REQUIRE(run_cli("simulate --model gauss --n 40 --segments 4 --p1=0 --p2=6 "
                  "--seed 7 -o " +
                  b)
              .code == 0);
  CHECK(read_file(a) == read_file(b));

  REQUIRE(run_cli("simulate --model gauss --n 40 --segments 4 --p1=0 --p2=6 "
                  "--seed 8 -o " +
                  c)
              .code == 0);
  CHECK(read_file(a) != read_file(c));

  const std::string multi = scratch("sim_multi.csv");
  REQUIRE(run_cli("simulate --model poisson --n 15 --components 2 --p1=3 "
                  "--p2=9 --seed 2 --header -o " +
                  multi)
              .code == 0);
  const std::string text = read_file(multi);
  CHECK(text.rfind("c0,c1\n", 0) == 0);
  const dust::Series sm = read_series(multi, true);
  CHECK(sm.n == 15);
  CHECK(sm.cols == 2);
  for (double v : sm.values) CHECK(v >= 0.0);

  CHECK(run_cli("simulate --model quadratic-regression --n 10").code == 1);
}

TEST_CASE("simulated series round trips through segment") {
  const std::string sim = scratch("roundtrip.csv");
  REQUIRE(run_cli("simulate --model poisson --n 60 --segments 3 --p1=1 "
                  "--p2=8 --seed 3 -o " +
                  sim)
              .code == 0);

  const std::string base = "segment --model poisson --penalty log:2 -i " + sim;
  const RunResult none = run_cli(base + " --strategy none");
  const RunResult exact = run_cli(base + " --strategy exact1d");
  const RunResult randr =
      run_cli(base + " --strategy exact1d --rand-r --seed 11");
  REQUIRE(none.code == 0);
  REQUIRE(exact.code == 0);
  REQUIRE(randr.code == 0);

  const Report rn = parse_report(none.out);
  const Report re = parse_report(exact.out);
  const Report rr = parse_report(randr.out);
  CHECK(rn.kv.at("cost") == re.kv.at("cost"));
  CHECK(rn.kv.at("cost") == rr.kv.at("cost"));
  CHECK(rn.kv.at("changepoints") == re.kv.at("changepoints"));
  CHECK(rn.kv.at("changepoints") == rr.kv.at("changepoints"));

  const std::vector<std::string> cps = split_ws(rn.kv.at("changepoints"));
  REQUIRE(!cps.empty());
  CHECK(cps.back() == "60");
  CHECK(rn.kv.at("remaining") == "60");
  CHECK(std::stoul(re.kv.at("remaining")) <= 60);
}

TEST_CASE("worst case generators defeat pruning end to end") {
  const std::string wc = scratch("worst_gauss.csv");
  REQUIRE(run_cli("worstcase --n 120 --penalty log:2 -o " + wc).code == 0);
  CHECK(read_series(wc).n == 120);

  const std::string base = "segment --model gauss --penalty log:2 -i " + wc;
  const RunResult exact = run_cli(base + " --strategy exact1d");
  const RunResult pelt = run_cli(base + " --strategy pelt");
  REQUIRE(exact.code == 0);
  REQUIRE(pelt.code == 0);
  CHECK(parse_report(exact.out).kv.at("remaining") == "120");
  CHECK(parse_report(pelt.out).kv.at("remaining") == "120");

  const std::string wcp = scratch("worst_poisson.csv");
  REQUIRE(run_cli("worstcase --model poisson --n 40 --penalty abs:2 "
                  "--ymean 20 -o " +
                  wcp)
              .code == 0);
  const RunResult pe = run_cli(
      "segment --model poisson --penalty abs:2 --strategy exact1d -i " + wcp);
  REQUIRE(pe.code == 0);
  CHECK(parse_report(pe.out).kv.at("remaining") == "40");
}

TEST_CASE("quadratic regression flows through the cli") {
  std::ostringstream csv;
  for (int i = 0; i < 12; ++i) csv << i << ',' << (i < 6 ? 1 : 6) << "\n";
  const std::string path = scratch("quad.csv");
  write_file(path, csv.str());

  const RunResult r = run_cli(
      "segment --model quadratic-regression --penalty abs:1 --strategy zero "
      "-i " +
      path);
  REQUIRE(r.code == 0);
  const Report rep = parse_report(r.out);
  CHECK(rep.kv.at("model") == "quadratic-regression");
  CHECK(rep.kv.at("cols") == "2");
  const std::vector<std::string> cps = split_ws(rep.kv.at("changepoints"));
  REQUIRE(!cps.empty());
  CHECK(cps.back() == "12");
}

TEST_CASE("bench emits machine readable jsonl") {
  const std::string out = scratch("bench.jsonl");
  REQUIRE(run_cli("bench --model gauss --strategy exact1d --penalty log:2 "
                  "--lengths 50,100 --reps 3 --seed 5 --segments 2 --p1=0 "
                  "--p2=4 --fit -o " +
                  out)
              .code == 0);

  const std::vector<std::string> lines = split_lines(read_file(out));
  REQUIRE(lines.size() == 10);

  const nlohmann::json header = nlohmann::json::parse(lines[0]);
  CHECK(header.at("kind") == "header");
  CHECK(header.at("format") == "dustseg.bench.v1");
  CHECK(header.at("model") == "gauss");
  CHECK(header.at("strategy") == "exact1d");
  CHECK(header.at("reps") == 3);
  CHECK(header.at("seed") == 5);

  std::vector<dust::BenchRecord> recs;
  for (std::size_t i = 1; i <= 6; ++i) {
    const nlohmann::json j = nlohmann::json::parse(lines[i]);
    REQUIRE(j.at("kind") == "record");
    recs.push_back(j.get<dust::BenchRecord>());
  }
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const dust::BenchRecord& rec = recs[i];
    CHECK(rec.model == "gauss");
    CHECK(rec.pruning == "dust");
    CHECK(rec.strategy == "exact1d");
    CHECK(rec.n == (i < 3 ? 50u : 100u));
    CHECK(rec.a == 2.0);
    CHECK_THAT(rec.beta,
               WithinAbs(2.0 * std::log(static_cast<double>(rec.n)), 1e-12));
    CHECK(rec.remaining >= 1);
    CHECK(rec.wall_s >= 0.0);
  }
  CHECK(recs[0].seed != recs[1].seed);

  for (std::size_t i = 7; i <= 8; ++i) {
    const nlohmann::json j = nlohmann::json::parse(lines[i]);
    REQUIRE(j.at("kind") == "summary");
    CHECK(j.at("n") == (i == 7 ? 50 : 100));
    CHECK(j.at("a") == 2.0);
    const auto rq = j.at("remaining_q").get<std::vector<double>>();
    REQUIRE(rq.size() == 3);
    CHECK(rq[0] <= rq[1]);
    CHECK(rq[1] <= rq[2]);
    CHECK(j.at("wall_q").get<std::vector<double>>().size() == 3);
  }

  const nlohmann::json fit = nlohmann::json::parse(lines[9]);
  CHECK(fit.at("kind") == "fit");
  CHECK(fit.at("what") == "log remaining ~ log n");
  CHECK(std::isfinite(fit.at("slope").get<double>()));
  CHECK(std::isfinite(fit.at("intercept").get<double>()));
}

TEST_CASE("bench sweeps penalty coefficients without a fit line") {
  const std::string out = scratch("bench_coeffs.jsonl");
  REQUIRE(run_cli("bench --model gauss --strategy exact1d --penalty log:2 "
                  "--lengths 60 --coeffs 0.5,2 --reps 2 --seed 9 --segments 2 "
                  "--p1=0 --p2=4 --fit -o " +
                  out)
              .code == 0);

  const std::vector<std::string> lines = split_lines(read_file(out));
  REQUIRE(lines.size() == 7);
  for (const std::string& line : lines) {
    CHECK(nlohmann::json::parse(line).at("kind") != "fit");
  }
  const std::vector<double> want_a = {0.5, 0.5, 2.0, 2.0};
  for (std::size_t i = 1; i <= 4; ++i) {
    const dust::BenchRecord rec =
        nlohmann::json::parse(lines[i]).get<dust::BenchRecord>();
    CHECK(rec.a == want_a[i - 1]);
    CHECK_THAT(rec.beta,
               WithinAbs(rec.a * std::log(60.0), 1e-12));
  }
  CHECK(nlohmann::json::parse(lines[5]).at("a") == 0.5);
  CHECK(nlohmann::json::parse(lines[6]).at("a") == 2.0);
}
