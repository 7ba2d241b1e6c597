// End-to-end tests of the operator console binary: REPL behavior, batch
// runs, index jobs, stats reporting, and cross-mode answer equality.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qgl/apps/terrain.hpp"
#include "qgl/base.hpp"
#include "qgl/xmldoc.hpp"

namespace fs = std::filesystem;
using namespace qgl;

namespace {

struct CmdResult {
  int exit = -1;
  std::string out;  // stdout + stderr
};

CmdResult run_cmd(const std::string& cmd) {
  CmdResult r;
  FILE* p = popen((cmd + " 2>&1").c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof(buf), p)) > 0) r.out.append(buf, n);
  int st = pclose(p);
  r.exit = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

fs::path make_tmpdir() {
  static int counter = 0;
  auto d = fs::temp_directory_path() /
           ("qgl_cli_test_" + std::to_string(getpid()) + "_" +
            std::to_string(counter++));
  fs::create_directories(d);
  return d;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kBin = QGL_CLI_BIN;

// Splits output into lines, dropping prompt markers and diagnostics.
std::vector<std::string> answer_lines(const std::string& out) {
  std::vector<std::string> lines;
  std::istringstream ss(out);
  std::string l;
  while (std::getline(ss, l)) {
    while (l.rfind("> ", 0) == 0) l = l.substr(2);
    if (l.empty() || l[0] == '#' || l.rfind("loaded ", 0) == 0 ||
        l.rfind("batch done", 0) == 0 || l.rfind("hub2 index", 0) == 0 ||
        l.rfind("terrain network", 0) == 0 || l.rfind("graph saved", 0) == 0)
      continue;
    lines.push_back(l);
  }
  return lines;
}

// Undirected chain + random extra edges, ppsp line format `id \t out-list`.
std::string random_ppsp_graph(int n, uint32_t seed) {
  std::mt19937 rng(seed);
  std::vector<std::set<VertexId>> adj;
  adj.resize(size_t(n));
  auto link = [&](int a, int b) {
    if (a == b) return;
    adj[a].insert(b);
    adj[b].insert(a);
  };
  for (int v = 0; v + 1 < n; ++v) link(v, v + 1);
  for (int e = 0; e < 2 * n; ++e) link(int(rng() % n), int(rng() % n));
  std::string g;
  for (int v = 0; v < n; ++v) {
    g += std::to_string(v) + "\t";
    bool first = true;
    for (VertexId w : adj[v]) {
      if (!first) g += ' ';
      g += std::to_string(w);
      first = false;
    }
    g += '\n';
  }
  return g;
}

// Answer files keyed by qid for a batch output directory.
std::map<int, std::string> read_outputs(const fs::path& dir) {
  std::map<int, std::string> got;
  for (auto& e : fs::directory_iterator(dir)) {
    auto name = e.path().filename().string();
    if (name == "_stats.tsv") continue;
    got[std::stoi(name)] = read_file(e.path());
  }
  return got;
}

const char* kLabDoc =
    "<lab><group>"
    "<member>Tom Smith</member>"
    "<member>Graph Mining</member>"
    "<project><title>Systems</title>"
    "<paper><author>Tom Peter</author><topic>Graph</topic></paper>"
    "<demo>video</demo></project>"
    "</group><admin>budget office</admin></lab>";

}  // namespace

TEST_CASE("cli: console answers, re-prompt, usage hint, quit") {
  auto dir = make_tmpdir();
  write_file(dir / "g.txt", "0\t1\n1\t0 2\n2\t1\n");
  write_file(dir / "in.txt", "0 2\n\n   \nbogus query here\nhelp\nquit\n");
  auto r = run_cmd(kBin + " --app ppsp --graph " + (dir / "g.txt").string() +
                   " < " + (dir / "in.txt").string());
  CHECK(r.exit == 0);
  // Distance answer for 0 -> 2 on the chain.
  auto lines = answer_lines(r.out);
  REQUIRE(!lines.empty());
  auto toks = split_ws(lines[0]);
  REQUIRE(toks.size() == 5);
  CHECK(toks[1] == "0");
  CHECK(toks[2] == "2");
  CHECK(toks[3] == "2");
  // Blank lines re-prompt without output: one prompt per input line + final.
  size_t prompts = 0;
  for (size_t p = 0; (p = r.out.find("> ", p)) != std::string::npos; p += 2)
    ++prompts;
  CHECK(prompts >= 6);
  // Malformed query: diagnostic plus usage hint, loop continues.
  CHECK(r.out.find("error:") != std::string::npos);
  CHECK(r.out.find("usage: <s> <t>") != std::string::npos);
}

TEST_CASE("cli: single-query stats invariant rounds = supersteps + 1") {
  auto dir = make_tmpdir();
  write_file(dir / "g.txt", random_ppsp_graph(20, 5));
  write_file(dir / "in.txt", "0 17\nquit\n");
  auto r = run_cmd(kBin + " --app ppsp --graph " + (dir / "g.txt").string() +
                   " < " + (dir / "in.txt").string());
  REQUIRE(r.exit == 0);
  auto sp = r.out.find("supersteps=");
  auto rp = r.out.find("rounds=");
  REQUIRE(sp != std::string::npos);
  REQUIRE(rp != std::string::npos);
  int steps = std::stoi(r.out.substr(sp + 11));
  int rounds = std::stoi(r.out.substr(rp + 7));
  CHECK(rounds == steps + 1);

  // Batch reports the same span via admission bookkeeping.
  write_file(dir / "b.txt", "0 17\n");
  auto rb = run_cmd(kBin + " --app ppsp --graph " + (dir / "g.txt").string() +
                    " --batch " + (dir / "b.txt").string());
  REQUIRE(rb.exit == 0);
  auto pp = rb.out.find("reported_rounds=");
  REQUIRE(pp != std::string::npos);
  CHECK(std::stoi(rb.out.substr(pp + 16)) == steps + 1);
}

TEST_CASE("cli: batch answers identical across capacities and transports") {
  auto dir = make_tmpdir();
  write_file(dir / "g.txt", random_ppsp_graph(40, 9));
  std::mt19937 rng(3);
  std::string batch;
  for (int i = 0; i < 60; ++i)
    batch += std::to_string(rng() % 40) + " " + std::to_string(rng() % 40) +
             "\n";
  write_file(dir / "b.txt", batch);
  auto base = kBin + " --app ppsp --graph " + (dir / "g.txt").string() +
              " --batch " + (dir / "b.txt").string();
  REQUIRE(run_cmd(base + " --capacity 1 --output " +
                  (dir / "c1").string()).exit == 0);
  REQUIRE(run_cmd(base + " --capacity 8 --output " +
                  (dir / "c8").string()).exit == 0);
  REQUIRE(run_cmd(base + " --capacity 8 --transport socket --output " +
                  (dir / "sock").string()).exit == 0);
  auto c1 = read_outputs(dir / "c1");
  auto c8 = read_outputs(dir / "c8");
  auto sock = read_outputs(dir / "sock");
  REQUIRE(c1.size() == 60);
  CHECK(c1 == c8);
  CHECK(c1 == sock);
  CHECK(fs::exists(dir / "c1" / "_stats.tsv"));
}

TEST_CASE("cli: console and batch produce identical answers") {
  auto dir = make_tmpdir();
  write_file(dir / "g.txt", random_ppsp_graph(25, 13));
  std::vector<std::string> qs = {"0 24", "3 19", "7 7", "24 1", "5 18"};
  std::string console_in, batch;
  for (auto& q : qs) {
    console_in += q + "\n";
    batch += q + "\n";
  }
  console_in += "quit\n";
  write_file(dir / "in.txt", console_in);
  write_file(dir / "b.txt", batch);
  auto rc = run_cmd(kBin + " --app ppsp --graph " + (dir / "g.txt").string() +
                    " < " + (dir / "in.txt").string());
  auto rb = run_cmd(kBin + " --app ppsp --graph " + (dir / "g.txt").string() +
                    " --batch " + (dir / "b.txt").string());
  REQUIRE(rc.exit == 0);
  REQUIRE(rb.exit == 0);
  CHECK(answer_lines(rc.out) == answer_lines(rb.out));
}

TEST_CASE("cli: empty batch file exits cleanly with zero answers") {
  auto dir = make_tmpdir();
  write_file(dir / "g.txt", "0\t1\n1\t0\n");
  write_file(dir / "b.txt", "");
  auto r = run_cmd(kBin + " --app ppsp --graph " + (dir / "g.txt").string() +
                   " --batch " + (dir / "b.txt").string() + " --output " +
                   (dir / "out").string());
  CHECK(r.exit == 0);
  CHECK(r.out.find("batch done: 0 queries") != std::string::npos);
}

TEST_CASE("cli: batch records per-line parse failures as error answers") {
  auto dir = make_tmpdir();
  write_file(dir / "g.txt", "0\t1\n1\t0\n");
  write_file(dir / "b.txt", "0 1\nnot a query\n0 99\n");
  auto r = run_cmd(kBin + " --app ppsp --graph " + (dir / "g.txt").string() +
                   " --batch " + (dir / "b.txt").string() + " --output " +
                   (dir / "out").string());
  CHECK(r.exit == 0);
  CHECK(r.out.find("3 queries, 2 errors") != std::string::npos);
  auto got = read_outputs(dir / "out");
  REQUIRE(got.size() == 3);
  CHECK(got[2].rfind("ERROR", 0) == 0);
  CHECK(got[3].rfind("ERROR", 0) == 0);  // unknown endpoint
  CHECK(got[1].rfind("1 0 1 1", 0) == 0);
}

TEST_CASE("cli: hub2 index job end-to-end, k=0 rejected") {
  auto dir = make_tmpdir();
  write_file(dir / "g.txt", random_ppsp_graph(50, 21));
  std::mt19937 rng(8);
  std::string batch;
  for (int i = 0; i < 40; ++i)
    batch += std::to_string(rng() % 50) + " " + std::to_string(rng() % 50) +
             "\n";
  write_file(dir / "b.txt", batch);
  auto bad = run_cmd(kBin + " --app ppsp-hub2 --hubs 0 --graph " +
                     (dir / "g.txt").string() + " --batch " +
                     (dir / "b.txt").string());
  CHECK(bad.exit == 1);
  CHECK(bad.out.find("--hubs") != std::string::npos);

  auto plain = run_cmd(kBin + " --app ppsp --graph " +
                       (dir / "g.txt").string() + " --batch " +
                       (dir / "b.txt").string() + " --output " +
                       (dir / "p").string());
  auto hub = run_cmd(kBin + " --app ppsp-hub2 --hubs 5 --degree-mode inout" +
                     " --graph " + (dir / "g.txt").string() + " --batch " +
                     (dir / "b.txt").string() + " --output " +
                     (dir / "h").string());
  REQUIRE(plain.exit == 0);
  REQUIRE(hub.exit == 0);
  auto p = read_outputs(dir / "p"), h = read_outputs(dir / "h");
  REQUIRE(p.size() == 40);
  REQUIRE(h.size() == 40);
  for (auto& [qid, text] : p) {
    // Same distances; supersteps (5th token) may differ between the apps.
    auto a = split_ws(text), b = split_ws(h[qid]);
    REQUIRE(a.size() == 5);
    REQUIRE(b.size() == 5);
    for (int i = 0; i < 4; ++i) CHECK(a[i] == b[i]);
  }
}

TEST_CASE("cli: xml level job plus figure-derived batch answers") {
  auto dir = make_tmpdir();
  write_file(dir / "doc.xml", kLabDoc);
  write_file(dir / "b.txt", "slca tom graph\nmaxmatch tom graph\n");
  auto r = run_cmd(kBin + " --app xml --graph " + (dir / "doc.xml").string() +
                   " --batch " + (dir / "b.txt").string());
  REQUIRE(r.exit == 0);
  auto lines = answer_lines(r.out);
  REQUIRE(lines.size() == 2);
  auto ns = xml::parse_document(kLabDoc);
  CHECK(lines[0] == "1 " + std::to_string(ns[9].start) + " " +
                        std::to_string(ns[9].end));
  CHECK(lines[1] == "2 9 10 11 12 13");
}

TEST_CASE("cli: reach pipeline answers reachability queries") {
  auto dir = make_tmpdir();
  // The condensation/labeling worked example graph.
  std::string g;
  std::vector<std::vector<int>> out{{1, 4}, {2, 3}, {}, {}, {}, {},
                                    {7},    {8},    {9}, {3}, {7, 11}, {9}};
  for (int v = 0; v < 12; ++v) {
    g += std::to_string(v) + "\t";
    for (size_t i = 0; i < out[v].size(); ++i)
      g += (i ? " " : "") + std::to_string(out[v][i]);
    g += "\n";
  }
  write_file(dir / "g.txt", g);
  write_file(dir / "b.txt", "0 2\n10 2\n2 0\n");
  auto r = run_cmd(kBin + " --app reach --graph " + (dir / "g.txt").string() +
                   " --batch " + (dir / "b.txt").string());
  REQUIRE(r.exit == 0);
  auto lines = answer_lines(r.out);
  REQUIRE(lines.size() == 3);
  CHECK(split_ws(lines[0])[3] == "TRUE");
  CHECK(split_ws(lines[1])[3] == "FALSE");
  CHECK(split_ws(lines[2])[3] == "FALSE");
}

TEST_CASE("cli: terrain DEM queries with and without splitting") {
  auto dir = make_tmpdir();
  write_file(dir / "dem.txt",
             "3 3 1\n0 0 0 0 0 0 0 0 0\n");
  write_file(dir / "b.txt", "0 2\n0 8\n");
  for (const char* eps : {"", " --eps 0.25"}) {
    auto r = run_cmd(kBin + " --app terrain --graph " +
                     (dir / "dem.txt").string() + " --batch " +
                     (dir / "b.txt").string() + eps);
    REQUIRE(r.exit == 0);
    auto lines = answer_lines(r.out);
    REQUIRE(lines.size() >= 2);
    // Answer line `qid dist hops supersteps`; path lines follow.
    CHECK(terrain::parse_f(split_ws(lines[0])[1]) == doctest::Approx(2.0));
  }
}

TEST_CASE("cli: gkws console on converted triples") {
  auto dir = make_tmpdir();
  write_file(dir / "t.txt",
             "Tom\tsupervises\tPeter\tR\n"
             "Peter\tage\t25\tL\n"
             "Peter\tknows\tMary\tR\n");
  write_file(dir / "in.txt", "age\nsupervises --hops=1\nquit\n");
  auto r = run_cmd(kBin + " --app gkws --graph " + (dir / "t.txt").string() +
                   " < " + (dir / "in.txt").string());
  REQUIRE(r.exit == 0);
  auto lines = answer_lines(r.out);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "1 0 age 2 2");
  CHECK(lines[1] == "1 1 age 2 1");
  CHECK(lines[2] == "2 0 supervises 1 1");
}

TEST_CASE("cli: quit triggers end-of-job graph dump") {
  auto dir = make_tmpdir();
  write_file(dir / "g.txt", "0\t1\n1\t0 2\n2\t1\n");
  write_file(dir / "in.txt", "quit\n");
  auto r = run_cmd(kBin + " --app ppsp --graph " + (dir / "g.txt").string() +
                   " --output " + (dir / "out").string() + " < " +
                   (dir / "in.txt").string());
  REQUIRE(r.exit == 0);
  auto dumped = read_file(dir / "out" / "graph.txt");
  size_t n = 0;
  for (char c : dumped) n += c == '\n';
  CHECK(n == 3);
}
