// Operator console for the query engine: loads a graph, runs any required
// indexing job, then serves queries interactively (REPL) or from a batch
// file, reporting per-query and per-run statistics.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "qgl/apps/gkws.hpp"
#include "qgl/apps/ppsp.hpp"
#include "qgl/apps/reach.hpp"
#include "qgl/apps/terrain.hpp"
#include "qgl/apps/xml.hpp"
#include "qgl/engine.hpp"
#include "qgl/xmldoc.hpp"

namespace fs = std::filesystem;
using namespace qgl;

namespace {

double now_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Type-erased engine handle so the console/batch drivers are app-agnostic.
struct Session {
  virtual ~Session() = default;
  virtual QueryId enqueue(const std::string& q) = 0;
  virtual void run() = 0;
  virtual std::vector<QueryResult> take_results() = 0;
  virtual size_t num_vertices() const = 0;
  virtual uint64_t round_count() const = 0;
  virtual uint64_t barrier_count() const = 0;
  virtual std::vector<std::string> dump_graph() = 0;
};

template <class App>
struct SessionT final : Session {
  Engine<App> eng;
  SessionT(App app, const EngineConfig& cfg) : eng(std::move(app), cfg) {}
  QueryId enqueue(const std::string& q) override { return eng.enqueue(q); }
  void run() override { eng.run_until_idle(); }
  std::vector<QueryResult> take_results() override {
    return eng.take_results();
  }
  size_t num_vertices() const override { return eng.num_vertices(); }
  uint64_t round_count() const override { return eng.round_count(); }
  uint64_t barrier_count() const override { return eng.barrier_count(); }
  std::vector<std::string> dump_graph() override {
    if constexpr (requires(App a, VertexId id,
                           const typename App::VValue& v) {
                    { a.dump_vdata(id, v) } -> std::same_as<std::string>;
                  }) {
      return eng.dump_graph_lines();
    } else {
      return {};
    }
  }
};

struct Options {
  std::string app;
  std::string graph;
  int workers = 2;
  int capacity = 8;
  std::string output = "console";
  std::string batch;
  std::string transport = "in-process";
  int hubs = 5;
  std::string degree_mode = "undirected";
  double eps = 0.0;  // 0 = one segment per cell edge (no splitting)
  int hops = 3;
};

ppsp::DegreeMode parse_degree_mode(const std::string& s) {
  if (s == "undirected") return ppsp::DegreeMode::Undirected;
  if (s == "in") return ppsp::DegreeMode::In;
  if (s == "out") return ppsp::DegreeMode::Out;
  if (s == "inout") return ppsp::DegreeMode::InOut;
  throw std::runtime_error("bad --degree-mode: " + s);
}

std::string usage_hint(const std::string& app) {
  if (app == "xml")
    return "usage: <slca|slca-aligned|elca|maxmatch> <keyword> [keyword...]";
  if (app == "terrain") return "usage: <s> <t> [--no-early-term]";
  if (app == "gkws") return "usage: <keyword> [keyword...] [--hops=N]";
  return "usage: <s> <t>";
}

std::unique_ptr<Session> build_session(const Options& opt,
                                       const EngineConfig& cfg) {
  if (opt.app == "ppsp") {
    auto s = std::make_unique<SessionT<ppsp::BiBfsApp>>(ppsp::BiBfsApp{}, cfg);
    s->eng.load_lines(read_lines(opt.graph));
    return s;
  }
  if (opt.app == "ppsp-hub2") {
    if (opt.hubs < 1) throw std::runtime_error("--hubs must be >= 1");
    // Index job: |H| BFS queries on the loaded graph, then reload the
    // labeled dump into the query app.
    Engine<ppsp::Hub2IndexApp> idx(ppsp::Hub2IndexApp{}, cfg);
    idx.load_lines(read_lines(opt.graph));
    auto hubs = ppsp::hub2_build_index(idx, size_t(opt.hubs),
                                       parse_degree_mode(opt.degree_mode));
    std::cerr << "hub2 index: " << hubs.size() << " hubs\n";
    auto s =
        std::make_unique<SessionT<ppsp::Hub2QueryApp>>(ppsp::Hub2QueryApp{},
                                                       cfg);
    s->eng.load_lines(idx.dump_graph_lines());
    return s;
  }
  if (opt.app == "xml") {
    // Level precompute runs as its own job before queries are served.
    auto nodes = xml::parse_document(read_file(opt.graph));
    Engine<xmlkw::XmlLevelApp> lv(xmlkw::XmlLevelApp{}, cfg);
    lv.load_lines(xml::node_lines(nodes));
    lv.enqueue("levels");
    lv.run_until_idle();
    for (auto& r : lv.take_results())
      if (r.error) throw std::runtime_error("level job failed: " + r.error_msg);
    auto s = std::make_unique<SessionT<xmlkw::XmlApp>>(xmlkw::XmlApp{}, cfg);
    s->eng.load_lines(lv.dump_graph_lines());
    return s;
  }
  if (opt.app == "terrain") {
    if (opt.eps < 0) throw std::runtime_error("--eps must be >= 0");
    auto dem = terrain::parse_dem(read_file(opt.graph));
    double eps = opt.eps > 0 ? opt.eps : dem.spacing;
    auto net = terrain::build_network(dem, eps);
    std::cerr << "terrain network: " << net.pos.size() << " vertices, "
              << net.edge_count() << " edges\n";
    auto s = std::make_unique<SessionT<terrain::SsspApp>>(terrain::SsspApp{},
                                                          cfg);
    s->eng.load_lines(net.lines());
    return s;
  }
  if (opt.app == "reach") {
    // Label pipeline: condense -> dfs -> level -> yes -> no -> dump.
    auto labeled = reach::build_reach_index(read_lines(opt.graph),
                                            cfg.workers);
    auto s = std::make_unique<SessionT<reach::ReachQueryApp>>(
        reach::ReachQueryApp{}, cfg);
    s->eng.load_lines(labeled);
    return s;
  }
  if (opt.app == "gkws") {
    if (opt.hops < 0) throw std::runtime_error("--hops must be >= 0");
    gkws::RdfGkwsApp app;
    app.default_hops = uint32_t(opt.hops);
    auto s = std::make_unique<SessionT<gkws::RdfGkwsApp>>(std::move(app), cfg);
    s->eng.load_vertices(gkws::convert_triples(read_lines(opt.graph)));
    return s;
  }
  throw std::runtime_error("unknown --app: " + opt.app);
}

std::string stats_line(const QueryResult& r, size_t nverts) {
  double access = nverts ? double(r.vq_allocs) / double(nverts) : 0.0;
  char buf[160];
  snprintf(buf, sizeof(buf),
           "# qid=%u supersteps=%u rounds=%llu vq=%llu access=%.4f wall=%.6fs",
           r.qid, r.supersteps, (unsigned long long)r.rounds_occupied,
           (unsigned long long)r.vq_allocs, access, r.wall_seconds);
  return buf;
}

// Stats invariant: rounds spanned by the run, from admission bookkeeping.
uint64_t reported_rounds(const std::vector<QueryResult>& rs) {
  uint64_t lo = ~0ull, hi = 0;
  for (auto& r : rs) {
    lo = std::min(lo, r.admitted_round);
    hi = std::max(hi, r.admitted_round + r.rounds_occupied);
  }
  return rs.empty() ? 0 : hi - lo;
}

void write_batch_outputs(const std::string& dir,
                         std::vector<QueryResult> rs, size_t nverts) {
  std::sort(rs.begin(), rs.end(),
            [](const auto& a, const auto& b) { return a.qid < b.qid; });
  fs::create_directories(dir);
  std::ofstream stats(fs::path(dir) / "_stats.tsv");
  stats << "qid\tsupersteps\trounds\tvq\taccess\twall_s\terror\n";
  for (auto& r : rs) {
    std::ofstream out(fs::path(dir) / (std::to_string(r.qid) + ".txt"));
    if (r.error) {
      out << "ERROR " << r.error_msg << "\n";
    } else {
      for (auto& l : r.lines) out << l << "\n";
    }
    double access = nverts ? double(r.vq_allocs) / double(nverts) : 0.0;
    stats << r.qid << "\t" << r.supersteps << "\t" << r.rounds_occupied
          << "\t" << r.vq_allocs << "\t" << access << "\t" << r.wall_seconds
          << "\t" << (r.error ? 1 : 0) << "\n";
  }
}

int run_batch(Session& s, const Options& opt) {
  std::vector<QueryResult> all;
  for (auto& line : read_lines(opt.batch)) {
    if (!split_ws(line).empty()) s.enqueue(line);
  }
  s.run();
  all = s.take_results();
  size_t errors = 0;
  for (auto& r : all) errors += r.error ? 1 : 0;
  if (opt.output == "console") {
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.qid < b.qid; });
    for (auto& r : all) {
      if (r.error) {
        std::cout << r.qid << " ERROR " << r.error_msg << "\n";
      } else {
        for (auto& l : r.lines) std::cout << l << "\n";
      }
      std::cout << stats_line(r, s.num_vertices()) << "\n";
    }
  } else {
    write_batch_outputs(opt.output, all, s.num_vertices());
  }
  std::cout << "batch done: " << all.size() << " queries, " << errors
            << " errors, reported_rounds=" << reported_rounds(all)
            << " engine_rounds=" << s.round_count()
            << " barriers=" << s.barrier_count() << "\n";
  return 0;
}

int run_console(Session& s, const Options& opt) {
  std::string line;
  while (true) {
    std::cout << "> " << std::flush;
    if (!std::getline(std::cin, line)) break;
    if (split_ws(line).empty()) continue;  // empty line: re-prompt
    std::string cmd(split_ws(line)[0]);
    if (cmd == "quit" || cmd == "exit") break;
    if (cmd == "help") {
      std::cout << usage_hint(opt.app) << "\n";
      continue;
    }
    s.enqueue(line);
    s.run();
    for (auto& r : s.take_results()) {
      if (r.error) {
        std::cout << "error: " << r.error_msg << "\n"
                  << usage_hint(opt.app) << "\n";
        continue;
      }
      for (auto& l : r.lines) std::cout << l << "\n";
      std::cout << stats_line(r, s.num_vertices()) << "\n";
    }
  }
  // End-of-job dump: save the (possibly label-augmented) graph.
  if (opt.output != "console") {
    auto lines = s.dump_graph();
    if (!lines.empty()) {
      fs::create_directories(opt.output);
      std::ofstream out(fs::path(opt.output) / "graph.txt");
      for (auto& l : lines) out << l << "\n";
      std::cout << "graph saved: " << lines.size() << " vertices\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App cli{"vertex-centric graph query engine console"};
  cli.add_option("--app", opt.app, "application")
      ->required()
      ->check(CLI::IsMember(
          {"ppsp", "ppsp-hub2", "xml", "terrain", "reach", "gkws"}))
      ->envname("QGL_APP");
  cli.add_option("--graph", opt.graph, "graph/document/DEM/triples file")
      ->required()
      ->check(CLI::ExistingFile)
      ->envname("QGL_GRAPH");
  cli.add_option("--workers", opt.workers, "worker count")
      ->check(CLI::PositiveNumber)
      ->envname("QGL_WORKERS");
  cli.add_option("--capacity", opt.capacity, "queries per super-round")
      ->check(CLI::PositiveNumber)
      ->envname("QGL_CAPACITY");
  cli.add_option("--output", opt.output,
                 "results directory, or 'console' for stdout")
      ->envname("QGL_OUTPUT");
  cli.add_option("--batch", opt.batch, "query file (one query per line)")
      ->check(CLI::ExistingFile)
      ->envname("QGL_BATCH");
  cli.add_option("--transport", opt.transport, "worker transport")
      ->check(CLI::IsMember({"in-process", "socket"}))
      ->envname("QGL_TRANSPORT");
  cli.add_option("--hubs", opt.hubs, "hub count k (ppsp-hub2)")
      ->envname("QGL_HUBS");
  cli.add_option("--degree-mode", opt.degree_mode,
                 "hub selection degree (ppsp-hub2)")
      ->check(CLI::IsMember({"undirected", "in", "out", "inout"}))
      ->envname("QGL_DEGREE_MODE");
  cli.add_option("--eps", opt.eps,
                 "terrain edge-split tolerance (0 = no splitting)")
      ->envname("QGL_EPS");
  cli.add_option("--hops", opt.hops, "gkws default hop cap")
      ->envname("QGL_HOPS");
  CLI11_PARSE(cli, argc, argv);

  try {
    EngineConfig cfg;
    cfg.workers = opt.workers;
    cfg.capacity = opt.capacity;
    cfg.transport = opt.transport == "socket" ? TransportKind::Socket
                                              : TransportKind::InProcess;
    double t0 = now_seconds();
    auto session = build_session(opt, cfg);
    std::cerr << "loaded " << session->num_vertices() << " vertices in "
              << now_seconds() - t0 << "s\n";
    if (!opt.batch.empty()) return run_batch(*session, opt);
    return run_console(*session, opt);
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 1;
  }
}
