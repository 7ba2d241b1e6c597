#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "qgl/base.hpp"
#include "qgl/codec.hpp"
#include "qgl/pool.hpp"
#include "qgl/socket_mesh.hpp"

namespace qgl {

// An application plugs into the engine as a single class App providing:
//
//   types:   VValue (per-vertex data incl. adjacency), QValue (per-vertex
//            per-query state), Message, QueryContent, and optionally AggValue.
//   methods: VertexId parse_vertex(std::string_view, VValue&)
//            QueryContent parse_query(std::string_view)
//            QValue init_value(VertexId, const VValue&, const QueryContent&)
//            void compute(Context<App>&, std::span<Message>)
//            void init_activate(InitContext<App>&, const QueryContent&)
//   optional: load2idx, validate, static combine, agg_init/agg_merge/
//            agg_finalize/agg_round, dump_vertex, finalize_answer, dump_vdata.
//
// One App instance lives on each worker (it may carry a worker-local index);
// a prototype instance serves the control thread for parsing and answer
// assembly.

template <class App>
class Engine;

namespace detail {
template <class App, class = void>
struct AggOf {
  using type = std::monostate;
};
template <class App>
struct AggOf<App, std::void_t<typename App::AggValue>> {
  using type = typename App::AggValue;
};
}  // namespace detail

struct DumpFragment {
  VertexId vid;
  std::string line;
};

class DumpWriter {
 public:
  explicit DumpWriter(std::vector<DumpFragment>* out) : out_(out) {}
  void emit(VertexId vid, std::string line) {
    out_->push_back(DumpFragment{vid, std::move(line)});
  }

 private:
  std::vector<DumpFragment>* out_;
};

struct QueryControl {
  bool terminate = false;
  void force_terminate() { terminate = true; }
};

template <class Agg>
struct QueryInfo {
  QueryId qid = 0;
  uint32_t supersteps = 0;
  bool force_terminated = false;
  bool error = false;
  const Agg* final_agg = nullptr;
};

// Per-vertex call context; routes all application accessors through the
// currently bound (query, vertex) pair.
template <class App>
class Context {
 public:
  using Agg = typename detail::AggOf<App>::type;

  Context() = default;
  Context(Engine<App>* eng, typename Engine<App>::Worker* w,
          typename Engine<App>::LocalQuery* lq,
          typename Engine<App>::QueryMeta* meta,
          typename Engine<App>::VertexSlot* slot,
          typename Engine<App>::VQEntry* entry)
      : eng_(eng), w_(w), lq_(lq), meta_(meta), slot_(slot), entry_(entry) {}

  uint32_t superstep() const { return bound()->step; }
  const typename App::QueryContent& query() const { return lq_checked()->content; }
  VertexId id() const { return slot_checked()->id; }
  const typename App::VValue& value() const { return slot_checked()->value; }
  typename App::QValue& qvalue() { return entry_checked()->value; }
  const typename App::QValue& qvalue() const { return entry_checked()->value; }

  void vote_to_halt() { entry_checked()->active = false; }
  void force_terminate() { lq_checked()->force_term_local = true; }

  void send(VertexId dest, typename App::Message msg) {
    auto* lq = lq_checked();
    lq->outboxes[owner_of(dest, eng_->config().workers)].emplace_back(
        dest, std::move(msg));
    ++lq->sent_round;
  }

  void aggregate(const Agg& contribution) {
    static_assert(!std::is_same_v<Agg, std::monostate>,
                  "app has no aggregator");
    w_->app.agg_merge(lq_checked()->partial, contribution);
  }

  // Aggregated value finalized at the end of the previous superstep, or
  // nullptr in superstep 1.
  const Agg* agg_prev() const {
    return bound()->agg_prev_valid ? &bound()->agg_prev : nullptr;
  }

 private:
  typename Engine<App>::QueryMeta* bound() const {
    if (!meta_) throw EngineDefect("context accessor called with no binding");
    return meta_;
  }
  typename Engine<App>::LocalQuery* lq_checked() const {
    if (!lq_) throw EngineDefect("context accessor called with no binding");
    return lq_;
  }
  typename Engine<App>::VertexSlot* slot_checked() const {
    if (!slot_) throw EngineDefect("context accessor called with no binding");
    return slot_;
  }
  typename Engine<App>::VQEntry* entry_checked() const {
    if (!entry_) throw EngineDefect("context accessor called with no binding");
    return entry_;
  }

  Engine<App>* eng_ = nullptr;
  typename Engine<App>::Worker* w_ = nullptr;
  typename Engine<App>::LocalQuery* lq_ = nullptr;
  typename Engine<App>::QueryMeta* meta_ = nullptr;
  typename Engine<App>::VertexSlot* slot_ = nullptr;
  typename Engine<App>::VQEntry* entry_ = nullptr;
};

// Worker-side context for init_activate: lookup and activation only, no
// message traffic.
template <class App>
class InitContext {
 public:
  InitContext(Engine<App>* eng, typename Engine<App>::Worker* w,
              typename Engine<App>::LocalQuery* lq, QueryId qid)
      : eng_(eng), w_(w), lq_(lq), qid_(qid) {}

  std::optional<uint32_t> get_vpos(VertexId v) const { return w_->get_vpos(v); }
  size_t num_vertices() const { return w_->varray.size(); }
  VertexId vertex_id(uint32_t pos) const { return w_->varray[pos].id; }
  const typename App::VValue& vertex_value(uint32_t pos) const {
    return w_->varray[pos].value;
  }
  int worker_index() const { return w_->index; }

  void activate(uint32_t pos) {
    auto& e = eng_->vq_get_or_init(*w_, pos, qid_, *lq_);
    e.active = true;
    if (!e.in_frontier) {
      e.in_frontier = true;
      lq_->frontier.push_back(pos);
    }
  }

 private:
  Engine<App>* eng_;
  typename Engine<App>::Worker* w_;
  typename Engine<App>::LocalQuery* lq_;
  QueryId qid_;
};

template <class App>
struct GlobalLookup {
  const Engine<App>* eng;
  bool exists(VertexId v) const { return eng->has_vertex(v); }
};

template <class App>
class Engine {
 public:
  using VValue = typename App::VValue;
  using QValue = typename App::QValue;
  using Message = typename App::Message;
  using QueryContent = typename App::QueryContent;
  using Agg = typename detail::AggOf<App>::type;
  using Ctx = Context<App>;
  using ICtx = InitContext<App>;

  struct VQEntry {
    QValue value{};
    std::vector<Message> inbox;
    bool active = true;
    bool in_frontier = false;
  };

  struct VertexSlot {
    VertexId id = 0;
    VValue value{};
    std::map<QueryId, VQEntry> lut;  // ordered per-vertex query state table
  };

  struct LocalQuery {
    QueryContent content{};
    std::vector<std::vector<std::pair<VertexId, Message>>> outboxes;
    std::vector<uint32_t> frontier;
    std::vector<uint32_t> next_frontier;
    std::vector<uint32_t> touched;  // positions holding a VQ entry
    std::vector<DumpFragment> frags;
    Agg partial{};
    uint64_t sent_round = 0;
    uint64_t delivered_round = 0;
    uint64_t allocs = 0;
    size_t active_after_compute = 0;
    bool force_term_local = false;
    bool error_local = false;
    std::string error_msg_local;
  };

  struct Worker {
    int index = 0;
    App app;
    std::vector<VertexSlot> varray;
    std::unordered_map<VertexId, uint32_t> ht_v;
    std::map<QueryId, LocalQuery> ht_q;

    std::optional<uint32_t> get_vpos(VertexId v) const {
      auto it = ht_v.find(v);
      if (it == ht_v.end()) return std::nullopt;
      return it->second;
    }
  };

  struct QueryMeta {
    QueryId qid = 0;
    std::string text;
    QueryContent content{};
    uint32_t step = 1;
    uint64_t admitted_round = 0;
    Agg agg_prev{};
    bool agg_prev_valid = false;
    bool force_term = false;
    bool finished = false;  // compute done; dump pending next round
    bool error = false;
    std::string error_msg;
    uint32_t supersteps = 0;
    uint64_t messages = 0;
    std::chrono::steady_clock::time_point t_admit;
  };

  Engine(App app, EngineConfig cfg)
      : cfg_(cfg), app0_(std::move(app)), pool_(cfg.workers) {
    if (cfg_.workers < 1) throw EngineDefect("workers must be >= 1");
    if (cfg_.capacity < 1) throw EngineDefect("capacity must be >= 1");
    workers_.reserve(cfg_.workers);
    for (int i = 0; i < cfg_.workers; ++i) {
      workers_.push_back(std::make_unique<Worker>());
      workers_.back()->index = i;
      workers_.back()->app = app0_;
    }
    if (cfg_.transport == TransportKind::Socket)
      mesh_ = std::make_unique<SocketMesh>(cfg_.workers);
  }

  // ---- loading ----

  void load_vertices(std::vector<std::pair<VertexId, VValue>> vertices) {
    for (auto& [id, val] : vertices) {
      Worker& w = *workers_[owner_of(id, cfg_.workers)];
      if (w.ht_v.count(id))
        throw LoadError("duplicate vertex id " + std::to_string(id));
      w.ht_v.emplace(id, static_cast<uint32_t>(w.varray.size()));
      w.varray.push_back(VertexSlot{id, std::move(val), {}});
      ++num_vertices_;
    }
    pool_.run([this](int wi) {
      Worker& w = *workers_[wi];
      if constexpr (requires(App a, const VValue& v, VertexId id, uint32_t p) {
                      a.load2idx(v, id, p);
                    }) {
        for (uint32_t pos = 0; pos < w.varray.size(); ++pos)
          w.app.load2idx(w.varray[pos].value, w.varray[pos].id, pos);
      }
    });
  }

  void load_lines(const std::vector<std::string>& lines) {
    std::vector<std::pair<VertexId, VValue>> parsed;
    parsed.reserve(lines.size());
    size_t lineno = 0;
    for (const auto& line : lines) {
      ++lineno;
      if (line.empty()) continue;
      VValue v{};
      VertexId id;
      try {
        id = app0_.parse_vertex(line, v);
      } catch (const std::exception& e) {
        throw LoadError("line " + std::to_string(lineno) + ": " + e.what());
      }
      parsed.emplace_back(id, std::move(v));
    }
    load_vertices(std::move(parsed));
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open graph file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    load_lines(lines);
  }

  bool has_vertex(VertexId v) const {
    return workers_[owner_of(v, cfg_.workers)]->ht_v.count(v) > 0;
  }

  size_t num_vertices() const { return num_vertices_; }

  // ---- query intake ----

  QueryId enqueue(std::string text) {
    QueryId qid = next_qid_++;
    QueryContent content{};
    std::string err;
    try {
      content = app0_.parse_query(text);
    } catch (const std::exception& e) {
      err = e.what();
      if (err.empty()) err = "query parse error";
    }
    if (err.empty()) {
      if constexpr (requires(App a, const QueryContent& q,
                             const GlobalLookup<App>& g) {
                      { a.validate(q, g) } -> std::convertible_to<std::string>;
                    }) {
        err = app0_.validate(content, GlobalLookup<App>{this});
      }
    }
    if (!err.empty()) {
      QueryResult r;
      r.qid = qid;
      r.text = std::move(text);
      r.error = true;
      r.error_msg = std::move(err);
      results_.push_back(std::move(r));
      return qid;
    }
    std::lock_guard<std::mutex> lk(queue_mu_);
    queue_.push_back(Pending{qid, std::move(text), std::move(content)});
    return qid;
  }

  // ---- rounds ----

  bool idle() const {
    if (!metas_.empty()) return false;
    std::lock_guard<std::mutex> lk(queue_mu_);
    return queue_.empty();
  }

  void run_until_idle() {
    while (!idle()) run_super_round();
  }

  SuperRoundReport run_super_round() {
    ++round_;
    SuperRoundReport report;
    report.round = round_;

    // Admission: fill free capacity from the queue, FIFO.
    std::vector<QueryId> admitted;
    {
      std::lock_guard<std::mutex> lk(queue_mu_);
      while (static_cast<int>(metas_.size()) < cfg_.capacity &&
             !queue_.empty()) {
        Pending p = std::move(queue_.front());
        queue_.pop_front();
        QueryMeta meta;
        meta.qid = p.qid;
        meta.text = std::move(p.text);
        meta.content = p.content;
        meta.admitted_round = round_;
        meta.t_admit = std::chrono::steady_clock::now();
        metas_.emplace(p.qid, std::move(meta));
        for (auto& wp : workers_) {
          LocalQuery lq;
          lq.content = p.content;
          lq.outboxes.resize(cfg_.workers);
          wp->ht_q.emplace(p.qid, std::move(lq));
        }
        admitted.push_back(p.qid);
      }
    }
    report.admitted = admitted;
    if (!admitted.empty()) {
      pool_.run([this, &admitted](int wi) {
        Worker& w = *workers_[wi];
        for (QueryId qid : admitted) {
          LocalQuery& lq = w.ht_q.at(qid);
          ICtx ictx(this, &w, &lq, qid);
          w.app.init_activate(ictx, lq.content);
        }
      });
    }

    // Compute (and dump of queries that finished last round), in parallel.
    pool_.run([this](int wi) { compute_phase(*workers_[wi]); });

    // Collect dumped queries, assemble answers, GC.
    finalize_dumped(report);

    // Merge per-worker flags and aggregator partials; a force-terminated
    // query's outgoing messages are discarded.
    merge_flags_and_aggregate();

    // Message exchange: one barrier for all queries.
    if (cfg_.transport == TransportKind::Socket && cfg_.workers > 1) {
      pool_.run([this](int wi) { exchange_socket(*workers_[wi]); });
    } else {
      pool_.run([this](int wi) { deliver_inprocess(*workers_[wi]); });
    }
    ++barriers_;
    peak_vq_ = std::max(peak_vq_, current_vq_.load());

    // Delivery-side errors (unknown destination ids).
    for (auto& [qid, meta] : metas_) {
      if (meta.finished) continue;
      for (auto& wp : workers_) {
        LocalQuery& lq = wp->ht_q.at(qid);
        if (lq.error_local && !meta.error) {
          meta.error = true;
          meta.error_msg = lq.error_msg_local;
          meta.force_term = true;
        }
      }
      if (meta.error && !meta.finished) {
        meta.finished = true;
        meta.supersteps = meta.step;
      }
    }

    // Clear outboxes and count traffic; decide per-query termination.
    for (auto& [qid, meta] : metas_) {
      uint64_t sent = 0, delivered = 0;
      size_t active = 0;
      for (auto& wp : workers_) {
        LocalQuery& lq = wp->ht_q.at(qid);
        for (auto& box : lq.outboxes) box.clear();
        sent += lq.sent_round;
        delivered += lq.delivered_round;
        active += lq.active_after_compute;
        lq.sent_round = 0;
        lq.delivered_round = 0;
      }
      report.messages_sent += sent;
      report.messages_delivered += delivered;
      if (meta.finished) continue;
      meta.messages += sent;
      if (meta.force_term || (sent == 0 && active == 0)) {
        meta.finished = true;
        meta.supersteps = meta.step;
      } else {
        ++meta.step;
      }
    }

    report.active_queries = static_cast<int>(metas_.size());
    reports_.push_back(report);
    return report;
  }

  // ---- results & stats ----

  std::vector<QueryResult> take_results() {
    std::vector<QueryResult> out;
    out.swap(results_);
    return out;
  }
  const std::vector<QueryResult>& results() const { return results_; }

  uint64_t round_count() const { return round_; }
  uint64_t barrier_count() const { return barriers_; }
  int64_t current_vq_entries() const { return current_vq_.load(); }
  int64_t peak_vq_entries() const { return peak_vq_; }
  size_t live_query_count() const { return metas_.size(); }
  const std::vector<SuperRoundReport>& reports() const { return reports_; }
  const EngineConfig& config() const { return cfg_; }
  Worker& worker(int i) { return *workers_[i]; }
  const Worker& worker(int i) const { return *workers_[i]; }
  App& prototype_app() { return app0_; }

  // Sum over all slots of VQ entries held for query q.
  size_t vq_entries_for(QueryId q) const {
    size_t n = 0;
    for (auto& wp : workers_)
      for (auto& slot : wp->varray) n += slot.lut.count(q);
    return n;
  }

  // Fold a function over the per-worker app instances (index inspection).
  template <class F>
  void for_each_worker_app(F&& f) {
    for (auto& wp : workers_) f(wp->app);
  }

  // ---- end-of-job graph dump ----

  std::vector<std::string> dump_graph_lines() {
    static_assert(requires(App a, VertexId id, const VValue& v) {
      { a.dump_vdata(id, v) } -> std::convertible_to<std::string>;
    });
    std::vector<std::pair<VertexId, std::string>> rows;
    for (auto& wp : workers_)
      for (auto& slot : wp->varray)
        rows.emplace_back(slot.id, app0_.dump_vdata(slot.id, slot.value));
    std::sort(rows.begin(), rows.end(),
              [](auto& a, auto& b) { return a.first < b.first; });
    std::vector<std::string> lines;
    lines.reserve(rows.size());
    for (auto& r : rows) lines.push_back(std::move(r.second));
    return lines;
  }

  void dump_graph_file(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write graph file: " + path);
    for (auto& line : dump_graph_lines()) out << line << '\n';
  }

 private:
  friend class Context<App>;
  friend class InitContext<App>;

  struct Pending {
    QueryId qid;
    std::string text;
    QueryContent content;
  };

  VQEntry& vq_get_or_init(Worker& w, uint32_t pos, QueryId qid,
                          LocalQuery& lq) {
    VertexSlot& slot = w.varray[pos];
    auto it = slot.lut.find(qid);
    if (it == slot.lut.end()) {
      VQEntry e;
      e.value = w.app.init_value(slot.id, slot.value, lq.content);
      it = slot.lut.emplace(qid, std::move(e)).first;
      lq.touched.push_back(pos);
      ++lq.allocs;
      current_vq_.fetch_add(1, std::memory_order_relaxed);
    }
    return it->second;
  }

  Agg make_agg_init(App& app) {
    if constexpr (requires { app.agg_init(); }) {
      return app.agg_init();
    } else {
      return Agg{};
    }
  }

  void compute_phase(Worker& w) {
    for (auto& [qid, lq] : w.ht_q) {
      QueryMeta& meta = metas_.at(qid);
      if (meta.finished) {
        dump_query_worker(w, qid, lq, meta);
        continue;
      }
      lq.partial = make_agg_init(w.app);
      lq.force_term_local = false;
      lq.next_frontier.clear();
      for (uint32_t pos : lq.frontier) {
        VertexSlot& slot = w.varray[pos];
        VQEntry& e = slot.lut.at(qid);
        e.in_frontier = false;
        if (!e.active && e.inbox.empty()) continue;
        if (cfg_.shuffle_inboxes && e.inbox.size() > 1)
          shuffle_inbox(e.inbox, qid, slot.id);
        Ctx ctx(this, &w, &lq, &meta, &slot, &e);
        try {
          w.app.compute(ctx, std::span<Message>(e.inbox));
        } catch (const std::exception& ex) {
          lq.error_local = true;
          lq.error_msg_local = ex.what();
          lq.force_term_local = true;
        }
        e.inbox.clear();
        if (lq.error_local) break;
        if (e.active) {
          e.in_frontier = true;
          lq.next_frontier.push_back(pos);
        }
      }
      lq.frontier.swap(lq.next_frontier);
      lq.active_after_compute = lq.frontier.size();
      if (cfg_.combiner_enabled) maybe_combine(lq);
    }
  }

  void shuffle_inbox(std::vector<Message>& inbox, QueryId qid, VertexId vid) {
    uint64_t seed = cfg_.shuffle_seed;
    seed = seed * 0x9e3779b97f4a7c15ULL + round_;
    seed = seed * 0x9e3779b97f4a7c15ULL + qid;
    seed = seed * 0x9e3779b97f4a7c15ULL + static_cast<uint64_t>(vid);
    std::mt19937_64 rng(seed);
    std::shuffle(inbox.begin(), inbox.end(), rng);
  }

  void maybe_combine(LocalQuery& lq) {
    if constexpr (requires(Message& a, const Message& b) {
                    App::combine(a, b);
                  }) {
      for (auto& box : lq.outboxes) {
        if (box.size() < 2) continue;
        std::stable_sort(
            box.begin(), box.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
        size_t out = 0;
        for (size_t i = 0; i < box.size();) {
          size_t j = i + 1;
          while (j < box.size() && box[j].first == box[i].first) {
            App::combine(box[i].second, box[j].second);
            ++j;
          }
          box[out++] = std::move(box[i]);
          i = j;
        }
        box.resize(out);
      }
    }
  }

  void dump_query_worker(Worker& w, QueryId qid, LocalQuery& lq,
                         QueryMeta& meta) {
    if (meta.error) return;
    if constexpr (requires(App a, DumpWriter& dw, VertexId id, VValue& v,
                           const QValue& qv, const QueryContent& q) {
                    a.dump_vertex(dw, id, v, qv, q);
                  }) {
      std::vector<uint32_t> order = lq.touched;
      std::sort(order.begin(), order.end(),
                [&](uint32_t a, uint32_t b) {
                  return w.varray[a].id < w.varray[b].id;
                });
      DumpWriter writer(&lq.frags);
      for (uint32_t pos : order) {
        VertexSlot& slot = w.varray[pos];
        auto it = slot.lut.find(qid);
        if (it == slot.lut.end()) continue;
        w.app.dump_vertex(writer, slot.id, slot.value, it->second.value,
                          lq.content);
      }
    }
  }

  void finalize_dumped(SuperRoundReport& report) {
    std::vector<QueryId> done;
    for (auto& [qid, meta] : metas_)
      if (meta.finished) done.push_back(qid);
    for (QueryId qid : done) {
      QueryMeta& meta = metas_.at(qid);
      QueryResult r;
      r.qid = qid;
      r.text = meta.text;
      r.error = meta.error;
      r.error_msg = meta.error_msg;
      r.supersteps = meta.supersteps;
      r.rounds_occupied = round_ - meta.admitted_round + 1;
      r.messages = meta.messages;
      r.admitted_round = meta.admitted_round;
      r.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        meta.t_admit)
              .count();

      std::vector<DumpFragment> frags;
      for (auto& wp : workers_) {
        LocalQuery& lq = wp->ht_q.at(qid);
        r.vq_allocs += lq.allocs;
        for (auto& f : lq.frags) frags.push_back(std::move(f));
      }
      std::sort(frags.begin(), frags.end(), [](const auto& a, const auto& b) {
        return a.vid != b.vid ? a.vid < b.vid : a.line < b.line;
      });
      if (!meta.error) {
        QueryInfo<Agg> info;
        info.qid = qid;
        info.supersteps = meta.supersteps;
        info.force_terminated = meta.force_term;
        info.error = meta.error;
        info.final_agg = meta.agg_prev_valid ? &meta.agg_prev : nullptr;
        if constexpr (requires(App a, const QueryContent& q,
                               const QueryInfo<Agg>& i,
                               std::vector<DumpFragment>& f) {
                        {
                          a.finalize_answer(q, i, f)
                        } -> std::convertible_to<std::vector<std::string>>;
                      }) {
          r.lines = app0_.finalize_answer(meta.content, info, frags);
        } else {
          for (auto& f : frags) r.lines.push_back(std::move(f.line));
        }
      }
      results_.push_back(std::move(r));
      gc_query(qid);
      report.finished.push_back(qid);
    }
  }

  void gc_query(QueryId qid) {
    for (auto& wp : workers_) {
      Worker& w = *wp;
      auto it = w.ht_q.find(qid);
      if (it == w.ht_q.end()) continue;
      for (uint32_t pos : it->second.touched) w.varray[pos].lut.erase(qid);
      current_vq_.fetch_sub(
          static_cast<int64_t>(it->second.touched.size()),
          std::memory_order_relaxed);
      w.ht_q.erase(it);
    }
    metas_.erase(qid);
  }

  void merge_flags_and_aggregate() {
    for (auto& [qid, meta] : metas_) {
      if (meta.finished) continue;
      bool ft = meta.force_term;
      Agg merged = make_agg_init(app0_);
      for (auto& wp : workers_) {
        LocalQuery& lq = wp->ht_q.at(qid);
        ft = ft || lq.force_term_local;
        if (lq.error_local && !meta.error) {
          meta.error = true;
          meta.error_msg = lq.error_msg_local;
        }
        if constexpr (!std::is_same_v<Agg, std::monostate>) {
          app0_.agg_merge(merged, lq.partial);
        }
      }
      if (meta.error) ft = true;
      if constexpr (!std::is_same_v<Agg, std::monostate>) {
        Agg fin = std::move(merged);
        if constexpr (requires(App a, Agg m, const Agg* p, uint32_t s) {
                        { a.agg_finalize(std::move(m), p, s) } -> std::convertible_to<Agg>;
                      }) {
          fin = app0_.agg_finalize(
              std::move(fin), meta.agg_prev_valid ? &meta.agg_prev : nullptr,
              meta.step);
        }
        if constexpr (requires(App a, const Agg& v, QueryControl& c,
                               uint32_t s) { a.agg_round(v, c, s); }) {
          QueryControl qc;
          app0_.agg_round(fin, qc, meta.step);
          ft = ft || qc.terminate;
        }
        meta.agg_prev = std::move(fin);
        meta.agg_prev_valid = true;
      }
      meta.force_term = ft;
      if (ft) {
        // Terminates at the end of this superstep: pending traffic is moot.
        for (auto& wp : workers_) {
          LocalQuery& lq = wp->ht_q.at(qid);
          for (auto& box : lq.outboxes) box.clear();
        }
      }
    }
  }

  void deliver_to(Worker& wj, QueryId qid, LocalQuery& lqj,
                  std::vector<std::pair<VertexId, Message>>& box) {
    for (auto& [vid, msg] : box) {
      auto pos = wj.get_vpos(vid);
      if (!pos) {
        if (cfg_.on_bad_dest == BadDestPolicy::Error && !lqj.error_local) {
          lqj.error_local = true;
          lqj.error_msg_local =
              "message sent to unknown vertex id " + std::to_string(vid);
        }
        continue;
      }
      VQEntry& e = vq_get_or_init(wj, *pos, qid, lqj);
      e.inbox.push_back(std::move(msg));
      e.active = true;
      if (!e.in_frontier) {
        e.in_frontier = true;
        lqj.frontier.push_back(*pos);
      }
      ++lqj.delivered_round;
    }
  }

  void deliver_inprocess(Worker& wj) {
    for (auto& wp : workers_) {
      Worker& wi = *wp;
      for (auto& [qid, lqi] : wi.ht_q) {
        QueryMeta& meta = metas_.at(qid);
        if (meta.finished) continue;
        auto& box = lqi.outboxes[wj.index];
        if (box.empty()) continue;
        deliver_to(wj, qid, wj.ht_q.at(qid), box);
      }
    }
  }

  void exchange_socket(Worker& w) {
    // Frame per (query, destination worker): u32 query id, u32 pair count,
    // then (u64 vertex id, encoded message) pairs.
    std::vector<std::vector<uint8_t>> to_peer(cfg_.workers);
    for (auto& [qid, lq] : w.ht_q) {
      QueryMeta& meta = metas_.at(qid);
      if (meta.finished) continue;
      for (int j = 0; j < cfg_.workers; ++j) {
        auto& box = lq.outboxes[j];
        if (box.empty()) continue;
        if (j == w.index) continue;  // self-deliveries stay in memory
        std::vector<uint8_t> payload;
        put_u32(payload, qid);
        put_u32(payload, static_cast<uint32_t>(box.size()));
        for (auto& [vid, msg] : box) {
          put_u64(payload, static_cast<uint64_t>(vid));
          Codec<Message>::write(payload, msg);
        }
        put_u32(to_peer[j], static_cast<uint32_t>(payload.size()));
        to_peer[j].insert(to_peer[j].end(), payload.begin(), payload.end());
      }
    }
    auto frames = mesh_->exchange(w.index, std::move(to_peer));
    // Local deliveries first, then everything that came over the wire.
    for (auto& [qid, lq] : w.ht_q) {
      QueryMeta& meta = metas_.at(qid);
      if (meta.finished) continue;
      auto& box = lq.outboxes[w.index];
      if (!box.empty()) deliver_to(w, qid, lq, box);
    }
    for (auto& frame : frames) {
      const uint8_t* p = frame.data();
      const uint8_t* end = p + frame.size();
      uint32_t qid = get_u32(p, end);
      uint32_t count = get_u32(p, end);
      auto it = w.ht_q.find(qid);
      std::vector<std::pair<VertexId, Message>> box;
      box.reserve(count);
      for (uint32_t k = 0; k < count; ++k) {
        VertexId vid = static_cast<VertexId>(get_u64(p, end));
        box.emplace_back(vid, Codec<Message>::read(p, end));
      }
      if (it != w.ht_q.end()) deliver_to(w, qid, it->second, box);
    }
  }

  EngineConfig cfg_;
  App app0_;
  WorkerPool pool_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::unique_ptr<SocketMesh> mesh_;

  mutable std::mutex queue_mu_;
  std::deque<Pending> queue_;
  QueryId next_qid_ = 1;

  std::map<QueryId, QueryMeta> metas_;
  std::vector<QueryResult> results_;
  std::vector<SuperRoundReport> reports_;

  uint64_t round_ = 0;
  uint64_t barriers_ = 0;
  size_t num_vertices_ = 0;
  std::atomic<int64_t> current_vq_{0};
  int64_t peak_vq_ = 0;
};

}  // namespace qgl
