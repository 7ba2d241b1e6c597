#pragma once

// Point-to-point reachability on directed graphs.
//
// Preprocessing (sequential): condense strongly connected components into a
// DAG, then number it with a deterministic DFS forest.  Three label families
// are then built by vertex-centric jobs on that DAG:
//   level    l(v)  = longest hop count from any zero-in-degree root
//   yes(v)   = [pre(v), max pre over vertices reachable from v]
//   no(v)    = [min post over vertices reachable from v, post(v)]
// Queries run a bidirectional BFS on the DAG with three independently
// toggleable pruning rules derived from those labels.

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qgl/base.hpp"
#include "qgl/engine.hpp"

namespace qgl::reach {

// ---------------------------------------------------------------------------
// Sequential preprocessing.

struct OrigGraph {
  std::map<VertexId, std::vector<VertexId>> out;
};

// Accepts `id \t out-list` lines; a `| in-list` suffix in the adjacency
// field is ignored (in-edges are recomputed).
inline OrigGraph parse_orig_lines(const std::vector<std::string>& lines) {
  OrigGraph g;
  for (const auto& line : lines) {
    if (line.empty()) continue;
    auto fields = split_view(line, '\t');
    if (fields.empty()) throw LoadError("empty graph line");
    VertexId id = parse_i64(fields[0]);
    if (g.out.count(id))
      throw LoadError("duplicate vertex id " + std::to_string(id));
    auto& out = g.out[id];
    if (fields.size() > 1) {
      std::string_view adj = fields[1];
      if (size_t bar = adj.find('|'); bar != std::string_view::npos)
        adj = adj.substr(0, bar);
      for (auto tok : split_ws(adj)) out.push_back(parse_i64(tok));
    }
    std::sort(out.begin(), out.end());
  }
  for (auto& [id, out] : g.out)
    for (VertexId nb : out)
      if (!g.out.count(nb))
        throw LoadError("edge to unknown vertex " + std::to_string(nb));
  return g;
}

struct SccMapping {
  std::map<VertexId, VertexId> scc_of;                  // original -> SCC id
  std::map<VertexId, std::vector<VertexId>> members;    // SCC id -> originals
  std::map<VertexId, std::vector<VertexId>> dag_out;    // condensed DAG
  std::map<VertexId, std::vector<VertexId>> dag_in;
};

// Iterative Tarjan condensation; SCC id = smallest member vertex id.
inline SccMapping condense_scc(const OrigGraph& g) {
  std::unordered_map<VertexId, int64_t> index, low;
  std::unordered_map<VertexId, bool> on_stack;
  std::vector<VertexId> stack;
  int64_t next = 0;
  SccMapping m;

  struct Frame {
    VertexId v;
    size_t child = 0;
  };
  for (auto& [start, _] : g.out) {
    if (index.count(start)) continue;
    std::vector<Frame> frames{{start}};
    index[start] = low[start] = next++;
    stack.push_back(start);
    on_stack[start] = true;
    while (!frames.empty()) {
      Frame& f = frames.back();
      const auto& out = g.out.at(f.v);
      if (f.child < out.size()) {
        VertexId w = out[f.child++];
        if (!index.count(w)) {
          index[w] = low[w] = next++;
          stack.push_back(w);
          on_stack[w] = true;
          frames.push_back({w});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
      } else {
        if (low[f.v] == index[f.v]) {
          std::vector<VertexId> comp;
          VertexId w;
          do {
            w = stack.back();
            stack.pop_back();
            on_stack[w] = false;
            comp.push_back(w);
          } while (w != f.v);
          std::sort(comp.begin(), comp.end());
          for (VertexId u : comp) m.scc_of[u] = comp.front();
          m.members[comp.front()] = std::move(comp);
        }
        VertexId v = f.v;
        frames.pop_back();
        if (!frames.empty())
          low[frames.back().v] = std::min(low[frames.back().v], low[v]);
      }
    }
  }

  std::set<std::pair<VertexId, VertexId>> seen;
  for (auto& [id, _] : m.members) {
    m.dag_out[id];
    m.dag_in[id];
  }
  for (auto& [u, out] : g.out)
    for (VertexId w : out) {
      VertexId su = m.scc_of.at(u), sw = m.scc_of.at(w);
      if (su != sw && seen.insert({su, sw}).second) {
        m.dag_out[su].push_back(sw);
        m.dag_in[sw].push_back(su);
      }
    }
  for (auto& [_, v] : m.dag_out) std::sort(v.begin(), v.end());
  for (auto& [_, v] : m.dag_in) std::sort(v.begin(), v.end());
  return m;
}

struct DfsNumbering {
  std::map<VertexId, int64_t> pre, post;
  std::map<VertexId, VertexId> pa;  // forest parent, -1 for roots
};

// DFS forest over a DAG: roots are zero-in-degree vertices in ascending id
// order, children are visited in ascending id order.
inline DfsNumbering dfs_number(
    const std::map<VertexId, std::vector<VertexId>>& out) {
  std::map<VertexId, size_t> indeg;
  for (auto& [v, _] : out) indeg[v];
  for (auto& [_, nbrs] : out)
    for (VertexId w : nbrs) {
      if (!out.count(w))
        throw LoadError("edge to unknown vertex " + std::to_string(w));
      ++indeg[w];
    }

  DfsNumbering n;
  int64_t pre_clock = 0, post_clock = 0;
  struct Frame {
    VertexId v;
    size_t child = 0;
  };
  for (auto& [root, d] : indeg) {
    if (d != 0 || n.pre.count(root)) continue;
    n.pre[root] = pre_clock++;
    n.pa[root] = -1;
    std::vector<Frame> frames{{root}};
    while (!frames.empty()) {
      Frame& f = frames.back();
      const auto& nbrs = out.at(f.v);
      if (f.child < nbrs.size()) {
        VertexId w = nbrs[f.child++];
        if (!n.pre.count(w)) {
          n.pre[w] = pre_clock++;
          n.pa[w] = f.v;
          frames.push_back({w});
        }
      } else {
        n.post[f.v] = post_clock++;
        frames.pop_back();
      }
    }
  }
  if (n.pre.size() != out.size())
    throw LoadError("input graph is not a DAG: no root reaches some vertices");
  // A back edge (to an ancestor in the forest) certifies a cycle.
  for (auto& [u, nbrs] : out)
    for (VertexId w : nbrs)
      if (n.pre.at(w) <= n.pre.at(u) && n.post.at(u) <= n.post.at(w))
        throw LoadError("input graph is not a DAG: cycle through " +
                        std::to_string(w));
  return n;
}

// ---------------------------------------------------------------------------
// Labeled-DAG vertex lines:
// `id \t out \t in \t level \t pre \t max \t minpost \t post \t members`.

struct ReachV {
  std::vector<VertexId> out, in;
  uint32_t level = 0;
  int64_t pre = 0, maxpre = 0, minpost = 0, post = 0;
  std::vector<VertexId> members;
};

inline VertexId parse_reach_vertex(std::string_view line, ReachV& v) {
  auto f = split_view(line, '\t');
  if (f.size() != 9)
    throw std::runtime_error("labeled DAG line needs 9 tab fields");
  VertexId id = parse_i64(f[0]);
  auto ids = [](std::string_view s) {
    std::vector<VertexId> out;
    for (auto tok : split_ws(s)) out.push_back(parse_i64(tok));
    return out;
  };
  v.out = ids(f[1]);
  v.in = ids(f[2]);
  v.level = uint32_t(parse_i64(f[3]));
  v.pre = parse_i64(f[4]);
  v.maxpre = parse_i64(f[5]);
  v.minpost = parse_i64(f[6]);
  v.post = parse_i64(f[7]);
  v.members = ids(f[8]);
  if (v.members.empty())
    throw std::runtime_error("SCC member list must not be empty");
  return id;
}

inline std::string dump_reach_vdata(VertexId id, const ReachV& v) {
  auto ids = [](const std::vector<VertexId>& xs) {
    std::string s;
    for (size_t i = 0; i < xs.size(); ++i) {
      if (i) s += ' ';
      s += std::to_string(xs[i]);
    }
    return s;
  };
  return std::to_string(id) + "\t" + ids(v.out) + "\t" + ids(v.in) + "\t" +
         std::to_string(v.level) + "\t" + std::to_string(v.pre) + "\t" +
         std::to_string(v.maxpre) + "\t" + std::to_string(v.minpost) + "\t" +
         std::to_string(v.post) + "\t" + ids(v.members);
}

// Fresh labeled lines after condensation + numbering: level zeroed, interval
// endpoints seeded with the vertex's own numbers (the jobs refine them).
inline std::vector<std::string> make_labeled_lines(const SccMapping& m,
                                                   const DfsNumbering& n) {
  std::vector<std::string> lines;
  for (auto& [id, members] : m.members) {
    ReachV v;
    v.out = m.dag_out.at(id);
    v.in = m.dag_in.at(id);
    v.level = 0;
    v.pre = v.maxpre = n.pre.at(id);
    v.minpost = v.post = n.post.at(id);
    v.members = members;
    lines.push_back(dump_reach_vdata(id, v));
  }
  return lines;
}

// ---------------------------------------------------------------------------
// Label-building jobs (one app, job chosen by query text).

enum class LabelJob { Levels, YesNaive, YesAligned, No };

struct ReachLabelApp {
  using VValue = ReachV;
  struct QValue {
    int64_t val = 0;
    bool done = false;
  };
  struct Message {
    int64_t x;
  };
  struct QueryContent {
    LabelJob job = LabelJob::Levels;
  };
  struct AggValue {
    int64_t lmax = -1;       // aligned yes: level currently being processed
    uint64_t broadcasts = 0;  // vertices that sent in any step, accumulated
  };

  VertexId parse_vertex(std::string_view line, VValue& v) const {
    return parse_reach_vertex(line, v);
  }
  QueryContent parse_query(std::string_view text) const {
    auto toks = split_ws(text);
    if (toks.size() != 1) throw std::runtime_error("expected one job name");
    if (toks[0] == "levels") return {LabelJob::Levels};
    if (toks[0] == "yes") return {LabelJob::YesNaive};
    if (toks[0] == "yes-aligned") return {LabelJob::YesAligned};
    if (toks[0] == "no") return {LabelJob::No};
    throw std::runtime_error("unknown label job: " + std::string(toks[0]));
  }
  QValue init_value(VertexId, const VValue& v, const QueryContent& q) const {
    switch (q.job) {
      case LabelJob::Levels: return {v.in.empty() ? 0 : -1, false};
      case LabelJob::YesNaive:
      case LabelJob::YesAligned: return {v.pre, false};
      case LabelJob::No: return {v.post, false};
    }
    return {};
  }
  template <class ICtx>
  void init_activate(ICtx& ictx, const QueryContent& q) const {
    for (uint32_t pos = 0; pos < ictx.num_vertices(); ++pos) {
      const VValue& v = ictx.vertex_value(pos);
      bool start = q.job == LabelJob::Levels ? v.in.empty() : v.out.empty();
      if (start) ictx.activate(pos);
    }
  }

  template <class Ctx>
  void compute(Ctx& ctx, std::span<Message> inbox) const {
    switch (ctx.query().job) {
      case LabelJob::Levels: compute_levels(ctx, inbox); break;
      case LabelJob::YesNaive: compute_naive(ctx, inbox, true); break;
      case LabelJob::No: compute_naive(ctx, inbox, false); break;
      case LabelJob::YesAligned: compute_aligned(ctx, inbox); break;
    }
  }

  // l(root)=0; relax l(v) upward on the largest incoming l(u)+1.
  template <class Ctx>
  void compute_levels(Ctx& ctx, std::span<Message> inbox) const {
    auto& qv = ctx.qvalue();
    bool broadcast = false;
    if (ctx.superstep() == 1) {
      broadcast = true;  // roots announce level 0
    } else {
      int64_t best = -1;
      for (auto& m : inbox) best = std::max(best, m.x);
      if (best + 1 > qv.val) {
        qv.val = best + 1;
        broadcast = true;
      }
    }
    if (broadcast) {
      for (VertexId nb : ctx.value().out) ctx.send(nb, {qv.val});
      ctx.aggregate({-1, 1});
    }
    ctx.vote_to_halt();
  }

  // Propagate max pre (yes) / min post (no) against edge direction until
  // fixpoint.
  template <class Ctx>
  void compute_naive(Ctx& ctx, std::span<Message> inbox, bool maximize) const {
    auto& qv = ctx.qvalue();
    // Broadcast on first activation (so a vertex whose own number dominates
    // everything below it still reaches its in-neighbors) and again on every
    // improvement.
    bool broadcast = !qv.done;
    qv.done = true;
    for (auto& m : inbox) {
      if (maximize ? m.x > qv.val : m.x < qv.val) {
        qv.val = m.x;
        broadcast = true;
      }
    }
    if (broadcast) {
      for (VertexId nb : ctx.value().in) ctx.send(nb, {qv.val});
      ctx.aggregate({-1, 1});
    }
    ctx.vote_to_halt();
  }

  // Level-aligned yes-label job: the aggregator counts down the level being
  // processed; every vertex broadcasts exactly once, at its own level, and
  // stays active (without sending) until that turn comes.
  template <class Ctx>
  void compute_aligned(Ctx& ctx, std::span<Message> inbox) const {
    auto& qv = ctx.qvalue();
    const auto& v = ctx.value();
    if (ctx.superstep() == 1) {
      // Zero-out-degree seeds publish the starting level; nobody sends yet.
      ctx.aggregate({int64_t(v.level), 0});
      return;  // stay active
    }
    for (auto& m : inbox) qv.val = std::max(qv.val, m.x);
    const AggValue* a = ctx.agg_prev();
    if (a && int64_t(v.level) == a->lmax) {
      for (VertexId nb : v.in) ctx.send(nb, {qv.val});
      ctx.aggregate({-1, 1});
      qv.done = true;
      ctx.vote_to_halt();
    }
    // Not this vertex's turn yet: remain active.
  }

  void agg_merge(AggValue& into, const AggValue& o) const {
    into.lmax = std::max(into.lmax, o.lmax);
    into.broadcasts += o.broadcasts;
  }
  AggValue agg_finalize(AggValue m, const AggValue* prev, uint32_t) const {
    if (prev) {
      if (m.lmax < 0) m.lmax = prev->lmax - 1;
      m.broadcasts += prev->broadcasts;
    }
    return m;
  }

  void dump_vertex(DumpWriter&, VertexId, VValue& v, const QValue& qv,
                   const QueryContent& q) const {
    switch (q.job) {
      case LabelJob::Levels: v.level = uint32_t(qv.val); break;
      case LabelJob::YesNaive:
      case LabelJob::YesAligned: v.maxpre = qv.val; break;
      case LabelJob::No: v.minpost = qv.val; break;
    }
  }
  std::vector<std::string> finalize_answer(const QueryContent&,
                                           const QueryInfo<AggValue>& info,
                                           std::vector<DumpFragment>&) const {
    uint64_t b = info.final_agg ? info.final_agg->broadcasts : 0;
    return {std::to_string(info.qid) + " broadcasts " + std::to_string(b)};
  }
  std::string dump_vdata(VertexId id, const VValue& v) const {
    return dump_reach_vdata(id, v);
  }
};

inline uint64_t answer_broadcasts(const std::vector<std::string>& lines) {
  auto toks = split_ws(lines.at(0));
  if (toks.size() != 3 || toks[1] != "broadcasts")
    throw std::runtime_error("bad label job answer");
  return uint64_t(parse_i64(toks[2]));
}

// Runs the full preprocessing + label pipeline, returning labeled DAG lines.
inline std::vector<std::string> build_reach_index(
    const std::vector<std::string>& orig_lines, int workers,
    bool aligned_yes = true) {
  auto g = parse_orig_lines(orig_lines);
  auto scc = condense_scc(g);
  auto num = dfs_number(scc.dag_out);

  EngineConfig cfg;
  cfg.workers = workers;
  Engine<ReachLabelApp> eng(ReachLabelApp{}, cfg);
  eng.load_lines(make_labeled_lines(scc, num));
  for (const char* job :
       {"levels", aligned_yes ? "yes-aligned" : "yes", "no"}) {
    eng.enqueue(job);
    eng.run_until_idle();
    for (auto& r : eng.take_results())
      if (r.error) throw std::runtime_error("label job failed: " + r.error_msg);
  }
  return eng.dump_graph_lines();
}

// ---------------------------------------------------------------------------
// Query app: bidirectional BFS on the labeled DAG with toggleable prunes.

struct ReachQuery {
  VertexId s = 0;
  VertexId t = 0;
};

struct ReachQueryApp {
  using VValue = ReachV;
  struct QValue {
    bool fwd = false;
    bool bwd = false;
  };
  struct Message {
    uint8_t dirmask;  // bit 0: forward, bit 1: backward
  };
  using QueryContent = ReachQuery;

  struct Labels {
    uint32_t level = 0;
    int64_t pre = 0, maxpre = 0, minpost = 0, post = 0;
  };
  struct AggValue {
    bool found = false;
    bool s_set = false, t_set = false;
    Labels s, t;
    uint64_t fwd = 0, bwd = 0;  // expansion fan-out per side, this step
  };

  // Original-id -> condensed-id index, shared by all worker copies.
  struct Index {
    std::mutex mu;
    std::unordered_map<VertexId, VertexId> scc_of;
  };
  std::shared_ptr<Index> idx = std::make_shared<Index>();
  bool use_level = true;
  bool use_yes = true;
  bool use_no = true;

  VertexId parse_vertex(std::string_view line, VValue& v) const {
    return parse_reach_vertex(line, v);
  }
  void load2idx(const VValue& v, VertexId id, uint32_t) {
    std::lock_guard lk(idx->mu);
    for (VertexId m : v.members) idx->scc_of[m] = id;
  }
  QueryContent parse_query(std::string_view text) const {
    auto toks = split_ws(text);
    if (toks.size() != 2) throw std::runtime_error("query must be `s t`");
    return {parse_i64(toks[0]), parse_i64(toks[1])};
  }
  template <class Lookup>
  std::string validate(const QueryContent& q, const Lookup&) const {
    for (VertexId v : {q.s, q.t})
      if (!idx->scc_of.count(v))
        return "vertex not in graph: " + std::to_string(v);
    return {};
  }
  QValue init_value(VertexId, const VValue&, const QueryContent&) const {
    return {};
  }
  template <class ICtx>
  void init_activate(ICtx& ictx, const QueryContent& q) const {
    if (auto pos = ictx.get_vpos(idx->scc_of.at(q.s))) ictx.activate(*pos);
    if (auto pos = ictx.get_vpos(idx->scc_of.at(q.t))) ictx.activate(*pos);
  }

  static bool contains(int64_t lo_outer, int64_t hi_outer, int64_t lo_inner,
                       int64_t hi_inner) {
    return lo_outer <= lo_inner && hi_inner <= hi_outer;
  }

  template <class Ctx>
  void compute(Ctx& ctx, std::span<Message> inbox) const {
    auto& qv = ctx.qvalue();
    const auto& v = ctx.value();
    const auto& q = ctx.query();
    AggValue c;
    bool newf = false, newb = false;
    if (ctx.superstep() == 1) {
      Labels mine{v.level, v.pre, v.maxpre, v.minpost, v.post};
      if (ctx.id() == idx->scc_of.at(q.s)) {
        qv.fwd = newf = true;
        c.s = mine;
        c.s_set = true;
      }
      if (ctx.id() == idx->scc_of.at(q.t)) {
        qv.bwd = newb = true;
        c.t = mine;
        c.t_set = true;
      }
    } else {
      uint8_t got = 0;
      for (auto& m : inbox) got |= m.dirmask;
      if ((got & 1) && !qv.fwd) qv.fwd = newf = true;
      if ((got & 2) && !qv.bwd) qv.bwd = newb = true;
    }

    if (qv.fwd && qv.bwd) {
      // Bi-reached (covers S_s == S_t and s == t).
      c.found = true;
      ctx.force_terminate();
      ctx.aggregate(c);
      ctx.vote_to_halt();
      return;
    }

    const AggValue* L = ctx.superstep() == 1 ? nullptr : ctx.agg_prev();
    if (newf) {
      // Endpoint labels are published in step 1, so rule checks start at
      // step 2; s's own step-1 expansion needs none of them.
      if (L && use_yes &&
          contains(v.pre, v.maxpre, L->t.pre, L->t.maxpre)) {
        c.found = true;  // yes(t) within yes(v): v reaches t
        ctx.force_terminate();
      } else if (!L || ((!use_level || v.level < L->t.level) &&
                        (!use_no || contains(v.minpost, v.post, L->t.minpost,
                                             L->t.post)))) {
        for (VertexId nb : v.out) ctx.send(nb, Message{1});
        c.fwd += v.out.size();
      }
    }
    if (newb) {
      if (L && use_yes && contains(L->s.pre, L->s.maxpre, v.pre, v.maxpre)) {
        c.found = true;  // yes(v) within yes(s): s reaches v
        ctx.force_terminate();
      } else if (!L || ((!use_level || L->s.level < v.level) &&
                        (!use_no || contains(L->s.minpost, L->s.post,
                                             v.minpost, v.post)))) {
        for (VertexId nb : v.in) ctx.send(nb, Message{2});
        c.bwd += v.in.size();
      }
    }
    ctx.aggregate(c);
    ctx.vote_to_halt();
  }

  static void combine(Message& into, const Message& other) {
    into.dirmask |= other.dirmask;
  }
  void agg_merge(AggValue& into, const AggValue& o) const {
    into.found = into.found || o.found;
    if (!into.s_set && o.s_set) {
      into.s = o.s;
      into.s_set = true;
    }
    if (!into.t_set && o.t_set) {
      into.t = o.t;
      into.t_set = true;
    }
    into.fwd += o.fwd;
    into.bwd += o.bwd;
  }
  AggValue agg_finalize(AggValue m, const AggValue* prev, uint32_t) const {
    if (prev) {
      if (!m.s_set && prev->s_set) {
        m.s = prev->s;
        m.s_set = true;
      }
      if (!m.t_set && prev->t_set) {
        m.t = prev->t;
        m.t_set = true;
      }
    }
    return m;
  }
  void agg_round(const AggValue& a, QueryControl& ctl, uint32_t) const {
    if (a.found) {
      ctl.force_terminate();
    } else if (a.fwd == 0 || a.bwd == 0) {
      // One side exhausted without meeting: unreachable.
      ctl.force_terminate();
    }
  }
  std::vector<std::string> finalize_answer(const QueryContent& q,
                                           const QueryInfo<AggValue>& info,
                                           std::vector<DumpFragment>&) const {
    bool found = info.final_agg && info.final_agg->found;
    return {std::to_string(info.qid) + " " + std::to_string(q.s) + " " +
            std::to_string(q.t) + " " + (found ? "TRUE" : "FALSE") + " " +
            std::to_string(info.supersteps)};
  }
  std::string dump_vdata(VertexId id, const VValue& v) const {
    return dump_reach_vdata(id, v);
  }
};

inline bool answer_reachable(const std::vector<std::string>& lines) {
  auto toks = split_ws(lines.at(0));
  if (toks.size() != 5 || (toks[3] != "TRUE" && toks[3] != "FALSE"))
    throw std::runtime_error("bad reachability answer");
  return toks[3] == "TRUE";
}

}  // namespace qgl::reach
