#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "qgl/engine.hpp"

namespace qgl::ppsp {

// Hub-distance label. dir 0: undirected; dir 1: entry label, distance v->h;
// dir 2: exit label, distance h->v.
struct HubLabel {
  VertexId h;
  uint32_t d;
  uint8_t dir;
};

struct PpspV {
  std::vector<VertexId> out;
  std::vector<VertexId> in;
  bool directed = false;
  bool is_hub = false;
  std::vector<HubLabel> labels;
};

// Line format: `id \t out-list [| in-list] [| L-entries]`.
// Label tokens: `h:d` (undirected), `in:h:d`, `out:h:d`. A two-section line
// whose second section consists of label tokens is an undirected labeled
// vertex; otherwise the second section is a (possibly empty) in-list.
inline HubLabel parse_label_token(std::string_view tok) {
  auto parts = split_view(tok, ':');
  if (parts.size() == 2)
    return {parse_i64(parts[0]), uint32_t(parse_i64(parts[1])), 0};
  if (parts.size() == 3) {
    uint8_t dir;
    if (parts[0] == "in") dir = 1;
    else if (parts[0] == "out") dir = 2;
    else throw LoadError("bad label direction: '" + std::string(parts[0]) + "'");
    return {parse_i64(parts[1]), uint32_t(parse_i64(parts[2])), dir};
  }
  throw LoadError("bad label token: '" + std::string(tok) + "'");
}

inline VertexId parse_ppsp_vertex(std::string_view line, PpspV& v) {
  auto secs = split_view(line, '|');
  if (secs.size() > 3) throw LoadError("too many '|' sections");
  auto head = split_ws(secs[0]);
  if (head.empty()) throw LoadError("missing vertex id");
  VertexId id = parse_i64(head[0]);
  for (size_t i = 1; i < head.size(); ++i) v.out.push_back(parse_i64(head[i]));
  size_t label_sec = 0;  // 0 = none
  if (secs.size() == 3) {
    v.directed = true;
    for (auto t : split_ws(secs[1])) v.in.push_back(parse_i64(t));
    label_sec = 2;
  } else if (secs.size() == 2) {
    auto toks = split_ws(secs[1]);
    bool labels = !toks.empty();
    for (auto t : toks)
      if (t.find(':') == std::string_view::npos) labels = false;
    if (labels) {
      label_sec = 1;
    } else {
      v.directed = true;
      for (auto t : toks) v.in.push_back(parse_i64(t));
    }
  }
  if (label_sec)
    for (auto t : split_ws(secs[label_sec]))
      v.labels.push_back(parse_label_token(t));
  if (!v.directed) v.in = v.out;
  for (auto& L : v.labels)
    if (L.h == id && L.d == 0) v.is_hub = true;
  return id;
}

inline std::string dump_ppsp_vdata(VertexId id, const PpspV& v) {
  std::string s = std::to_string(id);
  s += '\t';
  for (size_t i = 0; i < v.out.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(v.out[i]);
  }
  if (v.directed) {
    s += " | ";
    for (size_t i = 0; i < v.in.size(); ++i) {
      if (i) s += ' ';
      s += std::to_string(v.in[i]);
    }
  }
  if (!v.labels.empty()) {
    s += " | ";
    for (size_t i = 0; i < v.labels.size(); ++i) {
      if (i) s += ' ';
      const auto& L = v.labels[i];
      if (L.dir == 1) s += "in:";
      else if (L.dir == 2) s += "out:";
      s += std::to_string(L.h);
      s += ':';
      s += std::to_string(L.d);
    }
  }
  return s;
}

struct PpspQuery {
  VertexId s, t;
};

inline PpspQuery parse_ppsp_query(std::string_view text) {
  auto toks = split_ws(text);
  if (toks.size() != 2) throw std::runtime_error("expected: s t");
  return {parse_i64(toks[0]), parse_i64(toks[1])};
}

template <class Lookup>
inline std::string validate_ppsp_query(const PpspQuery& q, const Lookup& g) {
  if (!g.exists(q.s)) return "vertex not in graph: " + std::to_string(q.s);
  if (!g.exists(q.t)) return "vertex not in graph: " + std::to_string(q.t);
  return "";
}

inline std::string fmt_dist(uint32_t d) {
  return d == kInfHops ? std::string("INF") : std::to_string(d);
}

inline std::string ppsp_answer_line(QueryId qid, VertexId s, VertexId t,
                                    uint32_t d, uint32_t steps) {
  return std::to_string(qid) + " " + std::to_string(s) + " " +
         std::to_string(t) + " " + fmt_dist(d) + " " + std::to_string(steps);
}

inline uint32_t parse_answer_dist(const std::string& line) {
  auto toks = split_ws(line);
  if (toks.size() != 5) throw std::runtime_error("bad answer line");
  return toks[3] == "INF" ? kInfHops : uint32_t(parse_i64(toks[3]));
}

// ---------------------------------------------------------------------------
// Plain BFS from s until t is reached.
struct BfsApp {
  using VValue = PpspV;
  struct QValue {
    uint32_t d = kInfHops;
  };
  struct Message {
    uint32_t d;
  };
  using QueryContent = PpspQuery;
  struct AggValue {
    uint32_t dt = kInfHops;
  };

  VertexId parse_vertex(std::string_view line, VValue& v) const {
    return parse_ppsp_vertex(line, v);
  }
  QueryContent parse_query(std::string_view text) const {
    return parse_ppsp_query(text);
  }
  template <class Lookup>
  std::string validate(const QueryContent& q, const Lookup& g) const {
    return validate_ppsp_query(q, g);
  }
  QValue init_value(VertexId id, const VValue&, const QueryContent& q) const {
    return {id == q.s ? 0u : kInfHops};
  }
  template <class ICtx>
  void init_activate(ICtx& ictx, const QueryContent& q) const {
    if (auto pos = ictx.get_vpos(q.s)) ictx.activate(*pos);
  }
  template <class Ctx>
  void compute(Ctx& ctx, std::span<Message> inbox) const {
    auto& qv = ctx.qvalue();
    if (ctx.superstep() == 1) {
      qv.d = 0;
    } else {
      if (qv.d != kInfHops || inbox.empty()) {
        ctx.vote_to_halt();
        return;
      }
      qv.d = ctx.superstep() - 1;
    }
    if (ctx.id() == ctx.query().t) {
      ctx.aggregate({qv.d});
      ctx.force_terminate();
    } else {
      for (VertexId nb : ctx.value().out) ctx.send(nb, Message{qv.d + 1});
    }
    ctx.vote_to_halt();
  }
  static void combine(Message& into, const Message& other) {
    into.d = std::min(into.d, other.d);
  }
  void agg_merge(AggValue& into, const AggValue& o) const {
    into.dt = std::min(into.dt, o.dt);
  }
  AggValue agg_finalize(AggValue m, const AggValue* prev, uint32_t) const {
    if (prev) m.dt = std::min(m.dt, prev->dt);
    return m;
  }
  std::vector<std::string> finalize_answer(const QueryContent& q,
                                           const QueryInfo<AggValue>& info,
                                           std::vector<DumpFragment>&) const {
    uint32_t d = info.final_agg ? info.final_agg->dt : kInfHops;
    return {ppsp_answer_line(info.qid, q.s, q.t, d, info.supersteps)};
  }
  std::string dump_vdata(VertexId id, const VValue& v) const {
    return dump_ppsp_vdata(id, v);
  }
};

// ---------------------------------------------------------------------------
// Bidirectional BFS: forward from s, backward from t; first bi-reached
// vertices report min ds+dt through the aggregator.
struct BiBfsApp {
  using VValue = PpspV;
  struct QValue {
    uint32_t ds = kInfHops;
    uint32_t dt = kInfHops;
  };
  struct Message {
    uint8_t dirmask;  // bit 0: forward, bit 1: backward
  };
  using QueryContent = PpspQuery;
  struct AggValue {
    uint32_t best = kInfHops;
    uint64_t fwd = 0;
    uint64_t bwd = 0;
  };

  VertexId parse_vertex(std::string_view line, VValue& v) const {
    return parse_ppsp_vertex(line, v);
  }
  QueryContent parse_query(std::string_view text) const {
    return parse_ppsp_query(text);
  }
  template <class Lookup>
  std::string validate(const QueryContent& q, const Lookup& g) const {
    return validate_ppsp_query(q, g);
  }
  QValue init_value(VertexId, const VValue&, const QueryContent&) const {
    return {};
  }
  template <class ICtx>
  void init_activate(ICtx& ictx, const QueryContent& q) const {
    if (auto pos = ictx.get_vpos(q.s)) ictx.activate(*pos);
    if (auto pos = ictx.get_vpos(q.t)) ictx.activate(*pos);
  }
  template <class Ctx>
  void compute(Ctx& ctx, std::span<Message> inbox) const {
    auto& qv = ctx.qvalue();
    const auto& v = ctx.value();
    bool new_f = false, new_b = false;
    if (ctx.superstep() == 1) {
      if (ctx.id() == ctx.query().s) {
        qv.ds = 0;
        new_f = true;
      }
      if (ctx.id() == ctx.query().t) {
        qv.dt = 0;
        new_b = true;
      }
    } else {
      uint8_t got = 0;
      for (auto& m : inbox) got |= m.dirmask;
      if ((got & 1) && qv.ds == kInfHops) {
        qv.ds = ctx.superstep() - 1;
        new_f = true;
      }
      if ((got & 2) && qv.dt == kInfHops) {
        qv.dt = ctx.superstep() - 1;
        new_b = true;
      }
    }
    AggValue contrib;
    if (qv.ds != kInfHops && qv.dt != kInfHops) {
      contrib.best = qv.ds + qv.dt;
      ctx.force_terminate();
    } else {
      if (new_f) {
        for (VertexId nb : v.out) ctx.send(nb, Message{1});
        contrib.fwd = v.out.size();
      }
      if (new_b) {
        for (VertexId nb : v.in) ctx.send(nb, Message{2});
        contrib.bwd = v.in.size();
      }
    }
    ctx.aggregate(contrib);
    ctx.vote_to_halt();
  }
  static void combine(Message& into, const Message& other) {
    into.dirmask |= other.dirmask;
  }
  void agg_merge(AggValue& into, const AggValue& o) const {
    into.best = std::min(into.best, o.best);
    into.fwd += o.fwd;
    into.bwd += o.bwd;
  }
  AggValue agg_finalize(AggValue m, const AggValue* prev, uint32_t) const {
    if (prev) m.best = std::min(m.best, prev->best);
    return m;
  }
  void agg_round(const AggValue& a, QueryControl& ctl, uint32_t) const {
    if (a.best != kInfHops) {
      ctl.force_terminate();
    } else if (a.fwd == 0 || a.bwd == 0) {
      // One search side is exhausted: the frontiers can never meet.
      ctl.force_terminate();
    }
  }
  std::vector<std::string> finalize_answer(const QueryContent& q,
                                           const QueryInfo<AggValue>& info,
                                           std::vector<DumpFragment>&) const {
    uint32_t d = info.final_agg ? info.final_agg->best : kInfHops;
    return {ppsp_answer_line(info.qid, q.s, q.t, d, info.supersteps)};
  }
  std::string dump_vdata(VertexId id, const VValue& v) const {
    return dump_ppsp_vdata(id, v);
  }
};

// ---------------------------------------------------------------------------
// Hub selection by degree.
enum class DegreeMode { Undirected, In, Out, InOut };

template <class Eng>
std::vector<VertexId> hub_select(Eng& eng, size_t k, DegreeMode mode) {
  std::vector<std::pair<uint64_t, VertexId>> deg;
  for (int w = 0; w < eng.config().workers; ++w) {
    for (auto& slot : eng.worker(w).varray) {
      const PpspV& v = slot.value;
      uint64_t d = 0;
      switch (mode) {
        case DegreeMode::Undirected: d = v.out.size(); break;
        case DegreeMode::In: d = v.in.size(); break;
        case DegreeMode::Out: d = v.out.size(); break;
        case DegreeMode::InOut: d = v.in.size() + v.out.size(); break;
      }
      deg.emplace_back(d, slot.id);
    }
  }
  std::sort(deg.begin(), deg.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  if (k > deg.size()) k = deg.size();  // clamped (warned at the CLI layer)
  std::vector<VertexId> hubs;
  hubs.reserve(k);
  for (size_t i = 0; i < k; ++i) hubs.push_back(deg[i].second);
  return hubs;
}

template <class Eng>
void mark_hubs(Eng& eng, const std::vector<VertexId>& hubs) {
  std::unordered_set<VertexId> hs(hubs.begin(), hubs.end());
  for (int w = 0; w < eng.config().workers; ++w)
    for (auto& slot : eng.worker(w).varray)
      slot.value.is_hub = hs.count(slot.id) > 0;
}

template <class Eng>
bool graph_is_directed(Eng& eng) {
  for (int w = 0; w < eng.config().workers; ++w)
    for (auto& slot : eng.worker(w).varray)
      if (slot.value.directed) return true;
  return false;
}

template <class Eng>
void sort_labels(Eng& eng) {
  for (int w = 0; w < eng.config().workers; ++w)
    for (auto& slot : eng.worker(w).varray)
      std::sort(slot.value.labels.begin(), slot.value.labels.end(),
                [](const HubLabel& a, const HubLabel& b) {
                  if (a.dir != b.dir) return a.dir < b.dir;
                  if (a.h != b.h) return a.h < b.h;
                  return a.d < b.d;
                });
}

// ---------------------------------------------------------------------------
// Hub^2 index construction: one BFS query per hub (two per hub when the
// graph is directed: forward builds exit labels, backward builds entry
// labels). Vertices append their labels during the dump round.
struct Hub2IndexApp {
  using VValue = PpspV;
  struct QValue {
    uint32_t d = kInfHops;
    bool pre = false;  // some shortest path from h passes another hub
  };
  struct Message {
    uint8_t flag;
  };
  struct QueryContent {
    VertexId h;
    bool backward;
  };

  VertexId parse_vertex(std::string_view line, VValue& v) const {
    return parse_ppsp_vertex(line, v);
  }
  QueryContent parse_query(std::string_view text) const {
    auto toks = split_ws(text);
    if (toks.empty() || toks.size() > 2 ||
        (toks.size() == 2 && toks[1] != "bwd"))
      throw std::runtime_error("expected: h [bwd]");
    return {parse_i64(toks[0]), toks.size() == 2};
  }
  template <class Lookup>
  std::string validate(const QueryContent& q, const Lookup& g) const {
    if (!g.exists(q.h)) return "vertex not in graph: " + std::to_string(q.h);
    return "";
  }
  QValue init_value(VertexId id, const VValue&, const QueryContent& q) const {
    return {id == q.h ? 0u : kInfHops, false};
  }
  template <class ICtx>
  void init_activate(ICtx& ictx, const QueryContent& q) const {
    if (auto pos = ictx.get_vpos(q.h)) ictx.activate(*pos);
  }
  template <class Ctx>
  void compute(Ctx& ctx, std::span<Message> inbox) const {
    auto& qv = ctx.qvalue();
    uint8_t flag;
    if (ctx.superstep() == 1) {
      qv.d = 0;
      flag = 0;  // the query hub itself is not "another" hub
    } else {
      if (qv.d != kInfHops || inbox.empty()) {
        ctx.vote_to_halt();
        return;
      }
      qv.d = ctx.superstep() - 1;
      for (auto& m : inbox) qv.pre = qv.pre || m.flag != 0;
      flag = (qv.pre || ctx.value().is_hub) ? 1 : 0;
    }
    const auto& nbrs =
        ctx.query().backward ? ctx.value().in : ctx.value().out;
    for (VertexId nb : nbrs) ctx.send(nb, Message{flag});
    ctx.vote_to_halt();
  }
  static void combine(Message& into, const Message& other) {
    into.flag |= other.flag;
  }
  void dump_vertex(DumpWriter&, VertexId, VValue& v, const QValue& qv,
                   const QueryContent& q) const {
    if (qv.d == kInfHops) return;
    if (!v.is_hub && qv.pre) return;  // another hub covers this pair
    uint8_t dir = v.directed ? (q.backward ? 1 : 2) : 0;
    v.labels.push_back(HubLabel{q.h, qv.d, dir});
  }
  std::string dump_vdata(VertexId id, const VValue& v) const {
    return dump_ppsp_vdata(id, v);
  }
};

// Runs the whole index job on a loaded engine: select hubs, run the BFS
// query set, sort labels. Returns the hub set.
template <class Eng>
std::vector<VertexId> hub2_build_index(Eng& eng, size_t k, DegreeMode mode) {
  auto hubs = hub_select(eng, k, mode);
  mark_hubs(eng, hubs);
  bool directed = graph_is_directed(eng);
  for (VertexId h : hubs) {
    eng.enqueue(std::to_string(h));
    if (directed) eng.enqueue(std::to_string(h) + " bwd");
  }
  eng.run_until_idle();
  for (auto& r : eng.take_results())
    if (r.error) throw EngineDefect("index query failed: " + r.error_msg);
  sort_labels(eng);
  return hubs;
}

// ---------------------------------------------------------------------------
// Hub^2 query: upper bound through the hub labels, then a hub-pruned
// bidirectional BFS with early stop.
struct Hub2QueryApp {
  using VValue = PpspV;
  struct QValue {
    uint32_t ds = kInfHops;
    uint32_t dt = kInfHops;
  };
  struct Message {
    uint8_t kind;  // 0 forward, 1 backward, 2 hub distance from s
    uint32_t d;
  };
  using QueryContent = PpspQuery;
  struct AggValue {
    uint32_t dub = kInfHops;  // best three-term hub bound
    uint32_t best = kInfHops; // min ds+dt over bi-reached non-hubs
    uint64_t fwd = 0;
    uint64_t bwd = 0;
    std::vector<std::pair<VertexId, uint32_t>> lt;  // t's exit labels
  };

  bool early_stop = true;

  VertexId parse_vertex(std::string_view line, VValue& v) const {
    return parse_ppsp_vertex(line, v);
  }
  QueryContent parse_query(std::string_view text) const {
    return parse_ppsp_query(text);
  }
  template <class Lookup>
  std::string validate(const QueryContent& q, const Lookup& g) const {
    return validate_ppsp_query(q, g);
  }
  QValue init_value(VertexId, const VValue&, const QueryContent&) const {
    return {};
  }
  template <class ICtx>
  void init_activate(ICtx& ictx, const QueryContent& q) const {
    if (auto pos = ictx.get_vpos(q.s)) ictx.activate(*pos);
    if (auto pos = ictx.get_vpos(q.t)) ictx.activate(*pos);
  }

  static uint32_t dist_to_hub(const PpspV& v, VertexId ht) {
    for (auto& L : v.labels)
      if (L.h == ht && L.dir != 2) return L.d;
    return kInfHops;
  }

  template <class Ctx>
  void compute(Ctx& ctx, std::span<Message> inbox) const {
    auto& qv = ctx.qvalue();
    const auto& v = ctx.value();
    const auto& q = ctx.query();
    AggValue contrib;
    bool new_f = false, new_b = false;
    if (ctx.superstep() == 1) {
      if (ctx.id() == q.s) {
        qv.ds = 0;
        new_f = true;
        if (v.is_hub) {
          ctx.send(q.s, Message{2, 0});  // degenerate case: H_s = {s}
        } else {
          for (auto& L : v.labels)
            if (L.dir != 2) ctx.send(L.h, Message{2, L.d});
        }
      }
      if (ctx.id() == q.t) {
        qv.dt = 0;
        new_b = true;
        if (v.is_hub) {
          contrib.lt.emplace_back(q.t, 0);  // degenerate case: H_t = {t}
        } else {
          for (auto& L : v.labels)
            if (L.dir != 1) contrib.lt.emplace_back(L.h, L.d);
        }
      }
    } else {
      bool got_f = false, got_b = false;
      for (auto& m : inbox) {
        if (m.kind == 2) {
          if (const AggValue* prev = ctx.agg_prev()) {
            for (auto& [ht, dht] : prev->lt) {
              uint32_t dmid = ctx.id() == ht ? 0 : dist_to_hub(v, ht);
              if (dmid != kInfHops)
                contrib.dub = std::min(contrib.dub, m.d + dmid + dht);
            }
          }
        } else if (m.kind == 0) {
          got_f = true;
        } else {
          got_b = true;
        }
      }
      if (got_f && qv.ds == kInfHops) {
        qv.ds = ctx.superstep() - 1;
        new_f = true;
      }
      if (got_b && qv.dt == kInfHops) {
        qv.dt = ctx.superstep() - 1;
        new_b = true;
      }
    }
    if (qv.ds != kInfHops && qv.dt != kInfHops && !v.is_hub) {
      contrib.best = qv.ds + qv.dt;
      ctx.force_terminate();
    } else if (!v.is_hub) {  // hubs halt without broadcasting
      if (new_f) {
        for (VertexId nb : v.out) ctx.send(nb, Message{0, 0});
        contrib.fwd = v.out.size();
      }
      if (new_b) {
        for (VertexId nb : v.in) ctx.send(nb, Message{1, 0});
        contrib.bwd = v.in.size();
      }
    }
    ctx.aggregate(contrib);
    ctx.vote_to_halt();
  }

  void agg_merge(AggValue& into, const AggValue& o) const {
    into.dub = std::min(into.dub, o.dub);
    into.best = std::min(into.best, o.best);
    into.fwd += o.fwd;
    into.bwd += o.bwd;
    into.lt.insert(into.lt.end(), o.lt.begin(), o.lt.end());
  }
  AggValue agg_finalize(AggValue m, const AggValue* prev, uint32_t) const {
    if (prev) {
      m.dub = std::min(m.dub, prev->dub);
      m.best = std::min(m.best, prev->best);
      if (m.lt.empty()) m.lt = prev->lt;
    }
    return m;
  }
  void agg_round(const AggValue& a, QueryControl& ctl, uint32_t step) const {
    if (a.best != kInfHops) {
      ctl.force_terminate();
      return;
    }
    if (step < 2) return;  // d_ub is known only after superstep 2
    if (early_stop && a.dub != kInfHops && step >= 1 + a.dub / 2) {
      // Any distance below d_ub would already have been bi-reached.
      ctl.force_terminate();
      return;
    }
    if (a.fwd == 0 || a.bwd == 0) ctl.force_terminate();
  }
  std::vector<std::string> finalize_answer(const QueryContent& q,
                                           const QueryInfo<AggValue>& info,
                                           std::vector<DumpFragment>&) const {
    uint32_t d = kInfHops;
    if (info.final_agg)
      d = std::min(info.final_agg->best, info.final_agg->dub);
    return {ppsp_answer_line(info.qid, q.s, q.t, d, info.supersteps)};
  }
  std::string dump_vdata(VertexId id, const VValue& v) const {
    return dump_ppsp_vdata(id, v);
  }
};

}  // namespace qgl::ppsp
