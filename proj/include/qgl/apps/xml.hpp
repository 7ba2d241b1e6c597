#pragma once

#include <algorithm>
#include <string>
#include <unordered_map>
#include <vector>

#include "qgl/engine.hpp"

namespace qgl::xmlkw {

struct XmlV {
  VertexId pa = -1;
  uint32_t level = 0;
  uint64_t start = 0;
  uint64_t end = 0;
  std::vector<std::string> words;
  std::vector<VertexId> children;
};

// Line format: `id \t pa \t level \t start \t end \t words \t children`.
inline VertexId parse_xml_vertex(std::string_view line, XmlV& v) {
  auto f = split_view(line, '\t');
  if (f.size() != 7) throw LoadError("expected 7 tab-separated fields");
  VertexId id = parse_i64(f[0]);
  v.pa = parse_i64(f[1]);
  v.level = uint32_t(parse_i64(f[2]));
  v.start = uint64_t(parse_i64(f[3]));
  v.end = uint64_t(parse_i64(f[4]));
  for (auto w : split_ws(f[5])) v.words.emplace_back(w);
  for (auto c : split_ws(f[6])) v.children.push_back(parse_i64(c));
  return id;
}

inline std::string dump_xml_vdata(VertexId id, const XmlV& v) {
  std::string s = std::to_string(id) + "\t" + std::to_string(v.pa) + "\t" +
                  std::to_string(v.level) + "\t" + std::to_string(v.start) +
                  "\t" + std::to_string(v.end) + "\t";
  for (size_t i = 0; i < v.words.size(); ++i) {
    if (i) s += ' ';
    s += v.words[i];
  }
  s += '\t';
  for (size_t i = 0; i < v.children.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(v.children[i]);
  }
  return s;
}

enum class Semantics { SlcaSimple, SlcaAligned, Elca, MaxMatch };

struct XmlQuery {
  Semantics sem = Semantics::SlcaSimple;
  std::vector<std::string> kws;  // 1..32 lowercase keywords
  uint32_t full = 0;             // all-one bitmap for this query
};

// Query text: `<semantics> k1 k2 …` with semantics one of
// slca | slca-aligned | elca | maxmatch.
inline XmlQuery parse_xml_query(std::string_view text) {
  auto toks = split_ws(text);
  if (toks.empty()) throw std::runtime_error("empty query");
  XmlQuery q;
  std::string sem(toks[0]);
  if (sem == "slca") q.sem = Semantics::SlcaSimple;
  else if (sem == "slca-aligned") q.sem = Semantics::SlcaAligned;
  else if (sem == "elca") q.sem = Semantics::Elca;
  else if (sem == "maxmatch") q.sem = Semantics::MaxMatch;
  else throw std::runtime_error(
      "unknown semantics '" + sem + "' (slca|slca-aligned|elca|maxmatch)");
  for (size_t i = 1; i < toks.size(); ++i)
    for (auto& w : tokenize_words(toks[i])) q.kws.push_back(w);
  if (q.kws.empty()) throw std::runtime_error("no keywords given");
  if (q.kws.size() > 32)
    throw std::runtime_error("at most 32 keywords supported");
  q.full = q.kws.size() == 32 ? ~0u : (1u << q.kws.size()) - 1;
  return q;
}

// Labels carried in per-query vertex state.
inline constexpr uint8_t kNoLabel = 0;
inline constexpr uint8_t kSlca = 1;
inline constexpr uint8_t kNonSlca = 2;
inline constexpr uint8_t kInResult = 3;  // MaxMatch phase-2 label

struct XmlApp {
  using VValue = XmlV;
  struct QValue {
    uint32_t bm = 0;
    uint32_t sent_bm = 0;  // last bitmap forwarded to the parent
    uint8_t label = kNoLabel;
    bool processed = false;
    std::vector<std::pair<VertexId, uint32_t>> kids;  // MaxMatch phase 1
  };
  struct Message {
    VertexId u;
    uint32_t bm;
    uint8_t kind;  // 0: child bitmap upward, 1: MaxMatch downward label
  };
  using QueryContent = XmlQuery;
  struct AggValue {
    int32_t lmax = -1;   // maximum level of matching vertices
    uint8_t phase = 1;   // MaxMatch phase
    uint64_t parent_msgs = 0;  // upward messages sent (property check)
  };

  // Per-worker inverted index: word -> vertex positions.
  std::unordered_map<std::string, std::vector<uint32_t>> inv;

  VertexId parse_vertex(std::string_view line, VValue& v) const {
    return parse_xml_vertex(line, v);
  }
  void load2idx(const VValue& v, VertexId, uint32_t pos) {
    for (const auto& w : v.words) inv[w].push_back(pos);
  }
  QueryContent parse_query(std::string_view text) const {
    return parse_xml_query(text);
  }
  QValue init_value(VertexId, const VValue& v, const QueryContent& q) const {
    QValue qv;
    for (size_t i = 0; i < q.kws.size(); ++i)
      if (std::find(v.words.begin(), v.words.end(), q.kws[i]) !=
          v.words.end())
        qv.bm |= 1u << i;
    return qv;
  }
  template <class ICtx>
  void init_activate(ICtx& ictx, const QueryContent& q) const {
    for (const auto& kw : q.kws) {
      auto it = inv.find(kw);
      if (it == inv.end()) continue;
      for (uint32_t pos : it->second) ictx.activate(pos);
    }
  }

  template <class Ctx>
  void send_up(Ctx& ctx, AggValue& contrib) const {
    if (ctx.value().pa >= 0) {
      ctx.send(ctx.value().pa, Message{ctx.id(), ctx.qvalue().bm, 0});
      contrib.parent_msgs += 1;
    }
    ctx.qvalue().sent_bm = ctx.qvalue().bm;
  }

  template <class Ctx>
  void compute(Ctx& ctx, std::span<Message> inbox) const {
    if (ctx.query().sem == Semantics::SlcaSimple)
      compute_simple(ctx, inbox);
    else
      compute_aligned(ctx, inbox);
  }

  template <class Ctx>
  void compute_simple(Ctx& ctx, std::span<Message> inbox) const {
    auto& qv = ctx.qvalue();
    const uint32_t full = ctx.query().full;
    AggValue contrib;
    bool any_full_child = false;
    for (auto& m : inbox) {
      qv.bm |= m.bm;
      any_full_child = any_full_child || m.bm == full;
    }
    if (any_full_child) {
      qv.label = kNonSlca;  // covers first labeling and later revocation
    } else if (qv.bm == full && qv.label == kNoLabel) {
      qv.label = kSlca;
    }
    if (qv.bm != 0 && qv.bm != qv.sent_bm) send_up(ctx, contrib);
    ctx.aggregate(contrib);
    ctx.vote_to_halt();
  }

  template <class Ctx>
  void compute_aligned(Ctx& ctx, std::span<Message> inbox) const {
    auto& qv = ctx.qvalue();
    const auto& v = ctx.value();
    const auto& q = ctx.query();
    const uint32_t full = q.full;
    AggValue contrib;
    const uint32_t step = ctx.superstep();

    if (step == 1) {
      // Matching vertices report their level; processing starts top of the
      // next superstep at the deepest matching level.
      contrib.lmax = int32_t(v.level);
      ctx.aggregate(contrib);
      return;  // stay active until processed
    }

    const AggValue* agg = ctx.agg_prev();
    const int32_t lmax = agg ? agg->lmax : -1;
    const int32_t lcur = lmax - int32_t(step - 2);

    // MaxMatch phase 2: downward labeling, orthogonal to level alignment.
    bool down = false;
    for (auto& m : inbox) down = down || m.kind == 1;
    const bool phase2 = q.sem == Semantics::MaxMatch && agg &&
                        agg->phase == 2;
    if (down || (phase2 && qv.label == kSlca && !ctx_handled(qv))) {
      qv.label = kInResult;
      for (auto& [cu, cbm] : qv.kids) {
        if (dominated(qv.kids, cu, cbm)) continue;
        ctx.send(cu, Message{ctx.id(), 0, 1});
      }
      ctx.aggregate(contrib);
      ctx.vote_to_halt();
      return;
    }

    if (qv.processed || int32_t(v.level) > lcur) {
      ctx.aggregate(contrib);
      // MaxMatch SLCAs keep themselves alive until phase 2 starts.
      if (!(q.sem == Semantics::MaxMatch && qv.label == kSlca))
        ctx.vote_to_halt();
      return;
    }
    if (int32_t(v.level) < lcur) {
      // Matching vertex above the current frontier: no-op, stays active.
      ctx.aggregate(contrib);
      return;
    }

    // level == lcur: fold all child bitmaps at once.
    qv.processed = true;
    const uint32_t pre = qv.bm;
    uint32_t or_all = 0, or_nonfull = 0;
    bool any_full_child = false;
    for (auto& m : inbox) {
      or_all |= m.bm;
      if (m.bm == full) any_full_child = true;
      else or_nonfull |= m.bm;
      if (q.sem == Semantics::MaxMatch) qv.kids.emplace_back(m.u, m.bm);
    }
    qv.bm = pre | or_all;
    if (qv.bm == full) qv.label = any_full_child ? kNonSlca : kSlca;
    // ELCA semantics replaces the label with the ELCA mark outright.
    if (q.sem == Semantics::Elca)
      qv.label = (pre | or_nonfull) == full ? kSlca : kNoLabel;
    if (qv.bm != 0) send_up(ctx, contrib);
    ctx.aggregate(contrib);
    if (q.sem == Semantics::MaxMatch && qv.label == kSlca) {
      // SLCAs stay active to seed phase 2.
    } else {
      ctx.vote_to_halt();
    }
  }

  static bool ctx_handled(const QValue& qv) { return qv.label == kInResult; }

  static bool dominated(const std::vector<std::pair<VertexId, uint32_t>>& ks,
                        VertexId u, uint32_t bm) {
    for (auto& [ou, obm] : ks)
      if (ou != u && bm != obm && (bm | obm) == obm) return true;
    return false;
  }

  void agg_merge(AggValue& into, const AggValue& o) const {
    into.lmax = std::max(into.lmax, o.lmax);
    into.parent_msgs += o.parent_msgs;
  }
  AggValue agg_finalize(AggValue m, const AggValue* prev, uint32_t step) const {
    if (prev) {
      m.lmax = std::max(m.lmax, prev->lmax);
      m.phase = prev->phase;
      m.parent_msgs += prev->parent_msgs;
      // Phase 2 becomes visible the superstep after the root level is done.
      if (prev->lmax >= 0 && int32_t(step) >= prev->lmax + 2) m.phase = 2;
    }
    return m;
  }

  void dump_vertex(DumpWriter& w, VertexId id, VValue& v, const QValue& qv,
                   const QueryContent& q) const {
    if (q.sem == Semantics::MaxMatch) {
      if (qv.label == kInResult) w.emit(id, std::to_string(id));
      return;
    }
    bool hit = q.sem == Semantics::Elca ? qv.label == kSlca
                                        : qv.label == kSlca;
    if (hit)
      w.emit(id, std::to_string(v.start) + " " + std::to_string(v.end));
  }
  std::vector<std::string> finalize_answer(const QueryContent& q,
                                           const QueryInfo<AggValue>& info,
                                           std::vector<DumpFragment>& frags) const {
    std::vector<std::string> lines;
    if (q.sem == Semantics::MaxMatch) {
      // Single line: qid followed by the labeled vertex ids in order.
      std::string s = std::to_string(info.qid);
      for (auto& f : frags) s += " " + f.line;
      lines.push_back(std::move(s));
    } else {
      for (auto& f : frags)
        lines.push_back(std::to_string(info.qid) + " " + f.line);
    }
    return lines;
  }
  std::string dump_vdata(VertexId id, const VValue& v) const {
    return dump_xml_vdata(id, v);
  }
};

// Level precompute as its own analytics job: BFS from the root writing
// levels back into the vertex data at dump time.
struct XmlLevelApp {
  using VValue = XmlV;
  struct QValue {
    uint32_t lvl = kInfHops;
  };
  struct Message {
    uint32_t lvl;
  };
  struct QueryContent {};

  VertexId parse_vertex(std::string_view line, VValue& v) const {
    return parse_xml_vertex(line, v);
  }
  QueryContent parse_query(std::string_view text) const {
    if (!split_ws(text).empty() && text != "levels")
      throw std::runtime_error("expected: levels");
    return {};
  }
  QValue init_value(VertexId, const VValue&, const QueryContent&) const {
    return {};
  }
  template <class ICtx>
  void init_activate(ICtx& ictx, const QueryContent&) const {
    for (uint32_t pos = 0; pos < ictx.num_vertices(); ++pos)
      if (ictx.vertex_value(pos).pa < 0) ictx.activate(pos);
  }
  template <class Ctx>
  void compute(Ctx& ctx, std::span<Message>) const {
    auto& qv = ctx.qvalue();
    if (qv.lvl == kInfHops) {
      qv.lvl = ctx.superstep() - 1;
      for (VertexId c : ctx.value().children)
        ctx.send(c, Message{qv.lvl + 1});
    }
    ctx.vote_to_halt();
  }
  static void combine(Message& into, const Message& other) {
    into.lvl = std::min(into.lvl, other.lvl);
  }
  void dump_vertex(DumpWriter&, VertexId, VValue& v, const QValue& qv,
                   const QueryContent&) const {
    if (qv.lvl != kInfHops) v.level = qv.lvl;
  }
  std::string dump_vdata(VertexId id, const VValue& v) const {
    return dump_xml_vdata(id, v);
  }
};

}  // namespace qgl::xmlkw
