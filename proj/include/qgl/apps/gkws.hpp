#pragma once

// Graph keyword search: every qualifying root vertex yields one answer tree
// (root plus, per keyword, the nearest matching vertex within a hop cap).
// The plain variant matches keywords against vertex text only; the RDF
// variant additionally matches edge predicates and literal attributes using
// a four-case broadcast priority:
//   (1) own text match           -> broadcast <v, 0>
//   (2) literal text/pred match  -> broadcast <literal, 1>
//   (3) known field              -> broadcast <v_i, hop> on improvement
//   (4) matching in-edge pred    -> targeted <v, 0> to that in-neighbor
// Fields update on strict hop improvement (ties inside one superstep break
// to the smallest vertex id), which also realizes the (2) > (3) shadowing.

#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qgl/base.hpp"
#include "qgl/engine.hpp"

namespace qgl::gkws {

// ---------------------------------------------------------------------------
// Query: keywords plus an optional `--hops=N` cap override.

struct GkwsQuery {
  std::vector<std::string> kws;
  uint32_t hops = 3;
};

inline GkwsQuery parse_gkws_query(std::string_view text,
                                  uint32_t default_hops) {
  GkwsQuery q;
  q.hops = default_hops;
  for (auto tok : split_ws(text)) {
    if (tok.rfind("--hops=", 0) == 0) {
      int64_t n = parse_i64(tok.substr(7));
      if (n < 0) throw std::runtime_error("hop cap must be >= 0");
      q.hops = uint32_t(n);
      continue;
    }
    auto words = tokenize_words(tok);
    if (words.size() != 1)
      throw std::runtime_error("bad keyword: " + std::string(tok));
    q.kws.push_back(words[0]);
  }
  if (q.kws.empty()) throw std::runtime_error("query needs keywords");
  return q;
}

struct KwField {
  VertexId vi = -1;
  uint32_t hop = kInfHops;
};

inline bool word_in(const std::vector<std::string>& words,
                    const std::string& kw) {
  return std::find(words.begin(), words.end(), kw) != words.end();
}

// Answer-tree line shared by both variants: `qid root k v hop ...`.
template <class Agg>
inline std::vector<std::string> gkws_answer_lines(
    const GkwsQuery&, const QueryInfo<Agg>& info,
    std::vector<DumpFragment>& frags) {
  std::vector<std::string> out;
  for (auto& f : frags)
    out.push_back(std::to_string(info.qid) + " " + std::to_string(f.vid) +
                  " " + f.line);
  return out;
}

// ---------------------------------------------------------------------------
// Plain variant. Graph line: `id \t out-list \t in-list \t words…`.

struct PlainV {
  std::vector<VertexId> out, in;
  std::vector<std::string> words;
};

inline VertexId parse_plain_vertex(std::string_view line, PlainV& v) {
  auto f = split_view(line, '\t');
  if (f.size() != 4)
    throw std::runtime_error("expected `id \\t out \\t in \\t words`");
  VertexId id = parse_i64(f[0]);
  v.out.clear();
  v.in.clear();
  for (auto tok : split_ws(f[1])) v.out.push_back(parse_i64(tok));
  for (auto tok : split_ws(f[2])) v.in.push_back(parse_i64(tok));
  v.words = tokenize_words(f[3]);
  return id;
}

inline std::string dump_plain_vdata(VertexId id, const PlainV& v) {
  auto ids = [](const std::vector<VertexId>& xs) {
    std::string s;
    for (size_t i = 0; i < xs.size(); ++i) {
      if (i) s += ' ';
      s += std::to_string(xs[i]);
    }
    return s;
  };
  std::string w;
  for (size_t i = 0; i < v.words.size(); ++i) {
    if (i) w += ' ';
    w += v.words[i];
  }
  return std::to_string(id) + "\t" + ids(v.out) + "\t" + ids(v.in) + "\t" + w;
}

struct PlainGkwsApp {
  using VValue = PlainV;
  using QValue = std::vector<KwField>;
  struct Message {
    uint32_t ki;
    VertexId vi;
    uint32_t hop;
  };
  using QueryContent = GkwsQuery;

  uint32_t default_hops = 3;
  std::unordered_map<std::string, std::vector<uint32_t>> inv_;

  VertexId parse_vertex(std::string_view line, VValue& v) const {
    return parse_plain_vertex(line, v);
  }
  void load2idx(const VValue& v, VertexId, uint32_t pos) {
    for (auto& w : v.words) inv_[w].push_back(pos);
  }
  QueryContent parse_query(std::string_view text) const {
    return parse_gkws_query(text, default_hops);
  }
  QValue init_value(VertexId id, const VValue& v,
                    const QueryContent& q) const {
    QValue fields(q.kws.size());
    for (size_t i = 0; i < q.kws.size(); ++i)
      if (word_in(v.words, q.kws[i])) fields[i] = {id, 0};
    return fields;
  }
  template <class ICtx>
  void init_activate(ICtx& ictx, const QueryContent& q) const {
    for (auto& kw : q.kws)
      if (auto it = inv_.find(kw); it != inv_.end())
        for (uint32_t pos : it->second) ictx.activate(pos);
  }

  template <class Ctx>
  void compute(Ctx& ctx, std::span<Message> inbox) const {
    auto& fields = ctx.qvalue();
    const auto& q = ctx.query();
    std::vector<uint32_t> improved;
    if (ctx.superstep() == 1) {
      for (uint32_t i = 0; i < fields.size(); ++i)
        if (fields[i].hop == 0) improved.push_back(i);
    } else {
      std::vector<KwField> best(fields.size());
      for (auto& m : inbox) {
        KwField& b = best[m.ki];
        if (m.hop < b.hop || (m.hop == b.hop && m.vi < b.vi))
          b = {m.vi, m.hop};
      }
      for (uint32_t i = 0; i < fields.size(); ++i)
        if (best[i].hop != kInfHops && best[i].hop + 1 < fields[i].hop) {
          fields[i] = {best[i].vi, best[i].hop + 1};
          improved.push_back(i);
        }
    }
    if (ctx.superstep() <= q.hops) {
      for (uint32_t i : improved)
        for (VertexId nb : ctx.value().in)
          ctx.send(nb, Message{i, fields[i].vi, fields[i].hop});
    }
    ctx.vote_to_halt();
  }

  void dump_vertex(DumpWriter& dw, VertexId id, const VValue&,
                   const QValue& fields, const QueryContent& q) const {
    std::string line;
    for (size_t i = 0; i < fields.size(); ++i) {
      if (fields[i].hop > q.hops) return;
      if (i) line += ' ';
      line += q.kws[i] + " " + std::to_string(fields[i].vi) + " " +
              std::to_string(fields[i].hop);
    }
    dw.emit(id, line);
  }
  std::vector<std::string> finalize_answer(
      const QueryContent& q, const QueryInfo<std::monostate>& info,
      std::vector<DumpFragment>& frags) const {
    return gkws_answer_lines(q, info, frags);
  }
  std::string dump_vdata(VertexId id, const VValue& v) const {
    return dump_plain_vdata(id, v);
  }
};

// ---------------------------------------------------------------------------
// RDF variant. Vertices are resources; literal objects become attributes
// with their own ids (one per triple occurrence).

struct RdfV {
  std::string text;  // the resource URI/text
  std::vector<std::pair<VertexId, std::string>> in;  // (in-neighbor, pred)
  struct Lit {
    VertexId id;
    std::string pred, text;
  };
  std::vector<Lit> lits;
};

// Triple lines `s \t p \t o \t {R|L}` -> RDF vertex table. Ids are assigned
// by first appearance (subjects and resource objects share the counter;
// every literal occurrence gets a fresh id).
inline std::vector<std::pair<VertexId, RdfV>> convert_triples(
    const std::vector<std::string>& lines) {
  std::vector<std::pair<VertexId, RdfV>> verts;
  std::unordered_map<std::string, size_t> res_pos;  // text -> index in verts
  VertexId next_id = 0;
  auto resource = [&](const std::string& text) -> size_t {
    auto it = res_pos.find(text);
    if (it != res_pos.end()) return it->second;
    res_pos.emplace(text, verts.size());
    verts.push_back({next_id++, RdfV{text, {}, {}}});
    return verts.size() - 1;
  };
  size_t lineno = 0;
  for (const auto& line : lines) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_view(line, '\t');
    if (f.size() != 4 || f[0].empty() || f[1].empty() || f[2].empty() ||
        (f[3] != "R" && f[3] != "L"))
      throw LoadError("line " + std::to_string(lineno) +
                      ": triple must be `s \\t p \\t o \\t {R|L}`");
    size_t s = resource(std::string(f[0]));
    if (f[3] == "R") {
      VertexId sid = verts[s].first;
      size_t o = resource(std::string(f[2]));
      verts[o].second.in.push_back({sid, std::string(f[1])});
    } else {
      verts[s].second.lits.push_back(
          {next_id++, std::string(f[1]), std::string(f[2])});
    }
  }
  return verts;
}

struct RdfGkwsApp {
  using VValue = RdfV;
  using QValue = std::vector<KwField>;
  struct Message {
    uint32_t ki;
    VertexId vi;
    uint32_t hop;
  };
  using QueryContent = GkwsQuery;

  uint32_t default_hops = 3;
  std::unordered_map<std::string, std::vector<uint32_t>> inv_;

  QueryContent parse_query(std::string_view text) const {
    return parse_gkws_query(text, default_hops);
  }
  void load2idx(const VValue& v, VertexId, uint32_t pos) {
    auto add = [&](const std::string& text) {
      for (auto& w : tokenize_words(text)) inv_[w].push_back(pos);
    };
    add(v.text);
    for (auto& [_, pred] : v.in) add(pred);
    for (auto& l : v.lits) {
      add(l.pred);
      add(l.text);
    }
  }

  static bool text_match(const std::string& text, const std::string& kw) {
    return word_in(tokenize_words(text), kw);
  }
  // Case (2): smallest matching literal id, or -1.
  static VertexId lit_match(const VValue& v, const std::string& kw) {
    VertexId best = -1;
    for (auto& l : v.lits)
      if (text_match(l.text, kw) || text_match(l.pred, kw))
        if (best == -1 || l.id < best) best = l.id;
    return best;
  }

  QValue init_value(VertexId id, const VValue& v,
                    const QueryContent& q) const {
    QValue fields(q.kws.size());
    for (size_t i = 0; i < q.kws.size(); ++i) {
      if (text_match(v.text, q.kws[i])) {
        fields[i] = {id, 0};
      } else if (VertexId l = lit_match(v, q.kws[i]); l != -1) {
        fields[i] = {l, 1};
      }
    }
    return fields;
  }
  template <class ICtx>
  void init_activate(ICtx& ictx, const QueryContent& q) const {
    for (auto& kw : q.kws)
      if (auto it = inv_.find(kw); it != inv_.end())
        for (uint32_t pos : it->second) ictx.activate(pos);
  }

  template <class Ctx>
  void compute(Ctx& ctx, std::span<Message> inbox) const {
    auto& fields = ctx.qvalue();
    const auto& v = ctx.value();
    const auto& q = ctx.query();
    bool may_send = ctx.superstep() <= q.hops;
    if (ctx.superstep() == 1) {
      if (may_send) {
        for (uint32_t i = 0; i < fields.size(); ++i) {
          if (fields[i].hop <= 1) {
            // Cases (1) and (2): broadcast the own or literal match.
            for (auto& [nb, _] : v.in)
              ctx.send(nb, Message{i, fields[i].vi, fields[i].hop});
          } else {
            // Case (4): targeted send along matching in-edge predicates.
            for (auto& [nb, pred] : v.in)
              if (text_match(pred, q.kws[i]))
                ctx.send(nb, Message{i, ctx.id(), 0});
          }
        }
      }
      ctx.vote_to_halt();
      return;
    }
    std::vector<KwField> best(fields.size());
    for (auto& m : inbox) {
      KwField& b = best[m.ki];
      if (m.hop < b.hop || (m.hop == b.hop && m.vi < b.vi))
        b = {m.vi, m.hop};
    }
    for (uint32_t i = 0; i < fields.size(); ++i) {
      // Strict improvement; own and literal fields (hops 0/1) are final,
      // which gives cases (1)/(2) priority over relaying (case 3).
      if (best[i].hop != kInfHops && best[i].hop + 1 < fields[i].hop) {
        fields[i] = {best[i].vi, best[i].hop + 1};
        if (may_send)
          for (auto& [nb, _] : v.in)
            ctx.send(nb, Message{i, fields[i].vi, fields[i].hop});
      }
    }
    ctx.vote_to_halt();
  }

  void dump_vertex(DumpWriter& dw, VertexId id, const VValue&,
                   const QValue& fields, const QueryContent& q) const {
    std::string line;
    for (size_t i = 0; i < fields.size(); ++i) {
      if (fields[i].hop > q.hops) return;
      if (i) line += ' ';
      line += q.kws[i] + " " + std::to_string(fields[i].vi) + " " +
              std::to_string(fields[i].hop);
    }
    dw.emit(id, line);
  }
  std::vector<std::string> finalize_answer(
      const QueryContent& q, const QueryInfo<std::monostate>& info,
      std::vector<DumpFragment>& frags) const {
    return gkws_answer_lines(q, info, frags);
  }
};

}  // namespace qgl::gkws
