#pragma once

// Approximate terrain shortest paths.  A DEM elevation grid is transformed
// into a weighted network: every cell edge is subdivided so neighboring
// vertices are at most eps apart (split-point elevations linearly
// interpolated), and each cell gains straight-line shortcut edges between
// boundary vertices that do not share a horizontal or vertical cell edge.
// Point-to-point distance queries run as single-source shortest path with an
// optional Euclidean-lower-bound early termination driven by the aggregator.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qgl/base.hpp"
#include "qgl/engine.hpp"

namespace qgl::terrain {

using Point = std::array<double, 3>;

constexpr double kInfD = std::numeric_limits<double>::infinity();

inline double dist3(const Point& a, const Point& b) {
  double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Shortest round-trippable decimal form of a double.
inline std::string fmt_f(double d) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

inline double parse_f(std::string_view tok) {
  std::string s(tok);
  size_t used = 0;
  double d;
  try {
    d = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::runtime_error("bad number: " + s);
  }
  if (used != s.size()) throw std::runtime_error("bad number: " + s);
  return d;
}

// ---------------------------------------------------------------------------
// DEM grid.

struct DemGrid {
  int rows = 0;
  int cols = 0;
  double spacing = 0;              // meters between samples
  std::vector<double> elev;        // row-major, rows*cols entries

  double at(int r, int c) const { return elev[size_t(r) * cols + c]; }
};

// Input: header `rows cols spacing` then row-major elevations, all
// whitespace-separated.
inline DemGrid parse_dem(std::string_view text) {
  std::istringstream in{std::string(text)};
  DemGrid g;
  if (!(in >> g.rows >> g.cols >> g.spacing))
    throw LoadError("DEM header must be `rows cols spacing`");
  if (g.rows < 2 || g.cols < 2)
    throw LoadError("degenerate grid: need at least 2 rows and 2 columns");
  if (!(g.spacing > 0) || !std::isfinite(g.spacing))
    throw LoadError("DEM spacing must be a positive finite number");
  g.elev.resize(size_t(g.rows) * g.cols);
  for (auto& e : g.elev) {
    if (!(in >> e)) throw LoadError("DEM needs rows*cols elevation samples");
    if (!std::isfinite(e)) throw LoadError("DEM elevations must be finite");
  }
  std::string extra;
  if (in >> extra) throw LoadError("trailing data after DEM elevations");
  return g;
}

// ---------------------------------------------------------------------------
// Network construction.

struct TerrainNetwork {
  std::vector<Point> pos;
  std::vector<std::vector<std::pair<VertexId, double>>> adj;  // undirected

  size_t edge_count() const {
    size_t twice = 0;
    for (auto& a : adj) twice += a.size();
    return twice / 2;
  }

  // App graph line: `id \t x y z \t nbr:weight …`.
  std::vector<std::string> lines() const {
    std::vector<std::string> ls;
    ls.reserve(pos.size());
    for (size_t v = 0; v < pos.size(); ++v) {
      std::string s = std::to_string(v) + "\t" + fmt_f(pos[v][0]) + " " +
                      fmt_f(pos[v][1]) + " " + fmt_f(pos[v][2]) + "\t";
      for (size_t i = 0; i < adj[v].size(); ++i) {
        if (i) s += ' ';
        s += std::to_string(adj[v][i].first) + ":" + fmt_f(adj[v][i].second);
      }
      ls.push_back(std::move(s));
    }
    return ls;
  }
};

inline TerrainNetwork build_network(const DemGrid& g, double eps) {
  if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
  const int k = std::max(1, int(std::ceil(g.spacing / eps)));  // segments
  const int m = k - 1;                                         // split points
  const int R = g.rows, C = g.cols;

  TerrainNetwork net;
  auto corner = [&](int r, int c) { return VertexId(r) * C + c; };
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c)
      net.pos.push_back({c * g.spacing, r * g.spacing, g.at(r, c)});

  // Split vertices: one block per horizontal grid edge, then per vertical
  // grid edge, each holding m interior points ordered from the first corner.
  const VertexId hbase = VertexId(R) * C;
  const VertexId vbase = hbase + VertexId(R) * (C - 1) * m;
  auto interp = [&](VertexId a, VertexId b, int j) -> Point {
    double f = double(j) / k;
    return {net.pos[a][0] + f * (net.pos[b][0] - net.pos[a][0]),
            net.pos[a][1] + f * (net.pos[b][1] - net.pos[a][1]),
            net.pos[a][2] + f * (net.pos[b][2] - net.pos[a][2])};
  };
  for (int r = 0; r < R; ++r)
    for (int c = 0; c + 1 < C; ++c)
      for (int j = 1; j <= m; ++j)
        net.pos.push_back(interp(corner(r, c), corner(r, c + 1), j));
  for (int r = 0; r + 1 < R; ++r)
    for (int c = 0; c < C; ++c)
      for (int j = 1; j <= m; ++j)
        net.pos.push_back(interp(corner(r, c), corner(r + 1, c), j));

  net.adj.assign(net.pos.size(), {});
  auto add_edge = [&](VertexId a, VertexId b) {
    double w = dist3(net.pos[a], net.pos[b]);
    net.adj[a].push_back({b, w});
    net.adj[b].push_back({a, w});
  };

  // Ordered vertex chain of one grid edge (corner, splits…, corner).
  auto hchain = [&](int r, int c) {
    std::vector<VertexId> vs{corner(r, c)};
    VertexId base = hbase + (VertexId(r) * (C - 1) + c) * m;
    for (int j = 0; j < m; ++j) vs.push_back(base + j);
    vs.push_back(corner(r, c + 1));
    return vs;
  };
  auto vchain = [&](int r, int c) {
    std::vector<VertexId> vs{corner(r, c)};
    VertexId base = vbase + (VertexId(r) * C + c) * m;
    for (int j = 0; j < m; ++j) vs.push_back(base + j);
    vs.push_back(corner(r + 1, c));
    return vs;
  };

  for (int r = 0; r < R; ++r)
    for (int c = 0; c + 1 < C; ++c) {
      auto vs = hchain(r, c);
      for (size_t i = 0; i + 1 < vs.size(); ++i) add_edge(vs[i], vs[i + 1]);
    }
  for (int r = 0; r + 1 < R; ++r)
    for (int c = 0; c < C; ++c) {
      auto vs = vchain(r, c);
      for (size_t i = 0; i + 1 < vs.size(); ++i) add_edge(vs[i], vs[i + 1]);
    }

  // Per cell: shortcut between every boundary pair that shares no cell edge
  // (corners lie on two edges).
  for (int r = 0; r + 1 < R; ++r)
    for (int c = 0; c + 1 < C; ++c) {
      std::array<std::vector<VertexId>, 4> edges = {
          hchain(r, c), hchain(r + 1, c), vchain(r, c), vchain(r, c + 1)};
      std::map<VertexId, uint8_t> mask;
      for (int e = 0; e < 4; ++e)
        for (VertexId v : edges[e]) mask[v] |= uint8_t(1u << e);
      std::vector<std::pair<VertexId, uint8_t>> bd(mask.begin(), mask.end());
      for (size_t i = 0; i < bd.size(); ++i)
        for (size_t j = i + 1; j < bd.size(); ++j)
          if ((bd[i].second & bd[j].second) == 0)
            add_edge(bd[i].first, bd[j].first);
    }

  for (auto& a : net.adj) std::sort(a.begin(), a.end());
  return net;
}

// Comparison baseline: corners only, axis edges plus one fixed diagonal per
// cell (top-left to bottom-right), no splitting and no shortcuts.
inline TerrainNetwork build_triangulated(const DemGrid& g) {
  if (g.rows < 2 || g.cols < 2)
    throw std::invalid_argument("degenerate grid");
  TerrainNetwork net;
  auto corner = [&](int r, int c) { return VertexId(r) * g.cols + c; };
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c)
      net.pos.push_back({c * g.spacing, r * g.spacing, g.at(r, c)});
  net.adj.assign(net.pos.size(), {});
  auto add_edge = [&](VertexId a, VertexId b) {
    double w = dist3(net.pos[a], net.pos[b]);
    net.adj[a].push_back({b, w});
    net.adj[b].push_back({a, w});
  };
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      if (c + 1 < g.cols) add_edge(corner(r, c), corner(r, c + 1));
      if (r + 1 < g.rows) add_edge(corner(r, c), corner(r + 1, c));
      if (r + 1 < g.rows && c + 1 < g.cols)
        add_edge(corner(r, c), corner(r + 1, c + 1));
    }
  for (auto& a : net.adj) std::sort(a.begin(), a.end());
  return net;
}

// ---------------------------------------------------------------------------
// Vertex line parsing / dumping.

struct TerrainV {
  Point pos{};
  std::vector<std::pair<VertexId, double>> nbrs;
};

inline VertexId parse_terrain_vertex(std::string_view line, TerrainV& v) {
  auto fields = split_view(line, '\t');
  if (fields.size() != 3)
    throw std::runtime_error("expected `id \\t x y z \\t nbr:w ...`");
  VertexId id = parse_i64(fields[0]);
  auto xyz = split_ws(fields[1]);
  if (xyz.size() != 3) throw std::runtime_error("expected 3 coordinates");
  for (int i = 0; i < 3; ++i) v.pos[size_t(i)] = parse_f(xyz[size_t(i)]);
  v.nbrs.clear();
  for (auto tok : split_ws(fields[2])) {
    std::string_view sv(tok);
    size_t colon = sv.find(':');
    if (colon == std::string_view::npos)
      throw std::runtime_error("neighbor must be `id:weight`: " +
                               std::string(sv));
    VertexId nb = parse_i64(sv.substr(0, colon));
    double w = parse_f(sv.substr(colon + 1));
    if (!(w >= 0) || !std::isfinite(w))
      throw std::runtime_error("edge weight must be finite and >= 0: " +
                               std::string(sv));
    v.nbrs.push_back({nb, w});
  }
  return id;
}

inline std::string dump_terrain_vdata(VertexId id, const TerrainV& v) {
  std::string s = std::to_string(id) + "\t" + fmt_f(v.pos[0]) + " " +
                  fmt_f(v.pos[1]) + " " + fmt_f(v.pos[2]) + "\t";
  for (size_t i = 0; i < v.nbrs.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(v.nbrs[i].first) + ":" + fmt_f(v.nbrs[i].second);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Query.

struct TerrainQuery {
  VertexId s = 0;
  VertexId t = 0;
  bool early_term = true;
};

inline TerrainQuery parse_terrain_query(std::string_view text) {
  auto toks = split_ws(text);
  if (toks.size() != 2 && toks.size() != 3)
    throw std::runtime_error("query must be `s t [--no-early-term]`");
  TerrainQuery q;
  q.s = parse_i64(toks[0]);
  q.t = parse_i64(toks[1]);
  if (toks.size() == 3) {
    if (toks[2] != "--no-early-term")
      throw std::runtime_error("unknown query flag: " + std::string(toks[2]));
    q.early_term = false;
  }
  return q;
}

// ---------------------------------------------------------------------------
// SSSP with Euclidean-lower-bound early termination.
//
// Step 1 runs only at s, which publishes its coordinates (and the per-query
// early-termination switch) through the aggregator; from step 2 on, every
// newly relaxed vertex contributes d_E(s,v) to the wavefront minimum, and the
// round hook stops the query once t's settled distance drops below it.
struct SsspApp {
  using VValue = TerrainV;
  struct QValue {
    double d = kInfD;
    VertexId pred = -1;
    uint32_t hops = kInfHops;
  };
  struct Message {
    double d;
    VertexId pred;
    uint32_t hops;
  };
  using QueryContent = TerrainQuery;
  struct AggValue {
    double demin = kInfD;  // min d_E(s,v) over this step's wavefront
    double dt = kInfD;     // best-so-far d_N(s,t), carried across steps
    Point spos{};          // s's coordinates, set at step 1 and carried
    bool spos_set = false;
    bool early = true;     // AND of the per-query early-termination flags
  };

  VertexId parse_vertex(std::string_view line, VValue& v) const {
    return parse_terrain_vertex(line, v);
  }
  QueryContent parse_query(std::string_view text) const {
    return parse_terrain_query(text);
  }
  template <class Lookup>
  std::string validate(const QueryContent& q, const Lookup& g) const {
    for (VertexId v : {q.s, q.t})
      if (!g.exists(v)) return "vertex not in graph: " + std::to_string(v);
    return {};
  }
  QValue init_value(VertexId, const VValue&, const QueryContent&) const {
    return {};
  }
  template <class ICtx>
  void init_activate(ICtx& ictx, const QueryContent& q) const {
    if (auto pos = ictx.get_vpos(q.s)) ictx.activate(*pos);
  }

  static bool msg_less(const Message& a, const Message& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.hops != b.hops) return a.hops < b.hops;
    return a.pred < b.pred;
  }

  template <class Ctx>
  void compute(Ctx& ctx, std::span<Message> inbox) const {
    auto& qv = ctx.qvalue();
    const auto& v = ctx.value();
    const auto& q = ctx.query();
    bool relaxed = false;
    if (ctx.superstep() == 1) {
      qv = {0.0, -1, 0};
      relaxed = true;
    } else if (!inbox.empty()) {
      const Message* best = &inbox[0];
      for (auto& m : inbox)
        if (msg_less(m, *best)) best = &m;
      if (best->d < qv.d) {
        qv = {best->d, best->pred, best->hops};
        relaxed = true;
      }
    }
    if (relaxed) {
      AggValue contrib;
      if (ctx.superstep() == 1) {
        contrib.spos = v.pos;
        contrib.spos_set = true;
        contrib.early = q.early_term;
        contrib.demin = 0.0;
      } else if (const AggValue* p = ctx.agg_prev(); p && p->spos_set) {
        contrib.demin = dist3(p->spos, v.pos);
      }
      if (ctx.id() == q.t) contrib.dt = qv.d;
      ctx.aggregate(contrib);
      for (auto [nb, w] : v.nbrs)
        ctx.send(nb, Message{qv.d + w, ctx.id(), qv.hops + 1});
    }
    ctx.vote_to_halt();
  }

  static void combine(Message& into, const Message& other) {
    if (msg_less(other, into)) into = other;
  }
  void agg_merge(AggValue& into, const AggValue& o) const {
    into.demin = std::min(into.demin, o.demin);
    into.dt = std::min(into.dt, o.dt);
    if (!into.spos_set && o.spos_set) {
      into.spos = o.spos;
      into.spos_set = true;
    }
    into.early = into.early && o.early;
  }
  AggValue agg_finalize(AggValue m, const AggValue* prev, uint32_t) const {
    if (prev) {
      m.dt = std::min(m.dt, prev->dt);
      if (!m.spos_set && prev->spos_set) {
        m.spos = prev->spos;
        m.spos_set = true;
      }
      m.early = m.early && prev->early;
    }
    return m;
  }
  void agg_round(const AggValue& a, QueryControl& ctl, uint32_t) const {
    // Every vertex relaxed later sits beyond the current wavefront's minimum
    // Euclidean distance from s, so t's distance can no longer improve.
    if (a.early && a.dt < a.demin) ctl.force_terminate();
  }

  void dump_vertex(DumpWriter& dw, VertexId id, const VValue& v,
                   const QValue& qv, const QueryContent&) const {
    if (qv.d == kInfD) return;
    dw.emit(id, fmt_f(qv.d) + " " + std::to_string(qv.hops) + " " +
                    std::to_string(qv.pred) + " " + fmt_f(v.pos[0]) + " " +
                    fmt_f(v.pos[1]) + " " + fmt_f(v.pos[2]));
  }

  // Answer line `qid dist hops supersteps`; when reachable, followed by the
  // extracted path as `x y z` lines from s to t.
  std::vector<std::string> finalize_answer(
      const QueryContent& q, const QueryInfo<AggValue>& info,
      std::vector<DumpFragment>& frags) const {
    struct Entry {
      double d;
      uint32_t hops;
      VertexId pred;
      Point pos;
    };
    std::map<VertexId, Entry> reached;
    for (auto& f : frags) {
      auto toks = split_ws(f.line);
      Entry e;
      e.d = parse_f(toks[0]);
      e.hops = uint32_t(parse_i64(toks[1]));
      e.pred = parse_i64(toks[2]);
      for (int i = 0; i < 3; ++i)
        e.pos[size_t(i)] = parse_f(toks[size_t(i) + 3]);
      reached[f.vid] = e;
    }
    std::vector<std::string> out;
    auto it = reached.find(q.t);
    if (it == reached.end()) {
      out.push_back(std::to_string(info.qid) + " INF INF " +
                    std::to_string(info.supersteps));
      return out;
    }
    out.push_back(std::to_string(info.qid) + " " + fmt_f(it->second.d) + " " +
                  std::to_string(it->second.hops) + " " +
                  std::to_string(info.supersteps));
    std::vector<Point> path;
    VertexId at = q.t;
    while (at != -1 && path.size() <= reached.size()) {
      const Entry& e = reached.at(at);
      path.push_back(e.pos);
      at = e.pred;
    }
    for (auto p = path.rbegin(); p != path.rend(); ++p)
      out.push_back(fmt_f((*p)[0]) + " " + fmt_f((*p)[1]) + " " +
                    fmt_f((*p)[2]));
    return out;
  }

  std::string dump_vdata(VertexId id, const VValue& v) const {
    return dump_terrain_vdata(id, v);
  }
};

// ---------------------------------------------------------------------------
// Answer inspection helpers.

inline double answer_dist(const std::vector<std::string>& lines) {
  if (lines.empty()) throw std::runtime_error("empty answer");
  auto toks = split_ws(lines[0]);
  if (toks.size() != 4) throw std::runtime_error("bad answer line");
  return toks[1] == "INF" ? kInfD : parse_f(toks[1]);
}

inline uint32_t answer_hops(const std::vector<std::string>& lines) {
  auto toks = split_ws(lines.at(0));
  return toks.at(2) == "INF" ? kInfHops : uint32_t(parse_i64(toks[2]));
}

// The `x y z` polyline attached to a finite answer.
inline std::vector<Point> answer_path(const std::vector<std::string>& lines) {
  if (answer_dist(lines) == kInfD)
    throw std::runtime_error("no path on an INF answer");
  std::vector<Point> path;
  for (size_t i = 1; i < lines.size(); ++i) {
    auto toks = split_ws(lines[i]);
    if (toks.size() != 3) throw std::runtime_error("bad path line");
    path.push_back({parse_f(toks[0]), parse_f(toks[1]), parse_f(toks[2])});
  }
  return path;
}

inline double polyline_length(const std::vector<Point>& p) {
  double len = 0;
  for (size_t i = 0; i + 1 < p.size(); ++i) len += dist3(p[i], p[i + 1]);
  return len;
}

// ---------------------------------------------------------------------------
// Hausdorff distance between polylines with point-to-segment distances,
// sampled at <= `step` meters of arc length.

inline double point_seg_dist(const Point& p, const Point& a, const Point& b) {
  Point ab{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
  double len2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
  double t = 0;
  if (len2 > 0) {
    t = ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1] +
         (p[2] - a[2]) * ab[2]) /
        len2;
    t = std::clamp(t, 0.0, 1.0);
  }
  Point c{a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]};
  return dist3(p, c);
}

inline std::vector<Point> sample_polyline(const std::vector<Point>& p,
                                          double step = 0.1) {
  std::vector<Point> out{p.front()};
  for (size_t i = 0; i + 1 < p.size(); ++i) {
    double len = dist3(p[i], p[i + 1]);
    int n = std::max(1, int(std::ceil(len / step)));
    for (int j = 1; j <= n; ++j) {
      double f = double(j) / n;
      out.push_back({p[i][0] + f * (p[i + 1][0] - p[i][0]),
                     p[i][1] + f * (p[i + 1][1] - p[i][1]),
                     p[i][2] + f * (p[i + 1][2] - p[i][2])});
    }
  }
  return out;
}

inline double directed_hausdorff(const std::vector<Point>& p1,
                                 const std::vector<Point>& p2,
                                 double step = 0.1) {
  double worst = 0;
  for (const Point& s : sample_polyline(p1, step)) {
    double best = kInfD;
    if (p2.size() == 1) best = dist3(s, p2[0]);
    for (size_t i = 0; i + 1 < p2.size(); ++i)
      best = std::min(best, point_seg_dist(s, p2[i], p2[i + 1]));
    worst = std::max(worst, best);
  }
  return worst;
}

inline double hausdorff(const std::vector<Point>& p1,
                        const std::vector<Point>& p2, double step = 0.1) {
  if (p1.empty() || p2.empty())
    throw std::invalid_argument("hausdorff needs nonempty polylines");
  return std::max(directed_hausdorff(p1, p2, step),
                  directed_hausdorff(p2, p1, step));
}

}  // namespace qgl::terrain
