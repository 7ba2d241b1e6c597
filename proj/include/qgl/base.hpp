#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qgl {

using VertexId = int64_t;
using QueryId = uint32_t;

inline constexpr uint32_t kInfHops = std::numeric_limits<uint32_t>::max();
inline constexpr double kInfDist = std::numeric_limits<double>::infinity();

// Ownership is fixed for a run: vertex id hashed onto one of W workers.
inline int owner_of(VertexId id, int workers) {
  return static_cast<int>(static_cast<uint64_t>(id) % static_cast<uint64_t>(workers));
}

enum class TransportKind { InProcess, Socket };
enum class BadDestPolicy { Error, Drop };

struct EngineConfig {
  int workers = 1;
  int capacity = 8;
  bool combiner_enabled = true;
  TransportKind transport = TransportKind::InProcess;
  BadDestPolicy on_bad_dest = BadDestPolicy::Error;
  // Test hook: shuffle each inbox before compute to flush out order-sensitive
  // vertex programs.
  bool shuffle_inboxes = false;
  uint64_t shuffle_seed = 0;
};

struct SuperRoundReport {
  uint64_t round = 0;
  std::vector<QueryId> admitted;
  std::vector<QueryId> finished;  // dumped and collected this round
  uint64_t messages_sent = 0;
  uint64_t messages_delivered = 0;
  int active_queries = 0;
};

struct QueryResult {
  QueryId qid = 0;
  std::string text;
  std::vector<std::string> lines;
  bool error = false;
  std::string error_msg;
  uint32_t supersteps = 0;       // compute supersteps n_q
  uint64_t rounds_occupied = 0;  // n_q + 1
  uint64_t vq_allocs = 0;        // distinct vertices touched
  uint64_t messages = 0;
  uint64_t admitted_round = 0;
  double wall_seconds = 0.0;
};

struct EngineDefect : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LoadError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- small text helpers shared by loaders and apps ----

inline std::vector<std::string_view> split_view(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    size_t p = s.find(sep, start);
    if (p == std::string_view::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, p - start));
    start = p + 1;
  }
  return out;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline int64_t parse_i64(std::string_view tok) {
  int64_t v = 0;
  bool neg = false;
  size_t i = 0;
  if (i < tok.size() && (tok[i] == '-' || tok[i] == '+')) neg = tok[i++] == '-';
  if (i >= tok.size()) throw LoadError("bad integer: '" + std::string(tok) + "'");
  for (; i < tok.size(); ++i) {
    if (tok[i] < '0' || tok[i] > '9')
      throw LoadError("bad integer: '" + std::string(tok) + "'");
    v = v * 10 + (tok[i] - '0');
  }
  return neg ? -v : v;
}

// Lowercase alphanumeric word tokenization used by all text-matching apps.
inline std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      cur.push_back(c);
    } else if (c >= 'A' && c <= 'Z') {
      cur.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

}  // namespace qgl
