#pragma once

// Minimal XML reader producing the vertex-centric node table used by the
// keyword-search app: one node per element and per non-blank text run, ids
// in document order, with byte offsets into the source.

#include <string>
#include <string_view>
#include <vector>

#include "qgl/base.hpp"

namespace qgl::xml {

struct DocNode {
  VertexId id = 0;
  VertexId pa = -1;
  uint32_t level = 0;
  uint64_t start = 0;
  uint64_t end = 0;
  std::vector<std::string> words;  // tokenized text (leaves only)
  std::vector<VertexId> children;
  std::string tag;  // element name; empty for text leaves
};

[[noreturn]] inline void fail_at(const std::string& what, size_t off) {
  throw LoadError(what + " at offset " + std::to_string(off));
}

inline std::vector<DocNode> parse_document(std::string_view doc) {
  std::vector<DocNode> nodes;
  std::vector<size_t> stack;  // indexes of open elements

  auto add_node = [&](VertexId pa, uint32_t level) -> size_t {
    DocNode n;
    n.id = VertexId(nodes.size());
    n.pa = pa;
    n.level = level;
    nodes.push_back(std::move(n));
    if (pa >= 0) nodes[size_t(pa)].children.push_back(nodes.back().id);
    return nodes.size() - 1;
  };

  size_t i = 0;
  auto flush_text = [&](size_t from, size_t to) {
    std::string_view text = doc.substr(from, to - from);
    auto words = tokenize_words(text);
    if (words.empty()) return;
    if (stack.empty()) fail_at("text outside the root element", from);
    size_t pi = stack.back();
    size_t n = add_node(nodes[pi].id, nodes[pi].level + 1);
    nodes[n].start = from;
    nodes[n].end = to;
    nodes[n].words = std::move(words);
  };

  size_t text_start = 0;
  bool root_closed = false;
  while (i < doc.size()) {
    if (doc[i] != '<') {
      ++i;
      continue;
    }
    flush_text(text_start, i);
    size_t lt = i;
    if (doc.compare(i, 4, "<!--") == 0) {
      size_t e = doc.find("-->", i + 4);
      if (e == std::string_view::npos) fail_at("unterminated comment", lt);
      i = e + 3;
      text_start = i;
      continue;
    }
    if (doc.compare(i, 2, "<?") == 0) {
      size_t e = doc.find("?>", i + 2);
      if (e == std::string_view::npos)
        fail_at("unterminated processing instruction", lt);
      i = e + 2;
      text_start = i;
      continue;
    }
    size_t gt = doc.find('>', i);
    if (gt == std::string_view::npos) fail_at("unterminated tag", lt);
    std::string_view body = doc.substr(i + 1, gt - i - 1);
    i = gt + 1;
    text_start = i;
    if (!body.empty() && body.front() == '/') {
      // closing tag
      std::string name(body.substr(1));
      while (!name.empty() && (name.back() == ' ' || name.back() == '\t'))
        name.pop_back();
      if (stack.empty()) fail_at("unmatched closing tag </" + name + ">", lt);
      size_t top = stack.back();
      if (nodes[top].tag != name)
        fail_at("mismatched closing tag </" + name + ">, expected </" +
                    nodes[top].tag + ">",
                lt);
      nodes[top].end = gt + 1;
      stack.pop_back();
      if (stack.empty()) root_closed = true;
    } else {
      bool self_close = !body.empty() && body.back() == '/';
      if (self_close) body.remove_suffix(1);
      // tag name = up to first whitespace; attributes are ignored
      size_t sp = body.find_first_of(" \t\r\n");
      std::string name(sp == std::string_view::npos ? body
                                                    : body.substr(0, sp));
      if (name.empty()) fail_at("empty tag name", lt);
      if (stack.empty() && !nodes.empty())
        fail_at("multiple root elements", lt);
      VertexId pa = stack.empty() ? -1 : nodes[stack.back()].id;
      uint32_t lvl = stack.empty() ? 0 : nodes[stack.back()].level + 1;
      size_t n = add_node(pa, lvl);
      nodes[n].start = lt;
      nodes[n].tag = name;
      if (self_close) {
        nodes[n].end = gt + 1;
        if (stack.empty()) root_closed = true;
      } else {
        stack.push_back(n);
      }
    }
  }
  flush_text(text_start, doc.size());
  if (!stack.empty())
    fail_at("unclosed element <" + nodes[stack.back()].tag + ">",
            doc.size());
  if (nodes.empty()) throw LoadError("document has no root element");
  (void)root_closed;
  return nodes;
}

// Node-table line: `id \t pa \t level \t start \t end \t words \t children`.
inline std::vector<std::string> node_lines(const std::vector<DocNode>& ns) {
  std::vector<std::string> lines;
  lines.reserve(ns.size());
  for (const auto& n : ns) {
    std::string s = std::to_string(n.id) + "\t" + std::to_string(n.pa) +
                    "\t" + std::to_string(n.level) + "\t" +
                    std::to_string(n.start) + "\t" + std::to_string(n.end) +
                    "\t";
    for (size_t i = 0; i < n.words.size(); ++i) {
      if (i) s += ' ';
      s += n.words[i];
    }
    s += '\t';
    for (size_t i = 0; i < n.children.size(); ++i) {
      if (i) s += ' ';
      s += std::to_string(n.children[i]);
    }
    lines.push_back(std::move(s));
  }
  return lines;
}

}  // namespace qgl::xml
