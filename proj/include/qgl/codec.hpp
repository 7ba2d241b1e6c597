#pragma once

#include <cstdint>
#include <cstring>
#include <type_traits>
#include <vector>

#include "qgl/base.hpp"

namespace qgl {

// Little-endian primitive writer/reader for the wire format. Message payloads
// default to their in-memory representation; a specialization of Codec<M> can
// override that for messages holding indirections.
inline void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
  buf.push_back(static_cast<uint8_t>(v));
  buf.push_back(static_cast<uint8_t>(v >> 8));
  buf.push_back(static_cast<uint8_t>(v >> 16));
  buf.push_back(static_cast<uint8_t>(v >> 24));
}

inline void put_u64(std::vector<uint8_t>& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline uint32_t get_u32(const uint8_t*& p, const uint8_t* end) {
  if (end - p < 4) throw EngineDefect("frame underrun (u32)");
  uint32_t v = uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
               uint32_t(p[3]) << 24;
  p += 4;
  return v;
}

inline uint64_t get_u64(const uint8_t*& p, const uint8_t* end) {
  if (end - p < 8) throw EngineDefect("frame underrun (u64)");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
  p += 8;
  return v;
}

template <class M>
struct Codec {
  static_assert(std::is_trivially_copyable_v<M>,
                "specialize qgl::Codec for non-trivial message types");
  static void write(std::vector<uint8_t>& buf, const M& m) {
    const auto* raw = reinterpret_cast<const uint8_t*>(&m);
    buf.insert(buf.end(), raw, raw + sizeof(M));
  }
  static M read(const uint8_t*& p, const uint8_t* end) {
    if (end - p < static_cast<ptrdiff_t>(sizeof(M)))
      throw EngineDefect("frame underrun (message)");
    M m;
    std::memcpy(&m, p, sizeof(M));
    p += sizeof(M);
    return m;
  }
};

}  // namespace qgl
