#pragma once

#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <vector>

#include "qgl/base.hpp"

namespace qgl {

// Full mesh of local stream sockets between W workers. Each ordered worker
// pair shares one socketpair; exchange() moves length-prefixed frames between
// all peers and returns the received frame payloads. A zero-length frame from
// each peer marks its end-of-round (the barrier).
class SocketMesh {
 public:
  explicit SocketMesh(int n) : n_(n), fds_(n, std::vector<int>(n, -1)) {
    for (int i = 0; i < n_; ++i) {
      for (int j = i + 1; j < n_; ++j) {
        int sv[2];
        if (::socketpair(AF_UNIX, SOCK_STREAM, 0, sv) != 0)
          throw EngineDefect("socketpair failed: " + std::string(strerror(errno)));
        fds_[i][j] = sv[0];
        fds_[j][i] = sv[1];
      }
    }
  }

  ~SocketMesh() {
    for (auto& row : fds_)
      for (int fd : row)
        if (fd >= 0) ::close(fd);
  }

  SocketMesh(const SocketMesh&) = delete;
  SocketMesh& operator=(const SocketMesh&) = delete;

  // Sends to_peer[j] (already-framed bytes) to each peer j != w, followed by
  // the barrier frame, while concurrently draining incoming data. Returns the
  // payloads of all frames received this round, in peer order.
  std::vector<std::vector<uint8_t>> exchange(
      int w, std::vector<std::vector<uint8_t>> to_peer) {
    std::vector<std::vector<uint8_t>> received;
    if (n_ == 1) return received;

    struct Peer {
      int fd;
      const uint8_t* send_pos;
      const uint8_t* send_end;
      std::vector<uint8_t> recv_buf;
      size_t parse_pos = 0;
      bool done = false;  // barrier frame seen
    };
    std::vector<Peer> peers;
    std::vector<std::vector<uint8_t>> wire(n_);
    for (int j = 0; j < n_; ++j) {
      if (j == w) continue;
      wire[j] = std::move(to_peer[j]);
      // barrier frame: zero length
      wire[j].insert(wire[j].end(), {0, 0, 0, 0});
      peers.push_back(Peer{fds_[w][j], wire[j].data(),
                           wire[j].data() + wire[j].size(), {}, 0, false});
    }

    auto parse = [&](Peer& p) {
      while (true) {
        size_t avail = p.recv_buf.size() - p.parse_pos;
        if (avail < 4) return;
        const uint8_t* q = p.recv_buf.data() + p.parse_pos;
        uint32_t len = uint32_t(q[0]) | uint32_t(q[1]) << 8 |
                       uint32_t(q[2]) << 16 | uint32_t(q[3]) << 24;
        if (avail < 4 + size_t(len)) return;
        p.parse_pos += 4;
        if (len == 0) {
          p.done = true;
          return;
        }
        received.emplace_back(p.recv_buf.begin() + p.parse_pos,
                              p.recv_buf.begin() + p.parse_pos + len);
        p.parse_pos += len;
      }
    };

    while (true) {
      bool all_done = true;
      std::vector<pollfd> pfds;
      std::vector<Peer*> order;
      for (auto& p : peers) {
        short ev = 0;
        if (p.send_pos < p.send_end) ev |= POLLOUT;
        if (!p.done) ev |= POLLIN;
        if (ev == 0) continue;
        all_done = false;
        pfds.push_back(pollfd{p.fd, ev, 0});
        order.push_back(&p);
      }
      if (all_done) break;
      int rc = ::poll(pfds.data(), pfds.size(), -1);
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw EngineDefect("poll failed: " + std::string(strerror(errno)));
      }
      for (size_t k = 0; k < pfds.size(); ++k) {
        Peer& p = *order[k];
        if (pfds[k].revents & POLLOUT) {
          ssize_t nw = ::send(p.fd, p.send_pos, p.send_end - p.send_pos,
                              MSG_DONTWAIT | MSG_NOSIGNAL);
          if (nw > 0) p.send_pos += nw;
          else if (nw < 0 && errno != EAGAIN && errno != EWOULDBLOCK)
            throw EngineDefect("send failed: " + std::string(strerror(errno)));
        }
        if (pfds[k].revents & (POLLIN | POLLHUP)) {
          uint8_t tmp[16384];
          ssize_t nr = ::recv(p.fd, tmp, sizeof(tmp), MSG_DONTWAIT);
          if (nr > 0) {
            p.recv_buf.insert(p.recv_buf.end(), tmp, tmp + nr);
            parse(p);
          } else if (nr == 0) {
            throw EngineDefect("peer socket closed mid-round");
          } else if (errno != EAGAIN && errno != EWOULDBLOCK) {
            throw EngineDefect("recv failed: " + std::string(strerror(errno)));
          }
        }
      }
    }
    return received;
  }

 private:
  int n_;
  std::vector<std::vector<int>> fds_;
};

}  // namespace qgl
