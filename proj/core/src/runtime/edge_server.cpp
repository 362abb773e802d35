#include "coforge/runtime/edge_server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>

#include <json.hpp>

#include "coforge/runtime/kernels.hpp"
#include "coforge/runtime/queue.hpp"
#include "coforge/runtime/session.hpp"
#include "wire_common.hpp"

namespace coforge::runtime {

EdgeServer::EdgeServer(EdgeConfig cfg) : cfg_(std::move(cfg)) {}

EdgeServer::~EdgeServer() { stop(); }

void EdgeServer::start() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw ConfigError("socket() failed");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(cfg_.port));
  if (::inet_pton(AF_INET, cfg_.bind_host.c_str(), &addr.sin_addr) != 1)
    throw ConfigError("bad bind address: " + cfg_.bind_host);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw ConfigError("cannot bind " + cfg_.bind_host + ":" +
                      std::to_string(cfg_.port) + ": " + std::strerror(errno));
  }
  if (::listen(listen_fd_, 16) != 0) throw ConfigError("listen() failed");
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void EdgeServer::serve_forever() {
  if (listen_fd_ < 0) start();
  if (accept_thread_.joinable()) accept_thread_.join();
}

void EdgeServer::stop() {
  if (stopping_.exchange(true)) return;
  if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
  if (accept_thread_.joinable()) accept_thread_.join();
  for (auto& t : sessions_)
    if (t.joinable()) t.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
}

void EdgeServer::accept_loop() {
  while (!stopping_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (stopping_) break;
      if (errno == EINTR) continue;
      break;
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    sessions_.emplace_back([this, fd] { handle_session(fd); });
  }
}

namespace {

struct ComputeItem {
  enum class Kind { Data, Arch, Bye } kind = Kind::Data;
  uint32_t batch_id = 0;
  std::vector<uint8_t> tensor;  // decompressed TENSOR payload
  std::vector<uint8_t> graph;   // decompressed GRAPH payload, may be empty
  std::vector<uint8_t> arch;    // ARCH payload
};

struct SessionState {
  DeploymentDescriptor desc;
  std::vector<Segment> plan;
  std::vector<size_t> edge_segments;  // indices into plan
  KernelOptions kernels;

  void load(const std::vector<uint8_t>& payload) {
    desc = DeploymentDescriptor::from_json(
        nlohmann::json::parse(payload.begin(), payload.end()));
    plan = plan_segments(desc.arch, desc.mapping);
    edge_segments.clear();
    for (size_t i = 0; i < plan.size(); ++i)
      if (plan[i].side == Side::Edge) edge_segments.push_back(i);
    kernels.weight_seed = desc.weight_seed;
    kernels.identity_weights = desc.identity_weights;
  }
};

}  // namespace

void EdgeServer::handle_session(int fd) {
  std::string codec = "identity";
  try {
    Frame hello;
    if (!read_frame(fd, hello)) {
      ::close(fd);
      return;
    }
    if (hello.msg_type != MsgType::Hello)
      throw ProtocolError("expected HELLO");
    if (hello.version != kProtocolVersion) {
      Frame err;
      err.msg_type = MsgType::Error;
      const std::string msg = "unsupported protocol version";
      err.payload.assign(msg.begin(), msg.end());
      write_frame(fd, err);
      ::close(fd);
      return;
    }
    const auto hj = nlohmann::json::parse(hello.payload.begin(), hello.payload.end());
    for (const auto& c : hj.value("codecs", nlohmann::json::array()))
      if (codec_known(c.get<std::string>())) {
        codec = c.get<std::string>();
        break;
      }
    double throttle = cfg_.throttle_bps;
    if (hj.contains("throttle_bps")) throttle = hj["throttle_bps"].get<double>();

    Frame ack;
    ack.msg_type = MsgType::Ack;
    const std::string aj = nlohmann::json{{"codec", codec}}.dump();
    ack.payload.assign(aj.begin(), aj.end());
    write_frame(fd, ack);

    BoundedQueue<Frame> send_q(64);
    std::thread sender([&] {
      TokenBucket bucket(throttle);
      try {
        while (auto frame = send_q.pop()) {
          const bool data = frame->msg_type == MsgType::Tensor ||
                            frame->msg_type == MsgType::Graph ||
                            frame->msg_type == MsgType::Result;
          if (data)
            send_data_frame(fd, std::move(*frame), codec, bucket, nullptr);
          else
            write_frame(fd, *frame);
        }
      } catch (const ProtocolError&) {
        // Peer gone; receiver will notice EOF and wind the session down.
      }
    });

    BoundedQueue<ComputeItem> compute_q(64);
    std::thread compute([&] {
      SessionState st;
      bool have_arch = false;
      std::map<uint32_t, size_t> stage;  // batch -> edge segments completed
      try {
      while (auto item = compute_q.pop()) {
        if (item->kind == ComputeItem::Kind::Bye) {
          Frame bye;
          bye.msg_type = MsgType::Bye;
          send_q.push(bye);
          break;
        }
        if (item->kind == ComputeItem::Kind::Arch) {
          st.load(item->arch);
          have_arch = true;
          stage.clear();
          Frame ok;
          ok.msg_type = MsgType::Ack;
          send_q.push(ok);
          continue;
        }
        if (!have_arch) throw ProtocolError("TENSOR before ARCH");
        const size_t idx = stage[item->batch_id]++;
        if (idx >= st.edge_segments.size())
          throw ProtocolError("more TENSOR frames than edge segments");
        const Segment& seg = st.plan[st.edge_segments[idx]];
        ExecState state;
        unpack_state(item->tensor, state);
        if (!item->graph.empty()) {
          state.neighbors = unpack_graph(item->graph);
          state.has_graph = true;
        }
        if (st.desc.edge_delay_s > 0)
          std::this_thread::sleep_for(
              std::chrono::duration<double>(st.desc.edge_delay_s));
        run_segment(state, st.desc.arch, seg.begin, seg.end, st.kernels);
        if (seg.comm_after) {
          if (graph_forwarded(st.desc.arch, *seg.comm_after) && state.has_graph) {
            Frame g;
            g.msg_type = MsgType::Graph;
            g.batch_id = item->batch_id;
            g.payload = pack_graph(state.neighbors);
            send_q.push(std::move(g));
          }
          if (!skip_needed(st.desc.arch, *seg.comm_after + 1)) {
            state.has_skip = false;
            state.skip.resize(0, 0);
          }
          Frame t;
          t.msg_type = MsgType::Tensor;
          t.batch_id = item->batch_id;
          t.payload = pack_state(state);
          send_q.push(std::move(t));
        } else {
          // Final result: only the output features cross back.
          state.has_skip = false;
          state.skip.resize(0, 0);
          Frame r;
          r.msg_type = MsgType::Result;
          r.batch_id = item->batch_id;
          r.payload = pack_state(state);
          send_q.push(std::move(r));
        }
      }
      } catch (const std::exception& e) {
        if (cfg_.log_errors)
          std::cerr << "[edge] compute error: " << e.what() << "\n";
        ::shutdown(fd, SHUT_RDWR);
      }
      send_q.close();
    });

    // Receiver: this thread.
    std::map<uint32_t, std::vector<uint8_t>> pending_graph;
    try {
      Frame frame;
      while (read_frame(fd, frame)) {
        switch (frame.msg_type) {
          case MsgType::Arch: {
            ComputeItem item;
            item.kind = ComputeItem::Kind::Arch;
            item.arch = recv_payload(frame, codec);
            compute_q.push(std::move(item));
            break;
          }
          case MsgType::Graph:
            pending_graph[frame.batch_id] = recv_payload(frame, codec);
            break;
          case MsgType::Tensor: {
            ComputeItem item;
            item.batch_id = frame.batch_id;
            item.tensor = recv_payload(frame, codec);
            if (auto it = pending_graph.find(frame.batch_id);
                it != pending_graph.end()) {
              item.graph = std::move(it->second);
              pending_graph.erase(it);
            }
            compute_q.push(std::move(item));
            break;
          }
          case MsgType::Bye: {
            ComputeItem item;
            item.kind = ComputeItem::Kind::Bye;
            compute_q.push(std::move(item));
            goto drain;
          }
          default:
            throw ProtocolError("unexpected frame in session");
        }
      }
    drain:;
    } catch (const std::exception& e) {
      if (cfg_.log_errors)
        std::cerr << "[edge] session error: " << e.what() << "\n";
    }
    compute_q.close();
    compute.join();
    sender.join();
  } catch (const std::exception& e) {
    if (cfg_.log_errors) std::cerr << "[edge] session error: " << e.what() << "\n";
  }
  ::close(fd);
}

}  // namespace coforge::runtime
