#include "coforge/runtime/device_runner.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <cstring>
#include <map>
#include <mutex>
#include <thread>

#include "coforge/runtime/queue.hpp"
#include "coforge/util.hpp"
#include "wire_common.hpp"

namespace coforge::runtime {

double RunReport::mean_latency_s() const {
  double sum = 0;
  int n = 0;
  for (const auto& b : batches)
    if (b.ok) {
      sum += b.latency_s;
      ++n;
    }
  return n ? sum / n : 0;
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json lat = nlohmann::json::array();
  for (const auto& b : batches)
    lat.push_back({{"batch_id", b.batch_id}, {"ok", b.ok}, {"latency_s", b.latency_s}});
  return {{"batches", std::move(lat)},
          {"wall_s", wall_s},
          {"throughput_ips", throughput_ips},
          {"mean_latency_s", mean_latency_s()},
          {"bytes_sent", bytes_sent},
          {"bytes_received", bytes_received},
          {"raw_sent", raw_sent},
          {"raw_received", raw_received},
          {"compression_ratio", compression_ratio},
          {"codec", codec},
          {"failed_batches", failed_batches}};
}

namespace {

int connect_to(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res)
    throw ProtocolError("cannot resolve " + host);
  int fd = -1;
  for (addrinfo* p = res; p; p = p->ai_next) {
    fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw ProtocolError("cannot connect to " + host + ":" + service);
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

struct Job {
  uint32_t batch_id = 0;
  size_t seg_idx = 0;
  bool fresh = false;
  ExecState state;
};

}  // namespace

RunReport run_device(const Architecture& arch, const DeviceConfig& cfg) {
  if (!executable(arch))
    throw PreconditionError("run_device needs an executable architecture");
  if (cfg.pipeline_depth < 1) throw ConfigError("pipeline_depth must be >= 1");
  const Mapping mapping = derive_mapping(arch);
  const std::vector<Segment> plan = plan_segments(arch, mapping);

  using Clock = std::chrono::steady_clock;
  const int fd = connect_to(cfg.edge_host, cfg.edge_port);

  RunReport report;
  try {
    // Handshake: HELLO with codec preference, then the deployment descriptor.
    Frame hello;
    hello.msg_type = MsgType::Hello;
    const std::string hj =
        nlohmann::json{{"codecs", {cfg.codec, "identity"}},
                       {"throttle_bps", cfg.throttle_bps}}
            .dump();
    hello.payload.assign(hj.begin(), hj.end());
    write_frame(fd, hello);
    Frame ack;
    if (!read_frame(fd, ack)) throw ProtocolError("edge closed during handshake");
    if (ack.msg_type == MsgType::Error)
      throw ProtocolError("edge rejected session: " +
                          std::string(ack.payload.begin(), ack.payload.end()));
    if (ack.msg_type != MsgType::Ack) throw ProtocolError("expected ACK to HELLO");
    const auto aj = nlohmann::json::parse(ack.payload.begin(), ack.payload.end());
    const std::string codec = aj.at("codec").get<std::string>();
    report.codec = codec;

    DeploymentDescriptor desc;
    desc.arch = arch;
    desc.mapping = mapping;
    desc.codec = codec;
    desc.weight_seed = sub_seed(cfg.seed, "weights");
    desc.identity_weights = cfg.identity_weights;
    desc.edge_delay_s = cfg.edge_delay_s;
    Frame archf;
    archf.msg_type = MsgType::Arch;
    const std::string dj = desc.to_json().dump();
    archf.payload.assign(dj.begin(), dj.end());
    write_frame(fd, archf);
    if (!read_frame(fd, ack) || ack.msg_type != MsgType::Ack)
      throw ProtocolError("expected ACK to ARCH");

    KernelOptions kernels;
    kernels.weight_seed = desc.weight_seed;
    kernels.identity_weights = desc.identity_weights;

    report.batches.resize(cfg.num_batches);
    for (int b = 0; b < cfg.num_batches; ++b)
      report.batches[b].batch_id = static_cast<uint32_t>(b);

    std::mutex mu;
    std::condition_variable cv;
    std::map<uint32_t, size_t> resume_seg;
    std::map<uint32_t, Clock::time_point> started;
    std::vector<char> settled_flag(cfg.num_batches, 0);
    int in_flight = 0;
    int settled = 0;  // completed or failed
    int admitted = 0;
    bool conn_lost = false;

    BoundedQueue<Frame> send_q(64);
    BoundedQueue<Job> compute_q(64);
    SendStats sent_stats;

    auto finalize = [&](uint32_t batch_id, Eigen::MatrixXf output, bool ok) {
      std::lock_guard lock(mu);
      if (settled_flag[batch_id]) return;
      settled_flag[batch_id] = 1;
      auto& slot = report.batches[batch_id];
      slot.ok = ok;
      slot.latency_s =
          std::chrono::duration<double>(Clock::now() - started[batch_id]).count();
      slot.output = std::move(output);
      --in_flight;
      ++settled;
      cv.notify_all();
    };

    std::thread sender([&] {
      TokenBucket bucket(cfg.throttle_bps);
      try {
        while (auto frame = send_q.pop()) {
          const bool data = frame->msg_type == MsgType::Tensor ||
                            frame->msg_type == MsgType::Graph;
          if (data)
            send_data_frame(fd, std::move(*frame), codec, bucket, &sent_stats);
          else
            write_frame(fd, *frame);
        }
      } catch (const ProtocolError&) {
        // Connection gone; keep draining so producers never block on a full
        // queue, until the main thread closes it.
        while (send_q.pop()) {
        }
      }
    });

    std::thread compute([&] {
      while (auto job = compute_q.pop()) {
        if (job->fresh)
          job->state.x = make_batch_input(
              arch.input_nodes, arch.input_dim,
              sub_seed(cfg.seed, "batch-" + std::to_string(job->batch_id)));
        const Segment& seg = plan[job->seg_idx];
        run_segment(job->state, arch, seg.begin, seg.end, kernels);
        if (seg.comm_after) {
          {
            std::lock_guard lock(mu);
            resume_seg[job->batch_id] = job->seg_idx + 2;
          }
          if (graph_forwarded(arch, *seg.comm_after) && job->state.has_graph) {
            Frame g;
            g.msg_type = MsgType::Graph;
            g.batch_id = job->batch_id;
            g.payload = pack_graph(job->state.neighbors);
            send_q.push(std::move(g));
          }
          if (!skip_needed(arch, *seg.comm_after + 1)) {
            job->state.has_skip = false;
            job->state.skip.resize(0, 0);
          }
          Frame t;
          t.msg_type = MsgType::Tensor;
          t.batch_id = job->batch_id;
          t.payload = pack_state(job->state);
          send_q.push(std::move(t));
        } else {
          finalize(job->batch_id, std::move(job->state.x), true);
        }
      }
    });

    std::thread receiver([&] {
      std::map<uint32_t, std::vector<uint8_t>> pending_graph;
      try {
        Frame frame;
        while (read_frame(fd, frame)) {
          const std::vector<uint8_t> payload = recv_payload(frame, codec);
          if (frame.msg_type == MsgType::Tensor ||
              frame.msg_type == MsgType::Graph ||
              frame.msg_type == MsgType::Result) {
            std::lock_guard lock(mu);
            report.bytes_received += frame.payload.size();
            report.raw_received += payload.size();
          }
          switch (frame.msg_type) {
            case MsgType::Graph:
              pending_graph[frame.batch_id] = payload;
              break;
            case MsgType::Tensor: {
              Job job;
              job.batch_id = frame.batch_id;
              {
                std::lock_guard lock(mu);
                job.seg_idx = resume_seg.at(frame.batch_id);
              }
              unpack_state(payload, job.state);
              if (auto it = pending_graph.find(frame.batch_id);
                  it != pending_graph.end()) {
                job.state.neighbors = unpack_graph(it->second);
                job.state.has_graph = true;
                pending_graph.erase(it);
              }
              compute_q.push(std::move(job));
              break;
            }
            case MsgType::Result: {
              ExecState state;
              unpack_state(payload, state);
              finalize(frame.batch_id, std::move(state.x), true);
              break;
            }
            case MsgType::Bye:
              return;
            case MsgType::Error:
              throw ProtocolError(std::string(payload.begin(), payload.end()));
            default:
              throw ProtocolError("unexpected frame from edge");
          }
        }
        throw ProtocolError("edge closed connection");
      } catch (const std::exception&) {
        std::lock_guard lock(mu);
        conn_lost = true;
        cv.notify_all();
      }
    });

    const auto wall_start = Clock::now();
    for (int b = 0; b < cfg.num_batches; ++b) {
      {
        std::unique_lock lock(mu);
        cv.wait(lock, [&] { return in_flight < cfg.pipeline_depth || conn_lost; });
        if (conn_lost) break;
        ++in_flight;
        ++admitted;
        started[static_cast<uint32_t>(b)] = Clock::now();
      }
      Job job;
      job.batch_id = static_cast<uint32_t>(b);
      job.fresh = true;
      compute_q.push(std::move(job));
    }
    {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return conn_lost || settled == admitted; });
    }
    report.wall_s = std::chrono::duration<double>(Clock::now() - wall_start).count();

    compute_q.close();
    compute.join();
    if (!conn_lost) {
      Frame bye;
      bye.msg_type = MsgType::Bye;
      send_q.push(std::move(bye));
    }
    send_q.close();
    sender.join();
    ::shutdown(fd, SHUT_RDWR);
    receiver.join();

    for (int b = 0; b < cfg.num_batches; ++b)
      if (!settled_flag[b]) report.batches[b].ok = false;
    for (auto& b : report.batches)
      if (!b.ok) ++report.failed_batches;
    const int done = cfg.num_batches - report.failed_batches;
    report.throughput_ips = report.wall_s > 0 ? done / report.wall_s : 0;
    report.bytes_sent = sent_stats.wire_bytes;
    report.raw_sent = sent_stats.raw_bytes;
    const uint64_t raw = report.raw_sent + report.raw_received;
    const uint64_t wire = report.bytes_sent + report.bytes_received;
    report.compression_ratio = raw ? static_cast<double>(wire) / raw : 1.0;
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  return report;
}

}  // namespace coforge::runtime
