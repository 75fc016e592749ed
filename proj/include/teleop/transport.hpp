#pragma once

#include "teleop/netproto.hpp"
#include "teleop/rng.hpp"

#include <array>
#include <atomic>
#include <deque>
#include <optional>
#include <memory>
#include <mutex>
#include <queue>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace teleop::net {

enum class NodeId : std::uint8_t { Leader = 0, Controller = 1, Follower = 2 };
inline constexpr std::size_t kNumNodes = 3;

std::string_view to_string(NodeId n);

struct Datagram {
  NodeId from = NodeId::Leader;
  Bytes bytes;
};

// A node's handle on the network.
class Port {
 public:
  virtual ~Port() = default;
  virtual void send(NodeId to, std::span<const std::uint8_t> bytes, double now) = 0;
  virtual std::vector<Datagram> receive(double now) = 0;
};

// Latency / jitter / drop impairment for one directed link.
struct LinkModel {
  double base_latency = 0.0;  // s
  double jitter = 0.0;        // s, uniform half-width
  double drop_prob = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct LinkStats {
  std::uint64_t submitted = 0;
  std::uint64_t dropped = 0;
  std::uint64_t delivered = 0;
};

// Deterministic in-process link. Each submitted datagram gets
// delivery = send + base_latency + U(-jitter, jitter), never earlier than
// send; poll(now) releases everything due by now in delivery order (ties
// in submission order). Reordering falls out of the jitter.
class ImpairedLink {
 public:
  explicit ImpairedLink(const LinkModel& model);

  void submit(Bytes bytes, double send_time);
  std::vector<Bytes> poll(double now);

  const LinkStats& stats() const { return stats_; }
  std::size_t in_flight() const { return pending_.size(); }

 private:
  struct Pending {
    double due;
    std::uint64_t order;
    Bytes bytes;
    bool operator>(const Pending& o) const {
      return due != o.due ? due > o.due : order > o.order;
    }
  };

  LinkModel model_;
  Xoshiro256 rng_;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> pending_;
  std::uint64_t next_order_ = 0;
  LinkStats stats_;
};

// Fully connected three-node loopback network; strictly single-threaded.
class LoopbackNetwork {
 public:
  // Every directed link uses `model`, each with its own PRNG stream.
  explicit LoopbackNetwork(const LinkModel& model = {});

  Port& port(NodeId node);
  ImpairedLink& link(NodeId from, NodeId to);
  LinkStats total_stats() const;

 private:
  class LoopPort;
  std::vector<std::unique_ptr<ImpairedLink>> links_;  // index from * 3 + to
  std::vector<std::unique_ptr<Port>> ports_;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

Endpoint parse_endpoint(const std::string& text);  // "host:port"

// Raised when a UDP endpoint cannot be bound or a peer cannot be reached
// at startup.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// UDP port for one node. A background thread receives into a bounded queue
// (drop-oldest on overflow, counted); the owning node drains it from its
// own loop.
class UdpPort final : public Port {
 public:
  UdpPort(NodeId self, const Endpoint& bind_to, const std::array<Endpoint, kNumNodes>& peers,
          std::size_t queue_capacity = 1024);
  ~UdpPort() override;

  UdpPort(const UdpPort&) = delete;
  UdpPort& operator=(const UdpPort&) = delete;

  void send(NodeId to, std::span<const std::uint8_t> bytes, double now) override;
  std::vector<Datagram> receive(double now) override;

  std::uint16_t bound_port() const { return bound_port_; }
  std::uint64_t overflow_drops() const { return overflow_.load(); }
  std::uint64_t unknown_sender_drops() const { return unknown_.load(); }

  // Point-to-point address update once ephemeral ports are known.
  void set_peer(NodeId node, const Endpoint& ep);

 private:
  void receive_loop(std::stop_token stop);

  NodeId self_;
  int fd_ = -1;
  std::uint16_t bound_port_ = 0;
  struct Resolved {
    std::uint32_t addr_be = 0;
    std::uint16_t port_be = 0;
  };
  std::array<Resolved, kNumNodes> peers_{};
  mutable std::mutex peers_mu_;
  std::size_t capacity_;
  std::mutex mu_;
  std::deque<Datagram> queue_;
  std::atomic<std::uint64_t> overflow_{0};
  std::atomic<std::uint64_t> unknown_{0};
  std::jthread thread_;
};

}  // namespace teleop::net
