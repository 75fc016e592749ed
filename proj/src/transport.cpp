#include "teleop/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

namespace teleop::net {

std::string_view to_string(NodeId n) {
  switch (n) {
    case NodeId::Leader:
      return "leader";
    case NodeId::Controller:
      return "controller";
    case NodeId::Follower:
      return "follower";
  }
  return "?";
}

void LinkModel::validate() const {
  if (!(base_latency >= 0.0)) throw std::invalid_argument("link base_latency must be >= 0");
  if (!(jitter >= 0.0)) throw std::invalid_argument("link jitter must be >= 0");
  if (!(drop_prob >= 0.0 && drop_prob <= 1.0)) {
    throw std::invalid_argument("link drop_prob must lie in [0, 1]");
  }
}

ImpairedLink::ImpairedLink(const LinkModel& model) : model_(model), rng_(model.seed) {
  model_.validate();
}

void ImpairedLink::submit(Bytes bytes, double send_time) {
  ++stats_.submitted;
  // Both draws happen for every datagram so the stream position does not
  // depend on the drop outcome.
  const double u_drop = rng_.uniform();
  const double u_jitter = rng_.uniform(-1.0, 1.0);
  if (u_drop < model_.drop_prob) {
    ++stats_.dropped;
    return;
  }
  const double due = std::max(send_time, send_time + model_.base_latency + model_.jitter * u_jitter);
  pending_.push(Pending{due, next_order_++, std::move(bytes)});
}

std::vector<Bytes> ImpairedLink::poll(double now) {
  std::vector<Bytes> out;
  while (!pending_.empty() && pending_.top().due <= now) {
    // priority_queue::top is const; the element is discarded right after.
    out.push_back(std::move(const_cast<Pending&>(pending_.top()).bytes));
    pending_.pop();
  }
  stats_.delivered += out.size();
  return out;
}

class LoopbackNetwork::LoopPort final : public Port {
 public:
  LoopPort(LoopbackNetwork& net, NodeId self) : net_(net), self_(self) {}

  void send(NodeId to, std::span<const std::uint8_t> bytes, double now) override {
    net_.link(self_, to).submit(Bytes(bytes.begin(), bytes.end()), now);
  }

  std::vector<Datagram> receive(double now) override {
    std::vector<Datagram> out;
    for (std::size_t i = 0; i < kNumNodes; ++i) {
      const auto from = static_cast<NodeId>(i);
      if (from == self_) continue;
      for (auto& b : net_.link(from, self_).poll(now)) out.push_back({from, std::move(b)});
    }
    return out;
  }

 private:
  LoopbackNetwork& net_;
  NodeId self_;
};

LoopbackNetwork::LoopbackNetwork(const LinkModel& model) {
  for (std::size_t from = 0; from < kNumNodes; ++from) {
    for (std::size_t to = 0; to < kNumNodes; ++to) {
      LinkModel m = model;
      m.seed = Xoshiro256::derive(model.seed, from * kNumNodes + to)();
      links_.push_back(std::make_unique<ImpairedLink>(m));
    }
  }
  for (std::size_t i = 0; i < kNumNodes; ++i) {
    ports_.push_back(std::make_unique<LoopPort>(*this, static_cast<NodeId>(i)));
  }
}

Port& LoopbackNetwork::port(NodeId node) { return *ports_[static_cast<std::size_t>(node)]; }

ImpairedLink& LoopbackNetwork::link(NodeId from, NodeId to) {
  return *links_[static_cast<std::size_t>(from) * kNumNodes + static_cast<std::size_t>(to)];
}

LinkStats LoopbackNetwork::total_stats() const {
  LinkStats total;
  for (const auto& l : links_) {
    total.submitted += l->stats().submitted;
    total.dropped += l->stats().dropped;
    total.delivered += l->stats().delivered;
  }
  return total;
}

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw std::invalid_argument("endpoint '" + text + "' must look like host:port");
  }
  Endpoint ep;
  ep.host = text.substr(0, colon);
  const std::string port = text.substr(colon + 1);
  if (!std::all_of(port.begin(), port.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
      port.size() > 5 || std::stoul(port) > 65535) {
    throw std::invalid_argument("endpoint '" + text + "' has an invalid port");
  }
  ep.port = static_cast<std::uint16_t>(std::stoul(port));
  return ep;
}

namespace {

sockaddr_in resolve(const Endpoint& ep) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_DGRAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res);
  if (rc != 0 || res == nullptr) {
    throw TransportError("cannot resolve host '" + ep.host + "': " + ::gai_strerror(rc));
  }
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof(addr));
  ::freeaddrinfo(res);
  addr.sin_port = htons(ep.port);
  return addr;
}

}  // namespace

UdpPort::UdpPort(NodeId self, const Endpoint& bind_to, const std::array<Endpoint, kNumNodes>& peers,
                 std::size_t queue_capacity)
    : self_(self), capacity_(std::max<std::size_t>(queue_capacity, 1)) {
  for (std::size_t i = 0; i < kNumNodes; ++i) {
    if (static_cast<NodeId>(i) != self_) set_peer(static_cast<NodeId>(i), peers[i]);
  }
  fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd_ < 0) throw TransportError(std::string("socket: ") + std::strerror(errno));
  sockaddr_in addr = resolve(bind_to);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    const std::string msg = std::strerror(errno);
    ::close(fd_);
    throw TransportError("bind " + bind_to.host + ":" + std::to_string(bind_to.port) + ": " + msg);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  bound_port_ = ntohs(addr.sin_port);
  thread_ = std::jthread([this](std::stop_token st) { receive_loop(st); });
}

UdpPort::~UdpPort() {
  thread_.request_stop();
  if (thread_.joinable()) thread_.join();
  if (fd_ >= 0) ::close(fd_);
}

void UdpPort::set_peer(NodeId node, const Endpoint& ep) {
  const sockaddr_in addr = resolve(ep);
  std::lock_guard lock(peers_mu_);
  peers_[static_cast<std::size_t>(node)] = {addr.sin_addr.s_addr, addr.sin_port};
}

void UdpPort::send(NodeId to, std::span<const std::uint8_t> bytes, double) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  {
    std::lock_guard lock(peers_mu_);
    addr.sin_addr.s_addr = peers_[static_cast<std::size_t>(to)].addr_be;
    addr.sin_port = peers_[static_cast<std::size_t>(to)].port_be;
  }
  // Send-and-forget: transient errors (e.g. ECONNREFUSED) are ignored.
  ::sendto(fd_, bytes.data(), bytes.size(), 0, reinterpret_cast<const sockaddr*>(&addr),
           sizeof(addr));
}

std::vector<Datagram> UdpPort::receive(double) {
  std::lock_guard lock(mu_);
  std::vector<Datagram> out(std::make_move_iterator(queue_.begin()),
                            std::make_move_iterator(queue_.end()));
  queue_.clear();
  return out;
}

void UdpPort::receive_loop(std::stop_token stop) {
  std::array<std::uint8_t, 2048> buf{};
  while (!stop.stop_requested()) {
    pollfd pfd{fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 20) <= 0) continue;
    sockaddr_in src{};
    socklen_t len = sizeof(src);
    const ssize_t n =
        ::recvfrom(fd_, buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&src), &len);
    if (n < 0) continue;

    std::optional<NodeId> from;
    {
      std::lock_guard lock(peers_mu_);
      for (std::size_t i = 0; i < kNumNodes; ++i) {
        if (static_cast<NodeId>(i) == self_) continue;
        if (peers_[i].addr_be == src.sin_addr.s_addr && peers_[i].port_be == src.sin_port) {
          from = static_cast<NodeId>(i);
          break;
        }
      }
    }
    if (!from) {
      ++unknown_;
      continue;
    }

    std::lock_guard lock(mu_);
    if (queue_.size() >= capacity_) {
      queue_.pop_front();
      ++overflow_;
    }
    queue_.push_back({*from, Bytes(buf.begin(), buf.begin() + n)});
  }
}

}  // namespace teleop::net
