#include "netproto_support.hpp"
#include "support.hpp"
#include "teleop/netproto.hpp"
#include "teleop/transport.hpp"

#include <gtest/gtest.h>

#include <cstring>

namespace teleop::net {
namespace {

using teleop::testing::kTypes;
using teleop::testing::random_message;

TEST(Wire, DeclaredLengths) {
  EXPECT_EQ(encoded_size(MsgType::LeaderState), 72u);
  EXPECT_EQ(encoded_size(MsgType::FollowerState), 160u);
  EXPECT_EQ(encoded_size(MsgType::ForceCmd), 40u);
  EXPECT_EQ(encoded_size(MsgType::TorqueCmd), 64u);
  EXPECT_EQ(encode(LeaderStateMsg{}).size(), 72u);
  EXPECT_EQ(encode(FollowerStateMsg{}).size(), 160u);
  EXPECT_EQ(encode(ForceCmdMsg{}).size(), 40u);
  EXPECT_EQ(encode(TorqueCmdMsg{}).size(), 64u);
  EXPECT_EQ(encode(TaskEventMsg{}).size(), 32u);
}

TEST(Wire, ZeroLeaderStateHeader) {
  const Bytes b = encode(LeaderStateMsg{});
  ASSERT_EQ(b.size(), 72u);
  EXPECT_EQ(b[0], 0x48);
  EXPECT_EQ(b[1], 0x4C);
  EXPECT_EQ(b[2], kVersion);
  EXPECT_EQ(b[3], 1);
}

TEST(Wire, LittleEndianFields) {
  LeaderStateMsg m;
  m.seq = 0x01020304;
  m.t_us = 0x1122334455667788ULL;
  m.pos = Vec3(1.5, 0, 0);
  const Bytes b = encode(m);
  EXPECT_EQ(b[4], 0x04);
  EXPECT_EQ(b[7], 0x01);
  EXPECT_EQ(b[8], 0x88);
  EXPECT_EQ(b[15], 0x11);
  double x;
  std::memcpy(&x, b.data() + 16, 8);
  EXPECT_EQ(x, 1.5);
}

TEST(Wire, RoundTripRandomMessagesEveryType) {
  Xoshiro256 rng(51);
  for (MsgType type : kTypes) {
    for (int n = 0; n < 10000; ++n) {
      const Message m = random_message(rng, type);
      const Bytes b = encode(m);
      ASSERT_EQ(b.size(), encoded_size(type));
      const DecodeResult r = decode(b);
      ASSERT_TRUE(r.ok()) << r.error().detail;
      ASSERT_TRUE(r.message() == m);
      ASSERT_EQ(encode(r.message()), b);
    }
  }
}

TEST(Wire, EncodingIsDeterministic) {
  Xoshiro256 rng(52);
  const Message m = random_message(rng, MsgType::FollowerState);
  EXPECT_EQ(encode(m), encode(m));
}

TEST(Decode, RejectsMalformedInput) {
  const Bytes ten(10, 0);
  EXPECT_EQ(decode(ten).error().reason, DecodeError::TooShort);

  Bytes b = encode(LeaderStateMsg{});
  b[0] = 0x00;
  EXPECT_EQ(decode(b).error().reason, DecodeError::BadMagic);

  b = encode(LeaderStateMsg{});
  b[2] = 99;
  EXPECT_EQ(decode(b).error().reason, DecodeError::BadVersion);

  b = encode(LeaderStateMsg{});
  b[3] = 42;
  EXPECT_EQ(decode(b).error().reason, DecodeError::UnknownType);

  b = encode(LeaderStateMsg{});
  b.push_back(0);
  EXPECT_EQ(decode(b).error().reason, DecodeError::BadLength);

  b = encode(ForceCmdMsg{});
  b.pop_back();
  EXPECT_EQ(decode(b).error().reason, DecodeError::BadLength);

  b = encode(LeaderStateMsg{});
  b[64] = 2;  // grip byte
  EXPECT_EQ(decode(b).error().reason, DecodeError::BadField);
}

TEST(Decode, NeverThrowsOnRandomBytes) {
  Xoshiro256 rng(53);
  for (int n = 0; n < 20000; ++n) {
    Bytes b(rng.below(200));
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    if (b.size() >= 4 && rng.uniform() < 0.5) {
      b[0] = kMagic0;
      b[1] = kMagic1;
      b[2] = kVersion;
      b[3] = static_cast<std::uint8_t>(1 + rng.below(5));
    }
    EXPECT_NO_THROW((void)decode(b));
  }
}

TEST(SeqTracker, StaleDuplicateAndGaps) {
  SeqTracker t;
  EXPECT_EQ(t.accept(1, MsgType::LeaderState, 7), Verdict::Accept);
  EXPECT_EQ(t.accept(1, MsgType::LeaderState, 5), Verdict::RejectStale);
  EXPECT_EQ(t.accept(1, MsgType::LeaderState, 7), Verdict::RejectStale);
  EXPECT_EQ(t.accept(1, MsgType::LeaderState, 9), Verdict::Accept);
  // Streams are independent per peer and per type.
  EXPECT_EQ(t.accept(2, MsgType::LeaderState, 1), Verdict::Accept);
  EXPECT_EQ(t.accept(1, MsgType::ForceCmd, 1), Verdict::Accept);
  EXPECT_EQ(t.rejected(), 2u);
}

TEST(ImpairedLinkTest, IdealLinkDeliversOnNextPoll) {
  ImpairedLink link({});
  link.submit(Bytes{1, 2, 3}, 0.0);
  const auto out = link.poll(0.0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], (Bytes{1, 2, 3}));
}

TEST(ImpairedLinkTest, BaseLatency) {
  LinkModel m;
  m.base_latency = 0.020;
  ImpairedLink link(m);
  link.submit(Bytes{1}, 0.0);
  EXPECT_TRUE(link.poll(0.019).empty());
  EXPECT_EQ(link.poll(0.020).size(), 1u);
}

TEST(ImpairedLinkTest, FullDropDeliversNothing) {
  LinkModel m;
  m.drop_prob = 1.0;
  ImpairedLink link(m);
  for (int k = 0; k < 1000; ++k) link.submit(Bytes{static_cast<std::uint8_t>(k)}, k * 0.002);
  EXPECT_TRUE(link.poll(1e9).empty());
  EXPECT_EQ(link.stats().dropped, 1000u);
  EXPECT_EQ(link.stats().delivered, 0u);
}

TEST(ImpairedLinkTest, DropRateAndJitterBounds) {
  LinkModel m;
  m.base_latency = 0.020;
  m.jitter = 0.010;
  m.drop_prob = 0.1;
  m.seed = 7;
  ImpairedLink link(m);
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    LeaderStateMsg msg;
    msg.seq = static_cast<std::uint32_t>(k);
    msg.t_us = static_cast<std::uint64_t>(k) * 2000;
    link.submit(encode(msg), k * 0.002);
  }
  EXPECT_NEAR(static_cast<double>(link.stats().dropped) / n, 0.1, 0.01);
  std::size_t delivered = 0;
  for (int k = 0; k <= n + 50; ++k) {
    const double now = k * 0.002;
    for (const Bytes& b : link.poll(now)) {
      const auto r = decode(b);
      ASSERT_TRUE(r.ok());
      const double sent = time_of(r.message()) * 1e-6;
      EXPECT_GE(now - sent, 0.010 - 1e-9);
      EXPECT_LE(now - sent, 0.030 + 0.002 + 1e-9);
      ++delivered;
    }
  }
  EXPECT_EQ(delivered, link.stats().delivered);
  EXPECT_EQ(delivered + link.stats().dropped, static_cast<std::size_t>(n));
}

TEST(ImpairedLinkTest, ReorderedStreamConsumedInIncreasingOrder) {
  LinkModel m;
  m.base_latency = 0.020;
  m.jitter = 0.010;
  m.seed = 9;
  ImpairedLink link(m);
  SeqTracker tracker;
  std::vector<std::uint32_t> consumed;
  for (int k = 0; k < 5000; ++k) {
    LeaderStateMsg msg;
    msg.seq = static_cast<std::uint32_t>(k + 1);
    link.submit(encode(msg), k * 0.002);
    for (const Bytes& b : link.poll(k * 0.002)) {
      const auto r = decode(b);
      if (tracker.accept(0, r.message()) == Verdict::Accept) consumed.push_back(seq_of(r.message()));
    }
  }
  EXPECT_GT(tracker.rejected(), 0u);
  for (std::size_t i = 1; i < consumed.size(); ++i) ASSERT_GT(consumed[i], consumed[i - 1]);
}

TEST(ImpairedLinkTest, SameSeedSameDeliveries) {
  LinkModel m;
  m.jitter = 0.01;
  m.drop_prob = 0.2;
  m.seed = 3;
  auto run = [&] {
    ImpairedLink link(m);
    std::vector<Bytes> out;
    for (int k = 0; k < 2000; ++k) {
      link.submit(Bytes{static_cast<std::uint8_t>(k), static_cast<std::uint8_t>(k >> 8)}, k * 0.002);
      for (auto& b : link.poll(k * 0.002)) out.push_back(b);
    }
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(LinkModelTest, Validation) {
  LinkModel m;
  m.drop_prob = 1.5;
  EXPECT_THROW(m.validate(), std::invalid_argument);
  m = {};
  m.base_latency = -0.1;
  EXPECT_THROW(m.validate(), std::invalid_argument);
}

TEST(LoopbackNetworkTest, RoutesBetweenNodes) {
  LoopbackNetwork net;
  const Bytes payload = encode(ForceCmdMsg{3, 4, Vec3(1, 2, 3)});
  net.port(NodeId::Controller).send(NodeId::Leader, payload, 0.0);
  EXPECT_TRUE(net.port(NodeId::Follower).receive(0.0).empty());
  const auto got = net.port(NodeId::Leader).receive(0.0);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].from, NodeId::Controller);
  EXPECT_EQ(got[0].bytes, payload);
}

TEST(UdpPortTest, ExchangesDatagramsOverLocalhost) {
  const std::array<Endpoint, kNumNodes> none{};
  UdpPort a(NodeId::Leader, {"127.0.0.1", 0}, none);
  UdpPort b(NodeId::Controller, {"127.0.0.1", 0}, none);
  a.set_peer(NodeId::Controller, {"127.0.0.1", b.bound_port()});
  b.set_peer(NodeId::Leader, {"127.0.0.1", a.bound_port()});
  const Bytes payload = encode(LeaderStateMsg{1, 2, Vec3(0.01, 0, 0), Vec3::Zero(), true});
  std::vector<Datagram> got;
  for (int attempt = 0; attempt < 200 && got.empty(); ++attempt) {
    a.send(NodeId::Controller, payload, 0.0);
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    got = b.receive(0.0);
  }
  ASSERT_FALSE(got.empty());
  EXPECT_EQ(got[0].from, NodeId::Leader);
  EXPECT_EQ(got[0].bytes, payload);
}

TEST(UdpPortTest, BindFailureIsTransportError) {
  const std::array<Endpoint, kNumNodes> none{};
  UdpPort a(NodeId::Leader, {"127.0.0.1", 0}, none);
  EXPECT_THROW(UdpPort(NodeId::Follower, {"127.0.0.1", a.bound_port()}, none), TransportError);
}

TEST(EndpointTest, Parse) {
  const auto e = parse_endpoint("10.0.0.2:47101");
  EXPECT_EQ(e.host, "10.0.0.2");
  EXPECT_EQ(e.port, 47101);
  EXPECT_THROW(parse_endpoint("nohost"), std::exception);
  EXPECT_THROW(parse_endpoint("h:99999"), std::exception);
}

}  // namespace
}  // namespace teleop::net
