#pragma once

#include "support.hpp"
#include "teleop/netproto.hpp"

namespace teleop::testing {

inline Joints random_q(Xoshiro256& rng) {
  Joints q;
  for (int i = 0; i < kNumJoints; ++i) q[i] = rng.uniform(-1e3, 1e3);
  return q;
}

inline net::Message random_message(Xoshiro256& rng, net::MsgType type) {
  const auto seq = static_cast<std::uint32_t>(rng());
  const std::uint64_t t = rng();
  switch (type) {
    case net::MsgType::LeaderState:
      return net::LeaderStateMsg{seq, t, random_vec(rng, -1, 1), random_vec(rng, -5, 5), rng.uniform() < 0.5};
    case net::MsgType::FollowerState:
      return net::FollowerStateMsg{seq, t, random_q(rng), random_q(rng), random_vec(rng, -2, 2), random_vec(rng, -2, 2)};
    case net::MsgType::ForceCmd:
      return net::ForceCmdMsg{seq, t, random_vec(rng, -50, 50)};
    case net::MsgType::TorqueCmd:
      return net::TorqueCmdMsg{seq, t, random_q(rng)};
    case net::MsgType::TaskEvent:
      return net::TaskEventMsg{seq,
                               t,
                               static_cast<std::uint8_t>(rng.below(256)),
                               static_cast<std::uint8_t>(rng.below(256)),
                               static_cast<std::uint8_t>(rng.below(256)),
                               static_cast<std::uint8_t>(rng.below(256)),
                               static_cast<std::uint32_t>(rng()),
                               rng.uniform(-1e6, 1e6)};
  }
  return net::LeaderStateMsg{};
}

inline constexpr net::MsgType kTypes[] = {net::MsgType::LeaderState, net::MsgType::FollowerState,
                                          net::MsgType::ForceCmd, net::MsgType::TorqueCmd, net::MsgType::TaskEvent};

}  // namespace teleop::testing
