#pragma once

#include "teleop/types.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace teleop::net {

// Wire layout (all multi-byte fields little-endian, reals are IEEE f64):
//   header  magic 'H''L' | version u8 | type u8 | seq u32 | t_us u64   = 16
//   type 1  LeaderState   pos[3] vel[3] grip u8 pad[7]                = 56
//   type 2  FollowerState q[6] qdot[6] elbow[3] wrist[3]              = 144
//   type 3  ForceCmd      force[3]                                    = 24
//   type 4  TorqueCmd     tau[6]                                      = 48
//   type 5  TaskEvent     event u8 pose u8 condition u8 block u8
//                         trial_id u32 value f64                      = 16
inline constexpr std::uint8_t kMagic0 = 0x48;
inline constexpr std::uint8_t kMagic1 = 0x4C;
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 16;

enum class MsgType : std::uint8_t {
  LeaderState = 1,
  FollowerState = 2,
  ForceCmd = 3,
  TorqueCmd = 4,
  TaskEvent = 5,
};

std::size_t encoded_size(MsgType type);

using Bytes = std::vector<std::uint8_t>;

struct LeaderStateMsg {
  std::uint32_t seq = 0;
  std::uint64_t t_us = 0;
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  bool grip_closed = false;
};

struct FollowerStateMsg {
  std::uint32_t seq = 0;
  std::uint64_t t_us = 0;
  Joints q = Joints::Zero();
  Joints qdot = Joints::Zero();
  Vec3 elbow = Vec3::Zero();
  Vec3 wrist = Vec3::Zero();
};

struct ForceCmdMsg {
  std::uint32_t seq = 0;
  std::uint64_t t_us = 0;
  Vec3 force = Vec3::Zero();
};

struct TorqueCmdMsg {
  std::uint32_t seq = 0;
  std::uint64_t t_us = 0;
  Joints tau = Joints::Zero();
};

struct TaskEventMsg {
  std::uint32_t seq = 0;
  std::uint64_t t_us = 0;
  std::uint8_t event = 0;
  std::uint8_t pose = 0;
  std::uint8_t condition = 0;
  std::uint8_t block = 0;
  std::uint32_t trial_id = 0;
  double value = 0.0;
};

using Message = std::variant<LeaderStateMsg, FollowerStateMsg, ForceCmdMsg, TorqueCmdMsg, TaskEventMsg>;

MsgType type_of(const Message& m);
std::uint32_t seq_of(const Message& m);
std::uint64_t time_of(const Message& m);

bool operator==(const LeaderStateMsg& a, const LeaderStateMsg& b);
bool operator==(const FollowerStateMsg& a, const FollowerStateMsg& b);
bool operator==(const ForceCmdMsg& a, const ForceCmdMsg& b);
bool operator==(const TorqueCmdMsg& a, const TorqueCmdMsg& b);
bool operator==(const TaskEventMsg& a, const TaskEventMsg& b);

Bytes encode(const Message& m);

enum class DecodeError : std::uint8_t {
  TooShort,
  BadMagic,
  BadVersion,
  UnknownType,
  BadLength,
  BadField,
};

std::string_view to_string(DecodeError e);

struct MalformedDatagram {
  DecodeError reason;
  std::string detail;
};

// Either a decoded message or the reason the datagram was rejected.
class DecodeResult {
 public:
  DecodeResult(Message m) : value_(std::move(m)) {}
  DecodeResult(MalformedDatagram e) : value_(std::move(e)) {}

  bool ok() const { return std::holds_alternative<Message>(value_); }
  explicit operator bool() const { return ok(); }
  const Message& message() const { return std::get<Message>(value_); }
  const MalformedDatagram& error() const { return std::get<MalformedDatagram>(value_); }

 private:
  std::variant<Message, MalformedDatagram> value_;
};

DecodeResult decode(std::span<const std::uint8_t> bytes);

enum class Verdict : std::uint8_t { Accept, RejectStale };

// Freshest-state filter: per (peer, type) only strictly increasing
// sequence numbers are accepted; gaps are fine.
class SeqTracker {
 public:
  Verdict accept(std::uint32_t peer, const Message& m);
  Verdict accept(std::uint32_t peer, MsgType type, std::uint32_t seq);

  std::uint64_t rejected() const { return rejected_; }

 private:
  std::map<std::pair<std::uint32_t, std::uint8_t>, std::uint32_t> last_;
  std::uint64_t rejected_ = 0;
};

}  // namespace teleop::net
