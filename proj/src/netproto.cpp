#include "teleop/netproto.hpp"

#include <bit>
#include <string>

namespace teleop::net {
namespace {

class Writer {
 public:
  explicit Writer(std::size_t n) { buf_.reserve(n); }

  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  template <typename Derived>
  void vec(const Eigen::MatrixBase<Derived>& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
  void pad(std::size_t n) { buf_.insert(buf_.end(), n, 0); }

  Bytes take() { return std::move(buf_); }

 private:
  Bytes buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  std::uint8_t u8() { return b_[pos_++]; }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b_[pos_++]} << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  template <typename Derived>
  void vec(Eigen::MatrixBase<Derived>& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
  }
  void skip(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

void header(Writer& w, MsgType type, std::uint32_t seq, std::uint64_t t_us) {
  w.u8(kMagic0);
  w.u8(kMagic1);
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(type));
  w.u32(seq);
  w.u64(t_us);
}

MalformedDatagram malformed(DecodeError e, std::string detail) { return {e, std::move(detail)}; }

}  // namespace

std::size_t encoded_size(MsgType type) {
  switch (type) {
    case MsgType::LeaderState:
      return kHeaderSize + 56;
    case MsgType::FollowerState:
      return kHeaderSize + 144;
    case MsgType::ForceCmd:
      return kHeaderSize + 24;
    case MsgType::TorqueCmd:
      return kHeaderSize + 48;
    case MsgType::TaskEvent:
      return kHeaderSize + 16;
  }
  return 0;
}

MsgType type_of(const Message& m) {
  return static_cast<MsgType>(m.index() + 1);
}

std::uint32_t seq_of(const Message& m) {
  return std::visit([](const auto& x) { return x.seq; }, m);
}

std::uint64_t time_of(const Message& m) {
  return std::visit([](const auto& x) { return x.t_us; }, m);
}

bool operator==(const LeaderStateMsg& a, const LeaderStateMsg& b) {
  return a.seq == b.seq && a.t_us == b.t_us && a.pos == b.pos && a.vel == b.vel &&
         a.grip_closed == b.grip_closed;
}
bool operator==(const FollowerStateMsg& a, const FollowerStateMsg& b) {
  return a.seq == b.seq && a.t_us == b.t_us && a.q == b.q && a.qdot == b.qdot &&
         a.elbow == b.elbow && a.wrist == b.wrist;
}
bool operator==(const ForceCmdMsg& a, const ForceCmdMsg& b) {
  return a.seq == b.seq && a.t_us == b.t_us && a.force == b.force;
}
bool operator==(const TorqueCmdMsg& a, const TorqueCmdMsg& b) {
  return a.seq == b.seq && a.t_us == b.t_us && a.tau == b.tau;
}
bool operator==(const TaskEventMsg& a, const TaskEventMsg& b) {
  return a.seq == b.seq && a.t_us == b.t_us && a.event == b.event && a.pose == b.pose &&
         a.condition == b.condition && a.block == b.block && a.trial_id == b.trial_id &&
         std::bit_cast<std::uint64_t>(a.value) == std::bit_cast<std::uint64_t>(b.value);
}

Bytes encode(const Message& m) {
  const MsgType type = type_of(m);
  Writer w(encoded_size(type));
  header(w, type, seq_of(m), time_of(m));
  std::visit(
      [&w](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, LeaderStateMsg>) {
          w.vec(x.pos);
          w.vec(x.vel);
          w.u8(x.grip_closed ? 1 : 0);
          w.pad(7);
        } else if constexpr (std::is_same_v<T, FollowerStateMsg>) {
          w.vec(x.q);
          w.vec(x.qdot);
          w.vec(x.elbow);
          w.vec(x.wrist);
        } else if constexpr (std::is_same_v<T, ForceCmdMsg>) {
          w.vec(x.force);
        } else if constexpr (std::is_same_v<T, TorqueCmdMsg>) {
          w.vec(x.tau);
        } else {
          w.u8(x.event);
          w.u8(x.pose);
          w.u8(x.condition);
          w.u8(x.block);
          w.u32(x.trial_id);
          w.f64(x.value);
        }
      },
      m);
  return w.take();
}

std::string_view to_string(DecodeError e) {
  switch (e) {
    case DecodeError::TooShort:
      return "too_short";
    case DecodeError::BadMagic:
      return "bad_magic";
    case DecodeError::BadVersion:
      return "bad_version";
    case DecodeError::UnknownType:
      return "unknown_type";
    case DecodeError::BadLength:
      return "bad_length";
    case DecodeError::BadField:
      return "bad_field";
  }
  return "unknown";
}

DecodeResult decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) {
    return malformed(DecodeError::TooShort,
                     "datagram of " + std::to_string(bytes.size()) + " bytes is shorter than the header");
  }
  if (bytes[0] != kMagic0 || bytes[1] != kMagic1) {
    return malformed(DecodeError::BadMagic, "magic bytes do not match");
  }
  if (bytes[2] != kVersion) {
    return malformed(DecodeError::BadVersion, "unsupported version " + std::to_string(bytes[2]));
  }
  const std::uint8_t raw_type = bytes[3];
  if (raw_type < 1 || raw_type > 5) {
    return malformed(DecodeError::UnknownType, "unknown message type " + std::to_string(raw_type));
  }
  const auto type = static_cast<MsgType>(raw_type);
  if (bytes.size() != encoded_size(type)) {
    return malformed(DecodeError::BadLength, "type " + std::to_string(raw_type) + " expects " +
                                                 std::to_string(encoded_size(type)) + " bytes, got " +
                                                 std::to_string(bytes.size()));
  }

  Reader r(bytes);
  r.skip(4);
  const std::uint32_t seq = r.u32();
  const std::uint64_t t_us = r.u64();

  switch (type) {
    case MsgType::LeaderState: {
      LeaderStateMsg m{seq, t_us};
      r.vec(m.pos);
      r.vec(m.vel);
      const std::uint8_t grip = r.u8();
      if (grip > 1) return malformed(DecodeError::BadField, "grip byte must be 0 or 1");
      m.grip_closed = grip == 1;
      return Message{m};
    }
    case MsgType::FollowerState: {
      FollowerStateMsg m{seq, t_us};
      r.vec(m.q);
      r.vec(m.qdot);
      r.vec(m.elbow);
      r.vec(m.wrist);
      return Message{m};
    }
    case MsgType::ForceCmd: {
      ForceCmdMsg m{seq, t_us};
      r.vec(m.force);
      return Message{m};
    }
    case MsgType::TorqueCmd: {
      TorqueCmdMsg m{seq, t_us};
      r.vec(m.tau);
      return Message{m};
    }
    case MsgType::TaskEvent: {
      TaskEventMsg m{seq, t_us};
      m.event = r.u8();
      m.pose = r.u8();
      m.condition = r.u8();
      m.block = r.u8();
      m.trial_id = r.u32();
      m.value = r.f64();
      return Message{m};
    }
  }
  return malformed(DecodeError::UnknownType, "unreachable");
}

Verdict SeqTracker::accept(std::uint32_t peer, MsgType type, std::uint32_t seq) {
  const auto key = std::make_pair(peer, static_cast<std::uint8_t>(type));
  const auto it = last_.find(key);
  if (it != last_.end() && seq <= it->second) {
    ++rejected_;
    return Verdict::RejectStale;
  }
  last_[key] = seq;
  return Verdict::Accept;
}

Verdict SeqTracker::accept(std::uint32_t peer, const Message& m) {
  return accept(peer, type_of(m), seq_of(m));
}

}  // namespace teleop::net
