#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tgrasp/rng.hpp"
#include "tgrasp/types.hpp"

namespace tgrasp {

// Desired-state packet streamed master -> slave at 1 kHz.
struct Datagram {
  std::uint64_t seq = 0;
  std::uint64_t t_send_us = 0;
  StateVector desired;
};

// Fixed wire layout, little-endian, 77 bytes:
//   "TGRP" (4) | version=1 (1) | seq u64 (8) | t_send_us u64 (8) |
//   7 x f64 in state order x,y,z,ax,ay,az,gripper (56)
inline constexpr std::size_t kWireSize = 77;
inline constexpr std::uint8_t kWireVersion = 1;

std::array<std::uint8_t, kWireSize> wire_encode(const Datagram& d);
Datagram wire_decode(const std::uint8_t* data, std::size_t size);  // throws ProtocolError

struct ChannelConfig {
  double delay_mean = 0.0;       // s
  double delay_jitter_sd = 0.0;  // s, normal jitter truncated at 0 total delay
  double drop_prob = 0.0;        // [0,1]
  std::uint64_t seed = 0;

  void validate() const {
    if (!(drop_prob >= 0.0 && drop_prob <= 1.0))
      throw ValidationError("channel: drop_prob must be in [0,1]");
    if (delay_mean < 0 || delay_jitter_sd < 0)
      throw ValidationError("channel: delay parameters must be >= 0");
  }
};

// Simulated datagram channel with loss, delay and jitter. Delivery is
// latest-wins: receive() hands back the highest-seq datagram whose
// delivery time has passed and discards anything older, so the applied
// sequence is strictly increasing no matter how packets reorder.
class Channel {
 public:
  explicit Channel(const ChannelConfig& cfg) : cfg_(cfg), rng_(cfg.seed) { cfg_.validate(); }

  // Throws ProtocolError on non-monotonic seq.
  void send(const Datagram& d, double now);

  std::optional<Datagram> receive(double now);

  std::uint64_t sent() const { return n_sent_; }
  std::uint64_t dropped() const { return n_dropped_; }
  std::uint64_t applied() const { return n_applied_; }

 private:
  struct InFlight {
    double deliver_at;
    Datagram d;
  };
  ChannelConfig cfg_;
  Rng rng_;
  std::vector<InFlight> in_flight_;
  std::uint64_t last_sent_seq_ = 0;
  std::uint64_t last_applied_seq_ = 0;
  bool any_sent_ = false;
  bool any_applied_ = false;
  std::uint64_t n_sent_ = 0, n_dropped_ = 0, n_applied_ = 0;
};

}  // namespace tgrasp
