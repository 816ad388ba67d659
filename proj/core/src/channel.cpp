#include "tgrasp/channel.hpp"

#include <algorithm>
#include <cstring>

namespace tgrasp {

namespace {

void put_u64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xff);
}
std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}
void put_f64(std::uint8_t* p, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(p, v);
}
double get_f64(const std::uint8_t* p) {
  std::uint64_t v = get_u64(p);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace

std::array<std::uint8_t, kWireSize> wire_encode(const Datagram& d) {
  std::array<std::uint8_t, kWireSize> out{};
  out[0] = 'T';
  out[1] = 'G';
  out[2] = 'R';
  out[3] = 'P';
  out[4] = kWireVersion;
  put_u64(&out[5], d.seq);
  put_u64(&out[13], d.t_send_us);
  const auto s = d.desired.as_array();
  for (int i = 0; i < 7; ++i) put_f64(&out[21 + 8 * i], s[static_cast<std::size_t>(i)]);
  return out;
}

Datagram wire_decode(const std::uint8_t* data, std::size_t size) {
  if (size != kWireSize) throw ProtocolError("wire: bad size " + std::to_string(size));
  if (data[0] != 'T' || data[1] != 'G' || data[2] != 'R' || data[3] != 'P')
    throw ProtocolError("wire: bad magic");
  if (data[4] != kWireVersion)
    throw ProtocolError("wire: unsupported version " + std::to_string(data[4]));
  Datagram d;
  d.seq = get_u64(&data[5]);
  d.t_send_us = get_u64(&data[13]);
  std::array<double, 7> s;
  for (int i = 0; i < 7; ++i) s[static_cast<std::size_t>(i)] = get_f64(&data[21 + 8 * i]);
  d.desired = StateVector::from_array(s);
  return d;
}

void Channel::send(const Datagram& d, double now) {
  if (any_sent_ && d.seq <= last_sent_seq_)
    throw ProtocolError("channel: non-monotonic seq " + std::to_string(d.seq) +
                        " after " + std::to_string(last_sent_seq_));
  last_sent_seq_ = d.seq;
  any_sent_ = true;
  ++n_sent_;
  if (cfg_.drop_prob > 0.0 && rng_.bernoulli(cfg_.drop_prob)) {
    ++n_dropped_;
    return;
  }
  double delay = cfg_.delay_mean;
  if (cfg_.delay_jitter_sd > 0.0) delay += cfg_.delay_jitter_sd * rng_.gaussian();
  if (delay < 0.0) delay = 0.0;
  in_flight_.push_back({now + delay, d});
}

std::optional<Datagram> Channel::receive(double now) {
  // pick highest-seq deliverable, discard the rest of the deliverable set
  // and anything that would arrive later with an already-superseded seq
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < in_flight_.size(); ++i) {
    if (in_flight_[i].deliver_at <= now) {
      if (!best || in_flight_[i].d.seq > in_flight_[*best].d.seq) best = i;
    }
  }
  if (!best) return std::nullopt;
  Datagram d = in_flight_[*best].d;
  const std::uint64_t cutoff = d.seq;
  in_flight_.erase(std::remove_if(in_flight_.begin(), in_flight_.end(),
                                  [&](const InFlight& f) { return f.d.seq <= cutoff; }),
                   in_flight_.end());
  if (any_applied_ && d.seq <= last_applied_seq_) return std::nullopt;  // stale
  last_applied_seq_ = d.seq;
  any_applied_ = true;
  ++n_applied_;
  return d;
}

}  // namespace tgrasp
