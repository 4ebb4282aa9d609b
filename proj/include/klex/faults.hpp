#pragma once

#include <cstdint>
#include <vector>

#include "klex/appmodel.hpp"
#include "klex/simnet.hpp"

namespace klex {

enum class FaultMode : std::uint8_t { None, Arbitrary };

/// Empty shape: every process idle, every channel empty.
inline Configuration empty_configuration(const TreeTopology& t, const std::vector<WorkloadEvent>& workload = {}) {
  Configuration c;
  c.procs.resize(t.size());
  c.channels.resize(t.channel_count());
  c.app = make_app_state(t.size(), workload);
  return c;
}

/// The defined start state: ell resource tokens, one pusher, one priority token and
/// one controller queued on the root's channel 0, all counting variables zero.
///
/// The root's counter starts at 1 so that the controller (stamped 1) is fresh for
/// every other process, whose counters are 0.
inline Configuration canonical_configuration(const TreeTopology& t, const ProtocolParams& params,
                                             const std::vector<WorkloadEvent>& workload = {}) {
  auto c = empty_configuration(t, workload);
  auto& root = c.procs[t.root()];
  root.my_c = 1 % params.counter_modulus();
  auto& fifo = c.channels[t.outgoing_channel(t.root(), 0)];
  fifo.push_back(Message::prio_t());
  for (std::uint32_t i = 0; i < params.ell; ++i) fifo.push_back(Message::res_t(c.next_tag++));
  fifo.push_back(Message::push_t());
  fifo.push_back(Message::ctrl(root.my_c, false, 0, 0));
  return c;
}

struct InjectOptions {
  std::uint64_t max_duration = 10;  // CS countdowns drawn in [0, D]
};

/// Arbitrary configuration within the structural bounds only: at most C_MAX
/// messages per channel, every variable inside its declared domain, |RSet| <= k.
///
/// Each seed also picks a flavor that biases toward an adversarial pattern:
/// uniform, resource-token excess, near-empty network, or colliding controller
/// counters.
inline Configuration inject_arbitrary(std::uint64_t seed, const TreeTopology& t, const ProtocolParams& params,
                                      const std::vector<WorkloadEvent>& workload = {}, const InjectOptions& opt = {}) {
  Rng rng(seed);
  auto c = empty_configuration(t, workload);
  const std::uint32_t modulus = params.counter_modulus();
  const auto flavor = rng.uniform(0, 3);
  enum : std::uint64_t { kUniform = 0, kExcess = 1, kSparse = 2, kCollide = 3 };

  for (ProcessId p = 0; p < t.size(); ++p) {
    const auto deg = t.degree(p);
    auto& s = c.procs[p];
    s.my_c = static_cast<std::uint32_t>(rng.uniform(0, modulus - 1));
    s.succ = static_cast<ChannelLabel>(rng.uniform(0, deg - 1));
    s.state = static_cast<CsState>(rng.uniform(0, 2));
    s.need = static_cast<std::uint32_t>(rng.uniform(0, params.k));
    const auto reserved = rng.uniform(0, flavor == kSparse ? 0 : params.k);
    for (std::uint64_t i = 0; i < reserved; ++i) {
      s.rset.push_back(Reservation{static_cast<ChannelLabel>(rng.uniform(0, deg - 1)), c.next_tag++});
    }
    if (rng.chance(1, 2)) s.prio = static_cast<ChannelLabel>(rng.uniform(0, deg - 1));
    if (t.is_root(p)) {
      s.s_token = static_cast<std::uint32_t>(rng.uniform(0, params.token_cap()));
      s.s_push = static_cast<std::uint32_t>(rng.uniform(0, 2));
      s.s_prio = static_cast<std::uint32_t>(rng.uniform(0, 2));
      s.reset = rng.chance(1, 3);
    }
    auto& a = c.app.procs[p];
    a.next_duration = rng.uniform(1, std::max<std::uint64_t>(1, opt.max_duration));
    if (s.state == CsState::In) a.remaining_cs = rng.uniform(0, opt.max_duration);
  }

  std::vector<std::uint32_t> used_counters;
  for (const auto& s : c.procs) used_counters.push_back(s.my_c);
  auto random_ctrl = [&] {
    std::uint32_t counter = static_cast<std::uint32_t>(rng.uniform(0, modulus - 1));
    if (flavor == kCollide && rng.chance(3, 4)) counter = used_counters[rng.uniform(0, used_counters.size() - 1)];
    used_counters.push_back(counter);
    return Message::ctrl(counter, rng.chance(1, 2), static_cast<std::uint32_t>(rng.uniform(0, params.token_cap())),
                         static_cast<std::uint32_t>(rng.uniform(0, 2)));
  };

  for (auto& fifo : c.channels) {
    const std::uint64_t len = rng.uniform(0, flavor == kSparse ? std::min<std::uint32_t>(params.c_max, 1) : params.c_max);
    for (std::uint64_t i = 0; i < len; ++i) {
      // Kind weights out of 10: ResT / PushT / PrioT / Ctrl.
      const std::uint64_t roll = rng.uniform(0, 9);
      MessageKind kind;
      switch (flavor) {
        case kExcess: kind = roll < 6 ? MessageKind::ResT : roll < 7 ? MessageKind::PushT : roll < 8 ? MessageKind::PrioT : MessageKind::Ctrl; break;
        case kSparse: kind = roll < 1 ? MessageKind::ResT : roll < 2 ? MessageKind::PrioT : MessageKind::Ctrl; break;
        case kCollide: kind = roll < 3 ? MessageKind::ResT : roll < 4 ? MessageKind::PushT : roll < 5 ? MessageKind::PrioT : MessageKind::Ctrl; break;
        default: kind = static_cast<MessageKind>(roll % 4); break;
      }
      switch (kind) {
        case MessageKind::ResT: fifo.push_back(Message::res_t(c.next_tag++)); break;
        case MessageKind::PushT: fifo.push_back(Message::push_t()); break;
        case MessageKind::PrioT: fifo.push_back(Message::prio_t()); break;
        case MessageKind::Ctrl: fifo.push_back(random_ctrl()); break;
      }
    }
  }
  return c;
}

inline Configuration initial_configuration(FaultMode mode, std::uint64_t seed, const TreeTopology& t,
                                           const ProtocolParams& params, const std::vector<WorkloadEvent>& workload = {},
                                           const InjectOptions& opt = {}) {
  return mode == FaultMode::None ? canonical_configuration(t, params, workload)
                                 : inject_arbitrary(seed, t, params, workload, opt);
}

}  // namespace klex
