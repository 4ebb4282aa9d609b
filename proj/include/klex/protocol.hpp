#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "klex/message.hpp"
#include "klex/topology.hpp"

namespace klex {

/// Global protocol parameters shared by every process.
struct ProtocolParams {
  std::uint32_t k = 1;    // max units per request
  std::uint32_t ell = 1;  // number of resource units
  std::uint32_t n = 2;    // process count
  std::uint32_t c_max = 0;

  // Diagnostic switches. With replenishment off the root never recreates a
  // missing pusher / priority token; used to reproduce deadlock and livelock.
  bool replenish_push = true;
  bool replenish_prio = true;

  // When true the root folds the tokens it reserved from its last channel (and a
  // priority token held from it) into the traversal that is ending before deciding
  // on reset / replenishment. When false they are counted after the wrap, into the
  // next traversal's PT, and are counted a second time once released.
  bool count_root_reservations_at_wrap = true;

  /// Size of the counter domain [0 .. 2(n-1)(C_MAX+1)].
  std::uint32_t counter_modulus() const noexcept { return 2 * (n - 1) * (c_max + 1) + 1; }
  std::uint32_t token_cap() const noexcept { return ell + 1; }

  void validate() const {
    if (k < 1) throw std::invalid_argument("k must be at least 1");
    if (ell < 1) throw std::invalid_argument("ell must be at least 1");
    if (k > ell) throw std::invalid_argument("k must not exceed ell");
    if (n < 2) throw std::invalid_argument("n must be at least 2");
  }
};

enum class CsState : std::uint8_t { Out, Req, In };

inline const char* state_name(CsState s) {
  switch (s) {
    case CsState::Out: return "Out";
    case CsState::Req: return "Req";
    case CsState::In: return "In";
  }
  return "?";
}

/// A reserved resource token, tagged by the channel it arrived on.
struct Reservation {
  ChannelLabel channel = 0;
  std::uint64_t tag = 0;  // monitor-only
};

/// All protocol variables of one process. Root-only fields stay zero elsewhere.
struct ProcessState {
  std::uint32_t my_c = 0;
  ChannelLabel succ = 0;
  std::vector<Reservation> rset;
  std::uint32_t need = 0;
  CsState state = CsState::Out;
  std::optional<ChannelLabel> prio;

  std::uint32_t s_token = 0;
  std::uint32_t s_push = 0;
  std::uint32_t s_prio = 0;
  bool reset = false;

  /// |RSet|_q
  std::uint32_t reserved_from(ChannelLabel q) const {
    return static_cast<std::uint32_t>(
        std::count_if(rset.begin(), rset.end(), [q](const Reservation& r) { return r.channel == q; }));
  }

  bool enabled() const noexcept { return state == CsState::Req && rset.size() >= need; }

  friend bool operator==(const ProcessState& a, const ProcessState& b) {
    return a.my_c == b.my_c && a.succ == b.succ && a.need == b.need && a.state == b.state && a.prio == b.prio &&
           a.s_token == b.s_token && a.s_push == b.s_push && a.s_prio == b.s_prio && a.reset == b.reset &&
           std::equal(a.rset.begin(), a.rset.end(), b.rset.begin(), b.rset.end(),
                      [](const Reservation& x, const Reservation& y) { return x.channel == y.channel; });
  }
};

/// What a handler needs to know about where it runs.
struct ProcessContext {
  bool is_root = false;
  std::uint32_t degree = 1;
  ProtocolParams params;
};

struct Send {
  ChannelLabel channel = 0;
  Message message;

  friend bool operator==(const Send&, const Send&) = default;
};

/// Counts the root computed when a controller traversal ended, before it
/// replenished or reset anything.
struct TraversalEnd {
  std::uint32_t res_count = 0;   // PT + SToken
  std::uint32_t prio_count = 0;  // PPr + SPrio
  std::uint32_t push_count = 0;  // SPush
  bool ended_reset = false;      // Reset flag carried by the traversal that ended
  bool reset = false;            // Reset flag of the traversal that starts
};

struct HandlerOutput {
  explicit HandlerOutput(ProcessState s) : state(std::move(s)) {}

  ProcessState state;
  std::vector<Send> sends;  // in execution order
  bool entered_cs = false;
  bool restart_timer = false;
  std::optional<TraversalEnd> traversal_end;
};

namespace detail {

inline std::uint32_t sat_add(std::uint32_t value, std::uint32_t add, std::uint32_t cap) {
  return std::min(value + add, cap);
}

// Sends a resource token onward after it arrived on `from`; the root counts
// tokens that start a new loop of the ring.
inline void forward_res(HandlerOutput& out, ChannelLabel from, std::uint64_t tag, const ProcessContext& ctx) {
  if (ctx.is_root && from == ctx.degree - 1) {
    out.state.s_token = sat_add(out.state.s_token, 1, ctx.params.token_cap());
  }
  out.sends.push_back(Send{next_channel(ctx.degree, from), Message::res_t(tag)});
}

inline void release_all(HandlerOutput& out, const ProcessContext& ctx) {
  for (const auto& r : out.state.rset) forward_res(out, r.channel, r.tag, ctx);
  out.state.rset.clear();
}

}  // namespace detail

inline HandlerOutput handle_res_t(ProcessState s, ChannelLabel q, const ProcessContext& ctx, std::uint64_t tag = 0) {
  HandlerOutput out{std::move(s)};
  if (ctx.is_root && out.state.reset) return out;
  auto& st = out.state;
  if (st.state == CsState::Req && st.rset.size() < st.need) {
    st.rset.push_back(Reservation{q, tag});
  } else {
    detail::forward_res(out, q, tag, ctx);
  }
  return out;
}

/// The pusher makes a process that is neither in CS, nor enabled, nor holding
/// the priority token give back every reserved token.
inline HandlerOutput handle_push_t(ProcessState s, ChannelLabel q, const ProcessContext& ctx) {
  HandlerOutput out{std::move(s)};
  if (ctx.is_root && out.state.reset) return out;
  auto& st = out.state;
  const bool not_enabled = st.state != CsState::Req || st.rset.size() < st.need;
  if (!st.prio && not_enabled && st.state != CsState::In) detail::release_all(out, ctx);
  if (ctx.is_root && q == ctx.degree - 1) st.s_push = detail::sat_add(st.s_push, 1, 2);
  out.sends.push_back(Send{next_channel(ctx.degree, q), Message::push_t()});
  return out;
}

inline HandlerOutput handle_prio_t(ProcessState s, ChannelLabel q, const ProcessContext& ctx) {
  HandlerOutput out{std::move(s)};
  if (ctx.is_root && out.state.reset) return out;
  auto& st = out.state;
  if (!st.prio) {
    st.prio = q;
  } else {
    // A priority token passing the root from its last channel starts a new loop.
    if (ctx.is_root && q == ctx.degree - 1) st.s_prio = detail::sat_add(st.s_prio, 1, 2);
    out.sends.push_back(Send{next_channel(ctx.degree, q), Message::prio_t()});
  }
  return out;
}

inline HandlerOutput handle_ctrl_root(ProcessState s, ChannelLabel q, const Message& m, const ProcessContext& ctx) {
  HandlerOutput out{std::move(s)};
  auto& st = out.state;
  if (q != st.succ || m.counter != st.my_c) return out;

  const auto& prm = ctx.params;
  const std::uint32_t cap = prm.token_cap();
  std::uint32_t pt = m.passed_tokens;
  std::uint32_t ppr = m.passed_prio;
  auto pass_reservations = [&] {
    pt = detail::sat_add(pt, st.reserved_from(q), cap);
    if (st.prio == q) ppr = detail::sat_add(ppr, 1, 2);
  };

  st.succ = (st.succ + 1) % ctx.degree;
  if (st.succ == 0) {
    if (prm.count_root_reservations_at_wrap) pass_reservations();
    const std::uint32_t res_count = pt + st.s_token;
    const std::uint32_t prio_count = ppr + st.s_prio;
    const bool ended_reset = st.reset;

    st.my_c = (st.my_c + 1) % prm.counter_modulus();
    st.reset = res_count > prm.ell || prio_count > 1 || st.s_push > 1;
    if (st.reset) {
      st.rset.clear();
      st.prio.reset();
    } else {
      if (prio_count < 1 && prm.replenish_prio) out.sends.push_back(Send{0, Message::prio_t()});
      while (pt + st.s_token < prm.ell) {
        out.sends.push_back(Send{0, Message::res_t()});
        st.s_token = detail::sat_add(st.s_token, 1, cap);
      }
      if (st.s_push < 1 && prm.replenish_push) out.sends.push_back(Send{0, Message::push_t()});
    }
    out.traversal_end = TraversalEnd{res_count, prio_count, st.s_push, ended_reset, st.reset};
    st.s_token = 0;
    st.s_prio = 0;
    st.s_push = 0;
    pt = 0;
    ppr = 0;
    if (!prm.count_root_reservations_at_wrap) pass_reservations();
  } else {
    pass_reservations();
  }
  out.sends.push_back(Send{st.succ, Message::ctrl(st.my_c, st.reset, pt, ppr)});
  out.restart_timer = true;
  return out;
}

inline HandlerOutput handle_ctrl_nonroot(ProcessState s, ChannelLabel q, const Message& m, const ProcessContext& ctx) {
  HandlerOutput out{std::move(s)};
  auto& st = out.state;
  bool ok = false;
  auto wipe = [&] {
    st.rset.clear();
    st.prio.reset();
  };
  if (q == st.succ && m.counter == st.my_c && st.succ != 0) {
    st.succ = (st.succ + 1) % ctx.degree;
    ok = true;
    if (m.reset) wipe();
  }
  if (q == 0) {
    ok = true;
    if (st.my_c != m.counter) {
      st.succ = std::min<ChannelLabel>(1, ctx.degree - 1);
      if (m.reset) wipe();
    }
    st.my_c = m.counter;
  }
  if (!ok) return out;
  const std::uint32_t pt = detail::sat_add(m.passed_tokens, st.reserved_from(q), ctx.params.token_cap());
  const std::uint32_t ppr = st.prio == q ? detail::sat_add(m.passed_prio, 1, 2) : m.passed_prio;
  out.sends.push_back(Send{st.succ, Message::ctrl(st.my_c, m.reset, pt, ppr)});
  return out;
}

inline HandlerOutput handle_ctrl(ProcessState s, ChannelLabel q, const Message& m, const ProcessContext& ctx) {
  return ctx.is_root ? handle_ctrl_root(std::move(s), q, m, ctx) : handle_ctrl_nonroot(std::move(s), q, m, ctx);
}

/// Dispatches a received message to its handler.
inline HandlerOutput deliver(ProcessState s, ChannelLabel q, const Message& m, const ProcessContext& ctx) {
  switch (m.kind) {
    case MessageKind::ResT: return handle_res_t(std::move(s), q, ctx, m.tag);
    case MessageKind::PushT: return handle_push_t(std::move(s), q, ctx);
    case MessageKind::PrioT: return handle_prio_t(std::move(s), q, ctx);
    case MessageKind::Ctrl: return handle_ctrl(std::move(s), q, m, ctx);
  }
  throw StructuralError("unknown message kind");
}

/// Whether local_actions would change anything.
inline bool has_local_work(const ProcessState& s, bool release_cs) {
  if (s.enabled()) return true;
  if (s.state == CsState::In && release_cs) return true;
  return s.prio.has_value() && (s.state != CsState::Req || s.rset.size() >= s.need);
}

/// Enter CS when enabled, leave it when the application releases, pass on the
/// priority token once it is no longer needed. `release_cs` is ReleaseCS().
inline HandlerOutput local_actions(ProcessState s, const ProcessContext& ctx, bool release_cs) {
  HandlerOutput out{std::move(s)};
  auto& st = out.state;
  if (st.enabled()) {
    st.state = CsState::In;
    out.entered_cs = true;
  }
  if (st.state == CsState::In && release_cs) {
    detail::release_all(out, ctx);
    st.state = CsState::Out;
  }
  if (st.prio && (st.state != CsState::Req || st.rset.size() >= st.need)) {
    const ChannelLabel held = *st.prio;
    if (ctx.is_root && held == ctx.degree - 1) st.s_prio = detail::sat_add(st.s_prio, 1, 2);
    out.sends.push_back(Send{next_channel(ctx.degree, held), Message::prio_t()});
    st.prio.reset();
  }
  return out;
}

inline HandlerOutput on_timeout_root(ProcessState s) {
  HandlerOutput out{std::move(s)};
  out.sends.push_back(Send{out.state.succ, Message::ctrl(out.state.my_c, out.state.reset, 0, 0)});
  out.restart_timer = true;
  return out;
}

}  // namespace klex
