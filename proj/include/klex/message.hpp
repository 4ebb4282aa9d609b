#pragma once

#include <cstdint>
#include <string>

namespace klex {

enum class MessageKind : std::uint8_t { ResT, PushT, PrioT, Ctrl };

/// A wire message. Only Ctrl carries fields.
///
/// `tag` is a monitor-only identity for resource tokens. The protocol never reads
/// it and it does not take part in equality.
struct Message {
  MessageKind kind = MessageKind::ResT;
  std::uint32_t counter = 0;        // C
  bool reset = false;               // R
  std::uint32_t passed_tokens = 0;  // PT, saturates at ell+1
  std::uint32_t passed_prio = 0;    // PPr, saturates at 2
  std::uint64_t tag = 0;

  static Message res_t(std::uint64_t tag = 0) { return Message{MessageKind::ResT, 0, false, 0, 0, tag}; }
  static Message push_t() { return Message{MessageKind::PushT}; }
  static Message prio_t() { return Message{MessageKind::PrioT}; }
  static Message ctrl(std::uint32_t c, bool r, std::uint32_t pt, std::uint32_t ppr) {
    return Message{MessageKind::Ctrl, c, r, pt, ppr, 0};
  }

  bool is(MessageKind k) const noexcept { return kind == k; }

  friend bool operator==(const Message& a, const Message& b) noexcept {
    if (a.kind != b.kind) return false;
    if (a.kind != MessageKind::Ctrl) return true;
    return a.counter == b.counter && a.reset == b.reset && a.passed_tokens == b.passed_tokens &&
           a.passed_prio == b.passed_prio;
  }
};

inline const char* kind_name(MessageKind k) {
  switch (k) {
    case MessageKind::ResT: return "ResT";
    case MessageKind::PushT: return "PushT";
    case MessageKind::PrioT: return "PrioT";
    case MessageKind::Ctrl: return "Ctrl";
  }
  return "?";
}

inline std::string to_string(const Message& m) {
  if (m.kind != MessageKind::Ctrl) return kind_name(m.kind);
  return "Ctrl{C=" + std::to_string(m.counter) + ",R=" + (m.reset ? "1" : "0") +
         ",PT=" + std::to_string(m.passed_tokens) + ",PPr=" + std::to_string(m.passed_prio) + "}";
}

}  // namespace klex
