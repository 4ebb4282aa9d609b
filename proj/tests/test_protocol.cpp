#include <gtest/gtest.h>

#include <vector>

#include "klex/protocol.hpp"
#include "klex/rng.hpp"

using namespace klex;

namespace klex {
void PrintTo(const Send& s, std::ostream* os) { *os << s.channel << ':' << to_string(s.message); }
}  // namespace klex

namespace {

ProcessContext nonroot(std::uint32_t degree, std::uint32_t k = 3, std::uint32_t ell = 3) {
  return ProcessContext{false, degree, ProtocolParams{k, ell, 6, 1}};
}

ProcessContext root(std::uint32_t degree, std::uint32_t k = 3, std::uint32_t ell = 3) {
  return ProcessContext{true, degree, ProtocolParams{k, ell, 6, 1}};
}

std::vector<Reservation> reservations(std::initializer_list<ChannelLabel> labels) {
  std::vector<Reservation> out;
  for (auto l : labels) out.push_back(Reservation{l, 0});
  return out;
}

std::vector<ChannelLabel> labels(const std::vector<Reservation>& rset) {
  std::vector<ChannelLabel> out;
  for (const auto& r : rset) out.push_back(r.channel);
  return out;
}

std::vector<Send> sends(std::initializer_list<std::pair<ChannelLabel, Message>> list) {
  std::vector<Send> out;
  for (const auto& [ch, m] : list) out.push_back(Send{ch, m});
  return out;
}

std::size_t count_res(const std::vector<Send>& s) {
  std::size_t n = 0;
  for (const auto& x : s) n += x.message.is(MessageKind::ResT);
  return n;
}

}  // namespace

// Resource tokens

TEST(HandleResT, RequesterReservesToken) {
  ProcessState s;
  s.state = CsState::Req;
  s.need = 2;
  s.rset = reservations({0});
  const auto out = handle_res_t(s, 1, nonroot(3));
  EXPECT_EQ(labels(out.state.rset), (std::vector<ChannelLabel>{0, 1}));
  EXPECT_TRUE(out.sends.empty());
}

TEST(HandleResT, IdleProcessForwards) {
  ProcessState s;
  const auto out = handle_res_t(s, 2, nonroot(3));
  EXPECT_EQ(out.sends, sends({{0, Message::res_t()}}));
  EXPECT_EQ(out.state, s);
}

TEST(HandleResT, RootInResetSinksToken) {
  ProcessState s;
  s.reset = true;
  s.state = CsState::Req;
  s.need = 1;
  const auto out = handle_res_t(s, 0, root(2));
  EXPECT_TRUE(out.sends.empty());
  EXPECT_EQ(out.state, s);
}

TEST(HandleResT, RootTokenCounterSaturates) {
  ProcessState s;
  s.s_token = 4;  // ell + 1
  const auto out = handle_res_t(s, 1, root(2));
  EXPECT_EQ(out.state.s_token, 4u);
  EXPECT_EQ(out.sends, sends({{0, Message::res_t()}}));
}

TEST(HandleResT, RootCountsOnlyTokensFromLastChannel) {
  ProcessState s;
  EXPECT_EQ(handle_res_t(s, 0, root(3)).state.s_token, 0u);
  EXPECT_EQ(handle_res_t(s, 2, root(3)).state.s_token, 1u);
}

// Pusher

TEST(HandlePushT, UnsatisfiedRequesterReleasesEverything) {
  ProcessState s;
  s.state = CsState::Req;
  s.need = 3;
  s.rset = reservations({0, 0});
  const auto out = handle_push_t(s, 0, nonroot(2));
  EXPECT_EQ(out.sends, sends({{1, Message::res_t()}, {1, Message::res_t()}, {1, Message::push_t()}}));
  EXPECT_TRUE(out.state.rset.empty());
}

TEST(HandlePushT, ProcessInCsOnlyForwards) {
  ProcessState s;
  s.state = CsState::In;
  s.need = 1;
  s.rset = reservations({1});
  const auto out = handle_push_t(s, 1, nonroot(2));
  EXPECT_EQ(out.sends, sends({{0, Message::push_t()}}));
  EXPECT_EQ(labels(out.state.rset), (std::vector<ChannelLabel>{1}));
}

TEST(HandlePushT, PriorityHolderKeepsReservations) {
  ProcessState s;
  s.state = CsState::Req;
  s.need = 3;
  s.rset = reservations({0, 1});
  s.prio = 2;
  const auto out = handle_push_t(s, 0, nonroot(3));
  EXPECT_EQ(out.sends, sends({{1, Message::push_t()}}));
  EXPECT_EQ(out.state, s);
}

TEST(HandlePushT, EnabledProcessKeepsReservations) {
  ProcessState s;
  s.state = CsState::Req;
  s.need = 1;
  s.rset = reservations({0});
  const auto out = handle_push_t(s, 0, nonroot(2));
  EXPECT_EQ(out.state.rset.size(), 1u);
}

TEST(HandlePushT, RootCountsPusherAndReleasedTokens) {
  ProcessState s;
  s.state = CsState::Out;
  s.rset = reservations({1, 0});
  const auto out = handle_push_t(s, 1, root(2));
  EXPECT_EQ(out.state.s_push, 1u);
  EXPECT_EQ(out.state.s_token, 1u);  // only the token reserved from channel 1 re-enters the ring start
  EXPECT_EQ(out.sends, sends({{0, Message::res_t()}, {1, Message::res_t()}, {0, Message::push_t()}}));
}

// Priority token

TEST(HandlePrioT, FreeProcessTakesIt) {
  ProcessState s;
  const auto out = handle_prio_t(s, 1, nonroot(3));
  EXPECT_EQ(out.state.prio, std::optional<ChannelLabel>(1));
  EXPECT_TRUE(out.sends.empty());
}

TEST(HandlePrioT, HolderForwardsSecondOne) {
  ProcessState s;
  s.prio = 0;
  const auto out = handle_prio_t(s, 1, nonroot(2));
  EXPECT_EQ(out.sends, sends({{0, Message::prio_t()}}));
  EXPECT_EQ(out.state.prio, std::optional<ChannelLabel>(0));
}

TEST(HandlePrioT, RootInResetSinksIt) {
  ProcessState s;
  s.reset = true;
  const auto out = handle_prio_t(s, 0, root(2));
  EXPECT_TRUE(out.sends.empty());
  EXPECT_FALSE(out.state.prio);
}

// Root controller

TEST(HandleCtrlRoot, CompleteTraversalWithoutDeficit) {
  ProcessState s;
  s.succ = 1;
  s.my_c = 5;
  s.s_token = 1;
  s.s_push = 1;
  const auto out = handle_ctrl_root(s, 1, Message::ctrl(5, false, 2, 1), root(2));
  ASSERT_TRUE(out.traversal_end);
  EXPECT_EQ(out.traversal_end->res_count, 3u);
  EXPECT_EQ(out.traversal_end->prio_count, 1u);
  EXPECT_EQ(out.traversal_end->push_count, 1u);
  EXPECT_FALSE(out.state.reset);
  EXPECT_EQ(out.state.my_c, 6u);
  EXPECT_EQ(out.state.succ, 0u);
  EXPECT_EQ(out.state.s_token + out.state.s_push + out.state.s_prio, 0u);
  EXPECT_EQ(out.sends, sends({{0, Message::ctrl(6, false, 0, 0)}}));
  EXPECT_TRUE(out.restart_timer);
}

TEST(HandleCtrlRoot, ExcessTriggersReset) {
  ProcessState s;
  s.succ = 1;
  s.my_c = 5;
  s.s_token = 1;
  s.s_push = 1;
  s.rset = reservations({0});
  s.prio = 0;
  const auto out = handle_ctrl_root(s, 1, Message::ctrl(5, false, 3, 1), root(2));
  EXPECT_TRUE(out.state.reset);
  EXPECT_TRUE(out.state.rset.empty());
  EXPECT_FALSE(out.state.prio);
  EXPECT_EQ(out.sends, sends({{0, Message::ctrl(6, true, 0, 0)}}));
}

TEST(HandleCtrlRoot, DuplicatePusherOrPriorityTriggersReset) {
  ProcessState s;
  s.succ = 1;
  s.my_c = 2;
  s.s_push = 2;
  EXPECT_TRUE(handle_ctrl_root(s, 1, Message::ctrl(2, false, 3, 1), root(2)).state.reset);
  s.s_push = 1;
  s.s_prio = 1;
  EXPECT_TRUE(handle_ctrl_root(s, 1, Message::ctrl(2, false, 3, 1), root(2)).state.reset);
}

TEST(HandleCtrlRoot, StaleCounterIgnored) {
  ProcessState s;
  s.succ = 1;
  s.my_c = 5;
  const auto out = handle_ctrl_root(s, 1, Message::ctrl(4, false, 0, 0), root(2));
  EXPECT_TRUE(out.sends.empty());
  EXPECT_EQ(out.state, s);
  EXPECT_FALSE(out.restart_timer);
}

TEST(HandleCtrlRoot, WrongChannelIgnored) {
  ProcessState s;
  s.succ = 1;
  s.my_c = 5;
  EXPECT_TRUE(handle_ctrl_root(s, 0, Message::ctrl(5, false, 0, 0), root(2)).sends.empty());
}

TEST(HandleCtrlRoot, DeficitReplenishesInOrder) {
  ProcessState s;
  s.succ = 1;
  s.my_c = 3;
  const auto out = handle_ctrl_root(s, 1, Message::ctrl(3, false, 0, 0), root(2, 2, 2));
  EXPECT_EQ(out.sends, sends({{0, Message::prio_t()},
                              {0, Message::res_t()},
                              {0, Message::res_t()},
                              {0, Message::push_t()},
                              {0, Message::ctrl(4, false, 0, 0)}}));
}

TEST(HandleCtrlRoot, MidTraversalAccumulatesReservations) {
  ProcessState s;
  s.succ = 0;
  s.my_c = 1;
  s.rset = reservations({0, 0, 1});
  s.prio = 0;
  const auto out = handle_ctrl_root(s, 0, Message::ctrl(1, false, 1, 0), root(3));
  EXPECT_FALSE(out.traversal_end);
  EXPECT_EQ(out.state.succ, 1u);
  EXPECT_EQ(out.sends, sends({{1, Message::ctrl(1, false, 3, 1)}}));
}

TEST(HandleCtrlRoot, CountSaturatesAtCap) {
  ProcessState s;
  s.succ = 0;
  s.my_c = 1;
  s.rset = reservations({0, 0, 0});
  const auto out = handle_ctrl_root(s, 0, Message::ctrl(1, false, 3, 2), root(3));
  EXPECT_EQ(out.sends.back().message.passed_tokens, 4u);
  EXPECT_EQ(out.sends.back().message.passed_prio, 2u);
}

// The root's own reservations from its last channel belong to the traversal that
// is ending. Counting them after the wrap instead defers them to the next
// traversal's PT.
TEST(HandleCtrlRoot, WrapFoldsRootReservationsIntoEndingTraversal) {
  ProcessState s;
  s.succ = 1;
  s.my_c = 2;
  s.state = CsState::In;
  s.rset = reservations({1});
  s.s_push = 1;
  s.prio = 1;
  const auto folded = handle_ctrl_root(s, 1, Message::ctrl(2, false, 2, 0), root(2));
  EXPECT_EQ(folded.traversal_end->res_count, 3u);
  EXPECT_EQ(folded.traversal_end->prio_count, 1u);
  EXPECT_EQ(folded.sends, sends({{0, Message::ctrl(3, false, 0, 0)}}));

  auto ctx = root(2);
  ctx.params.count_root_reservations_at_wrap = false;
  const auto literal = handle_ctrl_root(s, 1, Message::ctrl(2, false, 2, 0), ctx);
  EXPECT_EQ(literal.traversal_end->res_count, 2u);
  EXPECT_EQ(literal.traversal_end->prio_count, 0u);
  // Spurious replenishment of a unit and a priority token that still exist, then
  // the held ones are charged to the next traversal as well.
  EXPECT_EQ(literal.sends, sends({{0, Message::prio_t()}, {0, Message::res_t()}, {0, Message::ctrl(3, false, 1, 1)}}));
}

// Non-root controller

TEST(HandleCtrlNonRoot, LeafAdoptsFreshCounter) {
  ProcessState s;
  s.my_c = 3;
  const auto out = handle_ctrl_nonroot(s, 0, Message::ctrl(7, false, 0, 0), nonroot(1));
  EXPECT_EQ(out.state.my_c, 7u);
  EXPECT_EQ(out.state.succ, 0u);
  EXPECT_EQ(out.sends, sends({{0, Message::ctrl(7, false, 0, 0)}}));
}

TEST(HandleCtrlNonRoot, FreshCounterStartsAtFirstChild) {
  ProcessState s;
  s.my_c = 3;
  s.succ = 2;
  s.rset = reservations({0});
  const auto out = handle_ctrl_nonroot(s, 0, Message::ctrl(4, false, 1, 0), nonroot(3));
  EXPECT_EQ(out.state.succ, 1u);
  EXPECT_EQ(out.sends, sends({{1, Message::ctrl(4, false, 2, 0)}}));
}

TEST(HandleCtrlNonRoot, DuplicateFromParentIsRetransmitted) {
  ProcessState s;
  s.my_c = 4;
  s.succ = 2;
  const auto out = handle_ctrl_nonroot(s, 0, Message::ctrl(4, false, 1, 1), nonroot(3));
  EXPECT_EQ(out.state.succ, 2u);
  EXPECT_EQ(out.state.my_c, 4u);
  EXPECT_EQ(out.sends, sends({{2, Message::ctrl(4, false, 1, 1)}}));
}

TEST(HandleCtrlNonRoot, ResetWipesBeforeCounting) {
  ProcessState s;
  s.my_c = 9;
  s.succ = 2;
  s.rset = reservations({1, 2});
  s.prio = 2;
  const auto out = handle_ctrl_nonroot(s, 2, Message::ctrl(9, true, 1, 0), nonroot(4));
  EXPECT_EQ(out.state.succ, 3u);
  EXPECT_TRUE(out.state.rset.empty());
  EXPECT_FALSE(out.state.prio);
  EXPECT_EQ(out.sends, sends({{3, Message::ctrl(9, true, 1, 0)}}));
}

TEST(HandleCtrlNonRoot, ReturningControllerCountsChildChannel) {
  ProcessState s;
  s.my_c = 9;
  s.succ = 1;
  s.rset = reservations({1, 1});
  s.prio = 1;
  const auto out = handle_ctrl_nonroot(s, 1, Message::ctrl(9, false, 0, 0), nonroot(2));
  EXPECT_EQ(out.state.succ, 0u);
  EXPECT_EQ(out.sends, sends({{0, Message::ctrl(9, false, 2, 1)}}));
}

TEST(HandleCtrlNonRoot, InvalidDropped) {
  ProcessState s;
  s.my_c = 5;
  s.succ = 3;
  const auto out = handle_ctrl_nonroot(s, 1, Message::ctrl(6, false, 0, 0), nonroot(4));
  EXPECT_TRUE(out.sends.empty());
  EXPECT_EQ(out.state, s);
}

TEST(HandleCtrlNonRoot, ChildChannelWithSuccZeroIsNotValid) {
  ProcessState s;
  s.my_c = 5;
  s.succ = 0;
  // q = Succ = 0 with a matching counter is the duplicate case, never an advance.
  const auto out = handle_ctrl_nonroot(s, 0, Message::ctrl(5, false, 0, 0), nonroot(2));
  EXPECT_EQ(out.state.succ, 0u);
  EXPECT_EQ(out.sends.size(), 1u);
}

// Local actions and timeout

TEST(LocalActions, EnabledRequesterEnters) {
  ProcessState s;
  s.state = CsState::Req;
  s.need = 2;
  s.rset = reservations({0, 1});
  const auto out = local_actions(s, nonroot(3), false);
  EXPECT_EQ(out.state.state, CsState::In);
  EXPECT_TRUE(out.entered_cs);
  EXPECT_TRUE(out.sends.empty());
}

TEST(LocalActions, ReleaseForwardsEveryToken) {
  ProcessState s;
  s.state = CsState::In;
  s.need = 2;
  s.rset = reservations({0, 0});
  const auto out = local_actions(s, nonroot(2), true);
  EXPECT_EQ(out.sends, sends({{1, Message::res_t()}, {1, Message::res_t()}}));
  EXPECT_EQ(out.state.state, CsState::Out);
  EXPECT_TRUE(out.state.rset.empty());
}

TEST(LocalActions, IdleHolderPassesPriorityOn) {
  ProcessState s;
  s.prio = 1;
  const auto out = local_actions(s, nonroot(3), false);
  EXPECT_EQ(out.sends, sends({{2, Message::prio_t()}}));
  EXPECT_FALSE(out.state.prio);
}

TEST(LocalActions, UnsatisfiedRequesterKeepsPriority) {
  ProcessState s;
  s.state = CsState::Req;
  s.need = 2;
  s.prio = 0;
  const auto out = local_actions(s, nonroot(3), false);
  EXPECT_TRUE(out.sends.empty());
  EXPECT_TRUE(out.state.prio);
}

TEST(LocalActions, EnteringReleasesPriorityInSameStep) {
  ProcessState s;
  s.state = CsState::Req;
  s.need = 1;
  s.rset = reservations({0});
  s.prio = 0;
  const auto out = local_actions(s, nonroot(2), false);
  EXPECT_EQ(out.state.state, CsState::In);
  EXPECT_EQ(out.sends, sends({{1, Message::prio_t()}}));
}

TEST(LocalActions, HasLocalWorkMatchesEffect) {
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    ProcessState s;
    s.state = static_cast<CsState>(rng.uniform(0, 2));
    s.need = static_cast<std::uint32_t>(rng.uniform(0, 3));
    for (auto r = rng.uniform(0, 3); r > 0; --r) s.rset.push_back(Reservation{static_cast<ChannelLabel>(rng.uniform(0, 2)), 0});
    if (rng.chance(1, 2)) s.prio = static_cast<ChannelLabel>(rng.uniform(0, 2));
    const bool release = rng.chance(1, 2);
    const auto out = local_actions(s, nonroot(3), release);
    const bool changed = !(out.state == s) || !out.sends.empty();
    EXPECT_EQ(has_local_work(s, release), changed);
  }
}

TEST(OnTimeoutRoot, RetransmitsCurrentController) {
  ProcessState s;
  s.my_c = 4;
  s.succ = 1;
  auto out = on_timeout_root(s);
  EXPECT_EQ(out.sends, sends({{1, Message::ctrl(4, false, 0, 0)}}));
  EXPECT_TRUE(out.restart_timer);
  EXPECT_EQ(out.state, s);

  s.my_c = 0;
  s.succ = 0;
  s.reset = true;
  out = on_timeout_root(s);
  EXPECT_EQ(out.sends, sends({{0, Message::ctrl(0, true, 0, 0)}}));
}

// Properties over random states

namespace {

struct RandomCase {
  ProcessState state;
  ProcessContext ctx;
  ChannelLabel q;
  Message msg;
};

RandomCase random_case(Rng& rng) {
  const auto ell = static_cast<std::uint32_t>(rng.uniform(1, 5));
  const auto k = static_cast<std::uint32_t>(rng.uniform(1, ell));
  const auto deg = static_cast<std::uint32_t>(rng.uniform(1, 4));
  ProtocolParams p{k, ell, 6, static_cast<std::uint32_t>(rng.uniform(0, 3))};
  const bool is_root = rng.chance(1, 2);
  ProcessState s;
  s.my_c = static_cast<std::uint32_t>(rng.uniform(0, p.counter_modulus() - 1));
  s.succ = static_cast<ChannelLabel>(rng.uniform(0, deg - 1));
  s.state = static_cast<CsState>(rng.uniform(0, 2));
  s.need = static_cast<std::uint32_t>(rng.uniform(0, k));
  for (auto r = rng.uniform(0, k); r > 0; --r) s.rset.push_back(Reservation{static_cast<ChannelLabel>(rng.uniform(0, deg - 1)), 0});
  if (rng.chance(1, 2)) s.prio = static_cast<ChannelLabel>(rng.uniform(0, deg - 1));
  if (is_root) {
    s.s_token = static_cast<std::uint32_t>(rng.uniform(0, ell + 1));
    s.s_push = static_cast<std::uint32_t>(rng.uniform(0, 2));
    s.s_prio = static_cast<std::uint32_t>(rng.uniform(0, 2));
    s.reset = rng.chance(1, 3);
  }
  Message m;
  switch (rng.uniform(0, 3)) {
    case 0: m = Message::res_t(); break;
    case 1: m = Message::push_t(); break;
    case 2: m = Message::prio_t(); break;
    default:
      m = Message::ctrl(rng.chance(1, 2) ? s.my_c : static_cast<std::uint32_t>(rng.uniform(0, p.counter_modulus() - 1)),
                        rng.chance(1, 2), static_cast<std::uint32_t>(rng.uniform(0, ell + 1)),
                        static_cast<std::uint32_t>(rng.uniform(0, 2)));
  }
  return RandomCase{s, ProcessContext{is_root, deg, p}, static_cast<ChannelLabel>(rng.uniform(0, deg - 1)), m};
}

}  // namespace

TEST(ProtocolProperties, SaturationBoundsHoldAfterEveryHandler) {
  Rng rng(2024);
  for (int i = 0; i < 20000; ++i) {
    const auto c = random_case(rng);
    const auto& p = c.ctx.params;
    auto out = deliver(c.state, c.q, c.msg, c.ctx);
    out = local_actions(std::move(out.state), c.ctx, rng.chance(1, 2));
    const auto& s = out.state;
    EXPECT_LE(s.s_token, p.token_cap());
    EXPECT_LE(s.s_push, 2u);
    EXPECT_LE(s.s_prio, 2u);
    EXPECT_LE(s.rset.size(), p.k);
    EXPECT_LT(s.my_c, p.counter_modulus());
    EXPECT_LT(s.succ, c.ctx.degree);
    for (const auto& snd : out.sends) EXPECT_LT(snd.channel, c.ctx.degree);
  }
}

TEST(ProtocolProperties, CtrlSendsStayInDomain) {
  Rng rng(99);
  for (int i = 0; i < 20000; ++i) {
    const auto c = random_case(rng);
    const auto out = deliver(c.state, c.q, c.msg, c.ctx);
    for (const auto& snd : out.sends) {
      if (!snd.message.is(MessageKind::Ctrl)) continue;
      EXPECT_LE(snd.message.passed_tokens, c.ctx.params.token_cap());
      EXPECT_LE(snd.message.passed_prio, 2u);
      EXPECT_LT(snd.message.counter, c.ctx.params.counter_modulus());
    }
  }
}

TEST(ProtocolProperties, ResourceTokensAreConserved) {
  Rng rng(31);
  for (int i = 0; i < 20000; ++i) {
    auto c = random_case(rng);
    if (c.msg.is(MessageKind::Ctrl)) continue;
    c.state.reset = false;
    const std::size_t before = c.state.rset.size() + (c.msg.is(MessageKind::ResT) ? 1 : 0);
    auto out = deliver(c.state, c.q, c.msg, c.ctx);
    auto sent = count_res(out.sends);
    const auto local = local_actions(std::move(out.state), c.ctx, rng.chance(1, 2));
    sent += count_res(local.sends);
    EXPECT_EQ(before, sent + local.state.rset.size());
  }
}

TEST(ProtocolProperties, PusherAndPriorityAreForwardedOrHeld) {
  Rng rng(17);
  for (int i = 0; i < 20000; ++i) {
    auto c = random_case(rng);
    c.state.reset = false;
    if (c.msg.is(MessageKind::PushT)) {
      const auto out = handle_push_t(c.state, c.q, c.ctx);
      std::size_t pushers = 0;
      for (const auto& s : out.sends) pushers += s.message.is(MessageKind::PushT);
      EXPECT_EQ(pushers, 1u);
    } else if (c.msg.is(MessageKind::PrioT)) {
      const auto out = handle_prio_t(c.state, c.q, c.ctx);
      const std::size_t before = 1 + (c.state.prio ? 1 : 0);
      EXPECT_EQ(before, out.sends.size() + (out.state.prio ? 1 : 0));
    }
  }
}

TEST(ProtocolProperties, PriorityShieldKeepsReservations) {
  Rng rng(23);
  for (int i = 0; i < 5000; ++i) {
    auto c = random_case(rng);
    c.state.reset = false;
    c.state.state = CsState::Req;
    c.state.need = c.ctx.params.k;
    if (c.state.rset.size() >= c.state.need) c.state.rset.clear();
    c.state.prio = 0;
    const auto out = handle_push_t(c.state, c.q, c.ctx);
    EXPECT_EQ(labels(out.state.rset), labels(c.state.rset));
  }
}

TEST(ProtocolParamsTest, ValidatesAndDerivesDomains) {
  ProtocolParams p{4, 3, 5, 1};
  try {
    p.validate();
    FAIL() << "k > ell accepted";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("k must not exceed ell"), std::string::npos);
  }
  p = ProtocolParams{2, 3, 5, 1};
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.counter_modulus(), 2u * 4 * 2 + 1);
  EXPECT_EQ(p.token_cap(), 4u);
}
