#include <gtest/gtest.h>

#include <random>
#include <set>

#include "relay/core/codec.hpp"
#include "relay/core/seed.hpp"

using namespace relay;

namespace {

Json random_json(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> kind(0, depth > 0 ? 6 : 4);
  switch (kind(rng)) {
    case 0:
      return Json(nullptr);
    case 1:
      return Json(static_cast<bool>(rng() & 1));
    case 2:
      return Json(static_cast<std::int64_t>(rng()) >> (rng() % 60));
    case 3:
      return Json(std::uniform_real_distribution<double>(-1e6, 1e6)(rng));
    case 4: {
      std::string s(rng() % 20, 'a');
      for (auto& c : s) c = static_cast<char>('a' + rng() % 26);
      return Json(s);
    }
    case 5: {
      Json a = Json::array();
      for (int i = 0, n = static_cast<int>(rng() % 4); i < n; ++i) a.push_back(random_json(rng, depth - 1));
      return a;
    }
    default: {
      Json o = Json::object();
      for (int i = 0, n = static_cast<int>(rng() % 4); i < n; ++i)
        o["k" + std::to_string(rng() % 100)] = random_json(rng, depth - 1);
      return o;
    }
  }
}

Bytes random_bytes(std::mt19937_64& rng, std::size_t max_len) {
  Bytes b(rng() % (max_len + 1), '\0');
  for (auto& c : b) c = static_cast<char>(rng() & 0xff);
  return b;
}

Orchestrator random_orchestrator(std::mt19937_64& rng, std::uint64_t i) {
  Orchestrator o;
  o.task.task_id = "task-" + std::to_string(i);
  o.task.partition_id = static_cast<std::uint32_t>(rng() % 8);
  Json payload = Json::object();
  for (int k = 0, n = static_cast<int>(rng() % 5); k < n; ++k) payload["f" + std::to_string(k)] = random_json(rng, 3);
  o.task.payload = payload;
  o.control.kind = rng() & 1 ? ControlKind::sequential : ControlKind::branching;
  if (o.control.kind == ControlKind::sequential) {
    o.control.order = {"a", "b", "c"};
    o.control.index = static_cast<std::uint32_t>(rng() % 3);
  } else if (rng() & 1) {
    o.control.next_role_override = "role" + std::to_string(rng() % 5);
  }
  for (std::uint32_t t = 0, n = static_cast<std::uint32_t>(rng() % 6); t < n; ++t) {
    HistoryEntry e;
    e.author_role = "r" + std::to_string(rng() % 3);
    e.turn_index = t;
    if (rng() % 3 == 0) {
      e.declared_size_bytes = 513 + rng() % 4000;
      e.content = ContentSlot::offloaded(ObjectId{rng(), rng()}, e.declared_size_bytes);
    } else {
      auto b = random_bytes(rng, 700);
      e.declared_size_bytes = b.size();
      e.content = ContentSlot::inline_bytes(std::move(b));
    }
    e.token_count = rng() % 1000;
    o.history.push_back(std::move(e));
  }
  if (rng() % 4 == 0) {
    o.control.is_done = true;
    switch (rng() % 3) {
      case 0:
        o.outcome = TaskOutcome::success(rng() & 1 ? std::optional<double>(0.25 * (rng() % 5)) : std::nullopt);
        break;
      case 1:
        o.outcome = TaskOutcome::filtered("filter_by_en");
        break;
      default:
        o.outcome = TaskOutcome::failed("budget");
    }
    o.outcome->tokens_generated = history_total_tokens(o);
  }
  o.rng_seed = rng();
  o.rng_counter = rng() % 100;
  o.budget.max_turns = 1 + static_cast<std::uint32_t>(rng() % 100);
  o.budget.max_tokens = rng();
  return o;
}

HistoryEntry inline_entry(std::size_t n) {
  HistoryEntry e;
  e.author_role = "a";
  e.content = ContentSlot::inline_bytes(Bytes(n, 'x'));
  e.declared_size_bytes = n;
  return e;
}

}  // namespace

TEST(Seed, Splitmix64KnownValues) {
  // Reference outputs of the splitmix64 generator seeded with 0.
  std::uint64_t state = 0;
  auto next = [&] {
    const auto out = splitmix64(state);
    state += 0x9e3779b97f4a7c15ULL;
    return out;
  };
  EXPECT_EQ(next(), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(next(), 0x6e789e6aa1b965f4ULL);
  EXPECT_EQ(next(), 0x06c45d188009454fULL);
}

TEST(Seed, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(Seed, TaskSeedDependsOnRunAndId) {
  EXPECT_EQ(task_seed(1, "t0"), task_seed(1, "t0"));
  EXPECT_NE(task_seed(1, "t0"), task_seed(2, "t0"));
  EXPECT_NE(task_seed(1, "t0"), task_seed(1, "t1"));
}

TEST(Seed, BoundedStaysInRange) {
  for (std::uint64_t i = 0; i < 10000; ++i) EXPECT_LT(bounded(splitmix64(i), 7), 7u);
  EXPECT_EQ(bounded(UINT64_MAX, 4), 3u);
  EXPECT_EQ(bounded(0, 4), 0u);
}

TEST(Seed, UnitIntervalMean) {
  double sum = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = unit_interval(splitmix64(static_cast<std::uint64_t>(i)));
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.005);
}

TEST(Codec, EmptyHistoryRoundtrip) {
  Orchestrator o;
  o.task.task_id = "t0";
  o.control.order = {"A"};
  const auto b = serialize_orchestrator(o);
  EXPECT_EQ(deserialize_orchestrator(b), o);
}

TEST(Codec, OffloadedSlotPreservesIdAndSize) {
  Orchestrator o;
  o.task.task_id = "t1";
  HistoryEntry e;
  e.author_role = "A";
  e.content = ContentSlot::offloaded(ObjectId{0x0123456789abcdefULL, 0xfedcba9876543210ULL}, 600);
  e.declared_size_bytes = 600;
  o.history.push_back(e);
  const auto back = deserialize_orchestrator(serialize_orchestrator(o));
  ASSERT_EQ(back.history.size(), 1u);
  ASSERT_FALSE(back.history[0].content.is_inline());
  EXPECT_EQ(back.history[0].content.ref().object_id, e.content.ref().object_id);
  EXPECT_EQ(back.history[0].content.ref().size_bytes, 600u);
}

TEST(Codec, ThousandRandomOrchestratorsRoundtrip) {
  std::mt19937_64 rng(12345);
  std::vector<Orchestrator> originals;
  std::vector<Bytes> encoded;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    originals.push_back(random_orchestrator(rng, i));
    encoded.push_back(serialize_orchestrator(originals.back()));
  }
  for (std::size_t i = 0; i < originals.size(); ++i) {
    const auto back = deserialize_orchestrator(encoded[i]);
    ASSERT_EQ(back, originals[i]) << "orchestrator " << i;
    ASSERT_EQ(serialize_orchestrator(back), encoded[i]) << "re-encoding differs for " << i;
  }
}

TEST(Codec, EncodingIsDeterministic) {
  std::mt19937_64 a(9), b(9);
  for (int i = 0; i < 50; ++i)
    EXPECT_EQ(serialize_orchestrator(random_orchestrator(a, i)), serialize_orchestrator(random_orchestrator(b, i)));
}

TEST(Codec, NonFinitePayloadIsEncodingFailure) {
  Orchestrator o;
  o.task.task_id = "bad";
  o.task.payload = {{"x", std::numeric_limits<double>::infinity()}};
  try {
    serialize_orchestrator(o);
    FAIL() << "expected EncodingFailure";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::encoding_failure);
  }
}

TEST(Codec, NonFiniteScoreIsEncodingFailure) {
  Orchestrator o;
  o.task.task_id = "bad";
  o.outcome = TaskOutcome::success(std::nan(""));
  EXPECT_THROW(serialize_orchestrator(o), Error);
}

TEST(Codec, GarbageBytesAreEncodingFailure) {
  try {
    deserialize_orchestrator(std::string("\xff\x00\x13garbage", 10));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::encoding_failure);
  }
}

TEST(Model, HistoryTotalBytes) {
  Orchestrator o;
  EXPECT_EQ(history_total_bytes(o), 0u);
  for (std::size_t n : {100, 600, 12}) o.history.push_back(inline_entry(n));
  EXPECT_EQ(history_total_bytes(o), 712u);
  o.history[1].content = ContentSlot::offloaded(ObjectId{1, 2}, 600);
  EXPECT_EQ(history_total_bytes(o), 712u);
}

TEST(Model, AgentIdOrderingAndString) {
  AgentId a{"a", 1}, b{"a", 2}, c{"b", 0};
  EXPECT_LT(a, b);
  EXPECT_LT(b, c);
  EXPECT_EQ(a.str(), "a/1");
}

TEST(Model, ObjectIdHexIs32Chars) {
  EXPECT_EQ((ObjectId{1, 255}.hex()), "000000000000000100000000000000ff");
}
