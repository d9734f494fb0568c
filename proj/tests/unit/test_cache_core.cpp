#include <doctest.h>

#include <algorithm>
#include <list>
#include <random>
#include <set>
#include <vector>

#include "morpheus/cache_core.hpp"
#include "morpheus/errors.hpp"

using namespace morpheus;

namespace {

// Order-of-use list LRU, one list per set; front is most recent.
class ListLru {
 public:
  ListLru(std::uint64_t sets, std::uint32_t ways) : sets_(sets), ways_(ways) {}

  struct Result {
    bool hit;
    std::optional<std::uint64_t> victim;
  };

  Result access(std::uint64_t block) {
    auto& l = sets_[block % sets_.size()];
    auto it = std::find(l.begin(), l.end(), block);
    if (it != l.end()) {
      l.erase(it);
      l.push_front(block);
      return {true, std::nullopt};
    }
    std::optional<std::uint64_t> victim;
    if (l.size() == ways_) {
      victim = l.back();
      l.pop_back();
    }
    l.push_front(block);
    return {false, victim};
  }

 private:
  std::vector<std::list<std::uint64_t>> sets_;
  std::uint32_t ways_;
};

CacheGeometry geom(std::uint64_t sets, std::uint32_t ways) {
  return CacheGeometry{sets * ways * 128, ways, 128};
}

}  // namespace

TEST_CASE("geometry") {
  CacheGeometry g;
  CHECK(g.set_count() == 2560);
  CHECK_NOTHROW(g.validate());
  CHECK_THROWS_AS((CacheGeometry{1000, 16, 128}.validate()), ConfigError);
  CHECK_THROWS_AS((CacheGeometry{4096, 0, 128}.validate()), ConfigError);
}

TEST_CASE("2-way set: third block evicts the first") {
  Cache c(geom(1, 2));
  CHECK_FALSE(c.access(0 * 128, AccessKind::Read).hit);
  CHECK_FALSE(c.access(1 * 128, AccessKind::Read).hit);
  auto r = c.access(2 * 128, AccessKind::Read);
  CHECK_FALSE(r.hit);
  REQUIRE(r.victim);
  CHECK(r.victim->block_address == 0);
  CHECK_FALSE(r.victim->dirty);
}

TEST_CASE("re-reference hits and resets the counter") {
  Cache c(geom(1, 4));
  c.access(0, AccessKind::Read);
  c.access(128, AccessKind::Read);
  auto r = c.access(0, AccessKind::Read);
  CHECK(r.hit);
  CHECK(c.set(0).meta(r.way).lru_counter == kLruMax);
  auto other = c.set(0).find(1);
  REQUIRE(other);
  CHECK(c.set(0).meta(*other).lru_counter == kLruMax - 1);
}

TEST_CASE("peek") {
  Cache c(geom(1, 1));
  CHECK_FALSE(c.peek(0).present);
  c.access(0, AccessKind::Write);
  CHECK(c.peek(0).present);
  CHECK(c.peek(0).dirty);
  auto r = c.access(128, AccessKind::Read);
  CHECK_FALSE(c.peek(0).present);
  REQUIRE(r.victim);
  CHECK(r.victim->dirty);
}

TEST_CASE("counters saturate at zero and ties fall to the lowest way") {
  CacheSet s(3);
  s.access(10, AccessKind::Read);
  s.access(11, AccessKind::Read);
  for (int i = 0; i < 5000; ++i) s.access(12, AccessKind::Read);
  CHECK(s.meta(0).lru_counter == 0);
  CHECK(s.meta(1).lru_counter == 0);
  auto r = s.access(13, AccessKind::Read);
  REQUIRE(r.victim);
  CHECK(r.victim->block_address == 10);
}

TEST_CASE("OldestTouch breaks saturated ties by recency") {
  CacheSet s(3, TieBreak::OldestTouch);
  s.access(10, AccessKind::Read);
  s.access(11, AccessKind::Read);
  s.force(0, CacheBlockMeta{10, true, false, 0});
  s.force(1, CacheBlockMeta{11, true, false, 0});
  s.access(12, AccessKind::Read);
  s.access(13, AccessKind::Read);
  // 10 was touched before 11, so it goes first even though both read 0.
  CHECK_FALSE(s.find(10));
  CHECK(s.find(11));
}

TEST_CASE("random stream matches a list-based LRU oracle") {
  const std::uint64_t sets = 16;
  const std::uint32_t ways = 8;
  Cache c(geom(sets, ways));
  ListLru oracle(sets, ways);
  std::mt19937_64 rng(3);
  std::uint64_t mismatches = 0;
  for (int i = 0; i < 100000; ++i) {
    std::uint64_t block = rng() % (sets * 16);
    auto kind = rng() % 4 == 0 ? AccessKind::Write : AccessKind::Read;
    auto got = c.access(block * 128, kind);
    auto want = oracle.access(block);
    if (got.hit != want.hit) ++mismatches;
    if (got.victim.has_value() != want.victim.has_value() ||
        (got.victim && got.victim->block_address != *want.victim * 128))
      ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("dirty writebacks are conserved") {
  Cache c(geom(4, 2));
  std::mt19937_64 rng(5);
  std::set<std::uint64_t> dirty;
  std::uint64_t reported = 0, expected = 0;
  for (int i = 0; i < 20000; ++i) {
    std::uint64_t a = (rng() % 64) * 128;
    bool w = rng() % 3 == 0;
    auto r = c.access(a, w ? AccessKind::Write : AccessKind::Read);
    if (r.victim) {
      if (r.victim->dirty) {
        ++reported;
        CHECK(dirty.erase(r.victim->block_address) == 1);
      } else {
        CHECK(dirty.count(r.victim->block_address) == 0);
      }
    }
    if (w) dirty.insert(a);
  }
  for (std::uint64_t set = 0; set < 4; ++set)
    for (std::uint32_t w = 0; w < 2; ++w) {
      const auto& m = c.set(set).meta(w);
      if (m.valid && m.dirty) ++expected;
      CHECK((m.valid || !m.dirty));
    }
  CHECK(dirty.size() == expected);
  CHECK(reported > 0);
}

TEST_CASE("occupancy bounded and tags unique") {
  CacheSet s(4);
  std::mt19937_64 rng(9);
  for (int i = 0; i < 5000; ++i) {
    s.access(rng() % 12, AccessKind::Read);
    CHECK(s.occupancy() <= 4);
    std::set<std::uint64_t> tags;
    for (std::uint32_t w = 0; w < s.ways(); ++w)
      if (s.meta(w).valid) CHECK(tags.insert(s.meta(w).tag).second);
  }
}

TEST_CASE("resize_ways") {
  SUBCASE("shrink evicts the lowest counters") {
    CacheSet s(4);
    for (std::uint64_t b : {1, 2, 3, 4}) s.access(b, AccessKind::Read);
    s.access(1, AccessKind::Write);
    auto ev = s.resize_ways(2);
    REQUIRE(ev.size() == 2);
    std::set<std::uint64_t> gone{ev[0].block_address, ev[1].block_address};
    CHECK(gone == std::set<std::uint64_t>{2, 3});
    CHECK(s.ways() == 2);
    CHECK(s.find(1));
    CHECK(s.find(4));
  }
  SUBCASE("same size is a no-op") {
    CacheSet s(4);
    s.access(1, AccessKind::Read);
    CHECK(s.resize_ways(4).empty());
    CHECK(s.find(1));
  }
  SUBCASE("random fill then shrink keeps the top-k counters") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
      CacheSet s(16);
      for (int i = 0; i < 40; ++i) s.access(rng() % 24, AccessKind::Read);
      std::vector<std::pair<std::uint16_t, std::uint64_t>> by_counter;
      for (std::uint32_t w = 0; w < 16; ++w)
        if (s.meta(w).valid) by_counter.emplace_back(s.meta(w).lru_counter, s.meta(w).tag);
      std::sort(by_counter.rbegin(), by_counter.rend());
      const std::uint32_t k = 1 + rng() % 15;
      s.resize_ways(k);
      std::set<std::uint64_t> want, got;
      for (std::size_t i = 0; i < std::min<std::size_t>(k, by_counter.size()); ++i) want.insert(by_counter[i].second);
      for (std::uint32_t w = 0; w < s.ways(); ++w)
        if (s.meta(w).valid) got.insert(s.meta(w).tag);
      CHECK(got == want);
    }
  }
  SUBCASE("cache-level resize reports byte addresses") {
    Cache c(geom(2, 2));
    c.access(0 * 128, AccessKind::Write);
    c.access(2 * 128, AccessKind::Read);
    auto ev = c.resize_ways(0, 1);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0] == Evicted{0, true});
  }
}
