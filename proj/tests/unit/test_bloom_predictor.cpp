#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "morpheus/bloom_predictor.hpp"
#include "morpheus/cache_core.hpp"
#include "morpheus/errors.hpp"

using namespace morpheus;

namespace {

// Drives a PredictorSet alongside an LRU set the way an extended set does:
// every access inserts or reuses, and eviction is global LRU.
struct CoSim {
  CacheSet set;
  PredictorSet pred;
  std::uint64_t false_negatives = 0;
  std::uint64_t false_positives = 0;
  std::uint64_t absent_queries = 0;

  CoSim(std::uint32_t assoc, std::uint32_t bits = 256, std::uint32_t hashes = 4)
      : set(assoc, TieBreak::OldestTouch), pred(bits, hashes) {}

  void step(std::uint64_t block) {
    const bool resident = set.find(block).has_value();
    const bool hit = pred.predict(block) == Prediction::PredictHit;
    if (resident && !hit) ++false_negatives;
    if (!resident) {
      ++absent_queries;
      if (hit) ++false_positives;
    }
    set.access(block, AccessKind::Read);
    pred.record_access(block, set.ways());
  }

  bool all_residents_predicted() const {
    for (std::uint32_t w = 0; w < set.ways(); ++w)
      if (set.meta(w).valid && pred.predict(set.meta(w).tag) != Prediction::PredictHit) return false;
    return true;
  }
};

std::vector<double> zipf_cdf(std::size_t n, double alpha) {
  std::vector<double> cdf(n);
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) cdf[i] = acc += std::pow(i + 1.0, -alpha);
  for (auto& c : cdf) c /= acc;
  return cdf;
}

}  // namespace

TEST_CASE("bloom filter basics") {
  BloomFilter f;
  CHECK(f.bit_count() == 256);
  CHECK(f.hash_count() == 4);
  for (std::uint64_t k = 0; k < 1000; ++k) CHECK_FALSE(f.contains(k));
  f.insert(42);
  CHECK(f.contains(42));
  CHECK(f.popcount() >= 1);
  CHECK(f.popcount() <= 4);
  f.clear();
  CHECK_FALSE(f.contains(42));
  CHECK(f.popcount() == 0);
  CHECK_THROWS_AS(BloomFilter(0, 4), ConfigError);
}

TEST_CASE("fresh predictor predicts miss; recorded block predicts hit") {
  PredictorSet p;
  CHECK(p.predict(7) == Prediction::PredictMiss);
  p.record_access(7, 32);
  CHECK(p.predict(7) == Prediction::PredictHit);
}

TEST_CASE("assoc=2: swap fires on the second distinct block") {
  PredictorSet p;
  p.record_access(100, 2);
  CHECK(p.swaps() == 0);
  CHECK(p.recent_count() == 1);
  p.record_access(200, 2);
  CHECK(p.swaps() == 1);
  CHECK(p.recent_count() == 0);
  CHECK(p.predict(100) == Prediction::PredictHit);
  CHECK(p.predict(200) == Prediction::PredictHit);
  CHECK(p.bf2().popcount() == 0);
}

TEST_CASE("repeated block increments n at most once between swaps") {
  PredictorSet p;
  const std::uint32_t assoc = 8;
  for (std::uint32_t i = 0; i < assoc + 5; ++i) p.record_access(5, assoc);
  CHECK(p.recent_count() == 1);
  CHECK(p.swaps() == 0);
}

TEST_CASE("predict is read-only") {
  PredictorSet p;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) p.record_access(rng() % 500, 16);
  std::vector<Prediction> first, second;
  for (std::uint64_t b = 0; b < 500; ++b) first.push_back(p.predict(b));
  for (std::uint64_t b = 0; b < 500; ++b) second.push_back(p.predict(b));
  CHECK(first == second);
}

TEST_CASE("no false negatives against a live LRU set") {
  std::mt19937_64 rng(2024);
  for (std::uint32_t assoc : {1u, 4u, 32u, 50u, 128u}) {
    CoSim sim(assoc);
    for (int i = 0; i < 100000; ++i) {
      // Mix of a hot working set and a cold scan to force many swaps.
      std::uint64_t b = rng() % 3 ? rng() % (assoc * 2) : rng() % 100000;
      sim.step(b);
    }
    CAPTURE(assoc);
    CHECK(sim.false_negatives == 0);
    CHECK(sim.all_residents_predicted());
    CHECK(sim.pred.swaps() > 0);
  }
}

TEST_CASE("swap safety: every resident is in BF1 right after each swap") {
  CoSim sim(32);
  std::mt19937_64 rng(8);
  std::uint64_t swaps_checked = 0;
  for (int i = 0; i < 50000; ++i) {
    auto before = sim.pred.swaps();
    sim.step(rng() % 200);
    if (sim.pred.swaps() != before) {
      ++swaps_checked;
      REQUIRE(sim.all_residents_predicted());
    }
  }
  CHECK(swaps_checked > 100);
}

TEST_CASE("tiny filters: undercounting n never causes false negatives") {
  // A 32-bit filter is saturated almost immediately, so BF2 membership
  // suppresses most increments and swaps are rare.
  for (std::uint32_t hashes : {1u, 2u, 4u}) {
    CoSim sim(16, 32, hashes);
    std::mt19937_64 rng(hashes);
    for (int i = 0; i < 100000; ++i) sim.step(rng() % 1000);
    CHECK(sim.false_negatives == 0);
  }
}

TEST_CASE("growing and shrinking associativity stays sound") {
  // Associativity is re-read on every access; residents never exceed it.
  std::mt19937_64 rng(77);
  PredictorSet pred;
  CacheSet set(64, TieBreak::OldestTouch);
  std::uint32_t assoc = 8;
  std::uint64_t fn = 0;
  for (int i = 0; i < 100000; ++i) {
    if (i % 997 == 0) {
      assoc = 4 + static_cast<std::uint32_t>(rng() % 60);
      while (set.occupancy() > assoc) set.invalidate(*set.lru_way());
    }
    std::uint64_t b = rng() % 300;
    if (set.find(b) && pred.predict(b) == Prediction::PredictMiss) ++fn;
    if (auto w = set.find(b)) {
      set.touch(*w);
    } else {
      if (set.occupancy() >= assoc) set.invalidate(*set.lru_way());
      set.install(set.victim_way(), b, false);
    }
    pred.record_access(b, assoc);
  }
  CHECK(fn == 0);
}

TEST_CASE("zipfian stream at assoc=32: false-positive rate below 15%") {
  const auto cdf = zipf_cdf(4096, 0.9);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0, 1);
  CoSim sim(32);
  for (int i = 0; i < 100000; ++i) {
    auto rank = static_cast<std::uint64_t>(std::upper_bound(cdf.begin(), cdf.end(), u(rng)) - cdf.begin());
    sim.step(rank * 2654435761u % 1000003);
  }
  const double fp = static_cast<double>(sim.false_positives) / static_cast<double>(sim.absent_queries);
  MESSAGE("false-positive rate " << fp);
  CHECK(sim.false_negatives == 0);
  CHECK(fp < 0.15);
}

TEST_CASE("storage bytes") {
  CHECK(storage_bytes(256) == 16384);
  CHECK(storage_bytes(1) == 64);
  CHECK(storage_bytes(48) == 3072);
}
