#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace morpheus {

inline constexpr std::uint32_t kBloomFilterBytes = 32;
inline constexpr std::uint32_t kBloomHashes = 4;

// Human-readable description of the probe derivation, echoed in reports.
inline constexpr std::string_view kBloomHashFamily =
    "double hashing over block number: h1=splitmix64(b), h2=murmur3_fmix64(b^0x9e3779b97f4a7c15)|1, "
    "probe_i=(h1+i*h2) mod bits";

// Plain (non-counting) Bloom filter over block numbers.
class BloomFilter {
 public:
  explicit BloomFilter(std::uint32_t bits = kBloomFilterBytes * 8, std::uint32_t hashes = kBloomHashes);

  void insert(std::uint64_t key);
  bool contains(std::uint64_t key) const;
  void clear();

  std::uint32_t bit_count() const { return bits_; }
  std::uint32_t hash_count() const { return hashes_; }
  std::uint32_t popcount() const;

 private:
  template <typename F>
  void for_each_probe(std::uint64_t key, F&& f) const;

  std::uint32_t bits_;
  std::uint32_t hashes_;
  std::vector<std::uint64_t> words_;
};

enum class Prediction { PredictHit, PredictMiss };

// BF1/BF2 pair for one extended set. BF1 answers predictions and always holds
// every resident block; BF2 collects the blocks used since the last swap and
// replaces BF1 once it has seen at least `assoc` distinct blocks.
class PredictorSet {
 public:
  explicit PredictorSet(std::uint32_t bits = kBloomFilterBytes * 8, std::uint32_t hashes = kBloomHashes);

  Prediction predict(std::uint64_t block) const;

  // Call on every insertion into and every reuse of a block in the tracked
  // set. `assoc` is the set's current associativity.
  void record_access(std::uint64_t block, std::uint32_t assoc);

  std::uint32_t recent_count() const { return n_; }
  std::uint64_t swaps() const { return swaps_; }
  const BloomFilter& bf1() const { return bf1_; }
  const BloomFilter& bf2() const { return bf2_; }

 private:
  BloomFilter bf1_;
  BloomFilter bf2_;
  std::uint32_t n_ = 0;
  std::uint64_t swaps_ = 0;
};

// Bloom storage for one partition: 2 filters x 32 B per extended set.
std::uint64_t storage_bytes(std::uint64_t sets_per_partition);

}  // namespace morpheus
