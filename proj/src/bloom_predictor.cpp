#include "morpheus/bloom_predictor.hpp"

#include <bit>
#include <utility>

#include "morpheus/errors.hpp"

namespace morpheus {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t fmix64(std::uint64_t k) {
  k ^= k >> 33;
  k *= 0xff51afd7ed558ccdull;
  k ^= k >> 33;
  k *= 0xc4ceb9fe1a85ec53ull;
  k ^= k >> 33;
  return k;
}

}  // namespace

BloomFilter::BloomFilter(std::uint32_t bits, std::uint32_t hashes)
    : bits_(bits), hashes_(hashes), words_((bits + 63) / 64, 0) {
  if (bits == 0 || hashes == 0) throw ConfigError("Bloom filter needs at least one bit and one hash");
}

template <typename F>
void BloomFilter::for_each_probe(std::uint64_t key, F&& f) const {
  std::uint64_t h1 = splitmix64(key);
  std::uint64_t h2 = fmix64(key ^ 0x9e3779b97f4a7c15ull) | 1;
  for (std::uint32_t i = 0; i < hashes_; ++i) f(static_cast<std::uint32_t>((h1 + i * h2) % bits_));
}

void BloomFilter::insert(std::uint64_t key) {
  for_each_probe(key, [&](std::uint32_t bit) { words_[bit / 64] |= 1ull << (bit % 64); });
}

bool BloomFilter::contains(std::uint64_t key) const {
  bool all = true;
  for_each_probe(key, [&](std::uint32_t bit) { all = all && (words_[bit / 64] >> (bit % 64) & 1); });
  return all;
}

void BloomFilter::clear() {
  for (auto& w : words_) w = 0;
}

std::uint32_t BloomFilter::popcount() const {
  std::uint32_t n = 0;
  for (auto w : words_) n += static_cast<std::uint32_t>(std::popcount(w));
  return n;
}

PredictorSet::PredictorSet(std::uint32_t bits, std::uint32_t hashes) : bf1_(bits, hashes), bf2_(bits, hashes) {}

Prediction PredictorSet::predict(std::uint64_t block) const {
  return bf1_.contains(block) ? Prediction::PredictHit : Prediction::PredictMiss;
}

void PredictorSet::record_access(std::uint64_t block, std::uint32_t assoc) {
  // A BF2 false positive suppresses the increment; that only delays the swap.
  bool seen = bf2_.contains(block);
  bf1_.insert(block);
  bf2_.insert(block);
  if (!seen) ++n_;
  if (n_ >= assoc) {
    bf1_.clear();
    std::swap(bf1_, bf2_);
    n_ = 0;
    ++swaps_;
  }
}

std::uint64_t storage_bytes(std::uint64_t sets_per_partition) {
  return std::uint64_t{kBloomFilterBytes} * 2 * sets_per_partition;
}

}  // namespace morpheus
