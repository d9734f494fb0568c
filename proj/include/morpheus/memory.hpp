#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <unordered_map>

#include "morpheus/compression.hpp"
#include "morpheus/trace.hpp"

namespace morpheus {

// Initial contents of never-written DRAM blocks. Mixed picks, per block, one
// of: zeros, a +1 ramp (compresses High), a +1000 ramp (Low), random bytes.
enum class DataPattern { Zero, Ramp, Random, Mixed };

std::string_view data_pattern_name(DataPattern p);
std::optional<DataPattern> parse_data_pattern(std::string_view s);

// Functional DRAM image keyed by block number. Only written blocks are stored.
class BackingMemory {
 public:
  explicit BackingMemory(DataPattern pattern = DataPattern::Mixed, std::uint64_t seed = 1)
      : pattern_(pattern), seed_(seed) {}

  BlockBytes read(std::uint64_t block) const;
  void write(std::uint64_t block, const BlockBytes& data) { blocks_[block] = data; }
  std::size_t written_blocks() const { return blocks_.size(); }

  BlockBytes initial(std::uint64_t block) const;

 private:
  DataPattern pattern_;
  std::uint64_t seed_;
  std::unordered_map<std::uint64_t, BlockBytes> blocks_;
};

// Applies `r` to the block it targets. Returns the loaded value for reads and
// the old value for atomics (little-endian, first min(size, 8) bytes); writes
// return the stored value. Writes without an operand store the request id.
std::uint64_t perform(BlockBytes& data, const MemoryRequest& r);

}  // namespace morpheus
