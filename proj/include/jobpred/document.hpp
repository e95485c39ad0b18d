#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace jobpred {

inline constexpr std::size_t kMaxLen = 1200;
inline constexpr std::size_t kEmbedDim = 300;
inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kUnknownId = 1;

/// Fixed-length model input: vocabulary ids right-padded with kPadId.
struct EncodedDocument {
  std::vector<std::size_t> indices;
  std::size_t true_length = 0;
  std::optional<std::size_t> label_id;
  std::uint64_t vocabulary_hash = 0;

  std::size_t max_len() const { return indices.size(); }
};

}  // namespace jobpred
