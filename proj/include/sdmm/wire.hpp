#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "sdmm/runtime.hpp"

namespace sdmm {

// Frame: 1-byte tag, 4-byte big-endian payload length, payload. Every integer
// and field element in a payload is a 4-byte big-endian word.
enum class MessageTag : std::uint8_t {
  Setup = 0x01,
  Query = 0x02,
  SubResult = 0x03,
  Error = 0x7F,
};

inline constexpr std::size_t kFrameHeader = 5;
inline constexpr std::uint32_t kMaxPayload = 1u << 28;

// scheme word (0 staircase, 1 ramp) followed by the share file encoding.
struct SetupMessage {
  Scheme scheme;
  std::uint32_t n;
  std::uint32_t k;
  std::uint32_t q;
  StaircaseShare share;
  bool operator==(const SetupMessage& o) const;
};

// request id, l, then l entries. l = 0 is rejected.
struct QueryMessage {
  std::uint32_t request_id;
  std::vector<Element> x;
  bool operator==(const QueryMessage&) const = default;
};

// worker, subshare index, request id, length, entries.
struct SubResultMessage {
  std::uint32_t worker;
  std::uint32_t index;
  std::uint32_t request_id;
  std::vector<Element> values;
  bool operator==(const SubResultMessage&) const = default;
};

enum class ErrorCode : std::uint32_t {
  Malformed = 1,
  FieldMismatch = 2,
  NotSetUp = 3,
  DimensionMismatch = 4,
};

struct ErrorMessage {
  std::uint32_t code;
  bool operator==(const ErrorMessage&) const = default;
};

using Message = std::variant<SetupMessage, QueryMessage, SubResultMessage, ErrorMessage>;

std::vector<std::uint8_t> encode_frame(const Message& m);

// Decodes exactly one complete frame; trailing bytes are an error.
Message decode_frame(std::span<const std::uint8_t> frame);

// Total frame size once the 5-byte header is available; validates tag and length.
std::optional<std::size_t> frame_size(std::span<const std::uint8_t> prefix);

}  // namespace sdmm
