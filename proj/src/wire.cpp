#include "sdmm/wire.hpp"

#include <string>

#include "sdmm/bytes.hpp"

namespace sdmm {

bool SetupMessage::operator==(const SetupMessage& o) const {
  return scheme == o.scheme && n == o.n && k == o.k && q == o.q && share.worker == o.share.worker &&
         share.point == o.share.point && share.subshares == o.share.subshares;
}

namespace {

bool known_tag(std::uint8_t t) {
  return t == 0x01 || t == 0x02 || t == 0x03 || t == 0x7F;
}

std::vector<std::uint8_t> payload_of(const Message& m, MessageTag& tag) {
  ByteWriter w;
  if (const auto* s = std::get_if<SetupMessage>(&m)) {
    tag = MessageTag::Setup;
    w.u32(s->scheme == Scheme::Staircase ? 0 : 1);
    w.bytes(serialize_share(s->share, s->n, s->k, s->q));
  } else if (const auto* q = std::get_if<QueryMessage>(&m)) {
    tag = MessageTag::Query;
    if (q->x.empty()) throw WireError("QUERY with an empty vector");
    w.u32(q->request_id);
    w.u32(static_cast<std::uint32_t>(q->x.size()));
    for (Element e : q->x) w.u32(e);
  } else if (const auto* r = std::get_if<SubResultMessage>(&m)) {
    tag = MessageTag::SubResult;
    w.u32(r->worker);
    w.u32(r->index);
    w.u32(r->request_id);
    w.u32(static_cast<std::uint32_t>(r->values.size()));
    for (Element e : r->values) w.u32(e);
  } else {
    tag = MessageTag::Error;
    w.u32(std::get<ErrorMessage>(m).code);
  }
  return w.take();
}

std::vector<Element> read_elements(ByteReader& r) {
  const std::uint32_t len = r.u32();
  if (std::uint64_t{len} * 4 > r.remaining()) throw WireError("truncated element list");
  std::vector<Element> v(len);
  for (auto& e : v) e = r.u32();
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const Message& m) {
  MessageTag tag{};
  auto payload = payload_of(m, tag);
  if (payload.size() > kMaxPayload) throw WireError("payload too large");
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(tag));
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.bytes(payload);
  return w.take();
}

std::optional<std::size_t> frame_size(std::span<const std::uint8_t> prefix) {
  if (prefix.size() < kFrameHeader) return std::nullopt;
  if (!known_tag(prefix[0])) {
    throw WireError("unknown frame tag 0x" + std::to_string(static_cast<int>(prefix[0])));
  }
  ByteReader r(prefix.subspan(1, 4));
  const std::uint32_t len = r.u32();
  if (len > kMaxPayload) throw WireError("frame length " + std::to_string(len) + " too large");
  return kFrameHeader + len;
}

Message decode_frame(std::span<const std::uint8_t> frame) {
  auto size = frame_size(frame);
  if (!size) throw WireError("truncated frame header");
  if (frame.size() < *size) throw WireError("truncated frame");
  if (frame.size() > *size) throw WireError("trailing bytes after frame");
  const auto tag = static_cast<MessageTag>(frame[0]);
  ByteReader r(frame.subspan(kFrameHeader));

  Message out;
  switch (tag) {
    case MessageTag::Setup: {
      const std::uint32_t scheme = r.u32();
      if (scheme > 1) throw WireError("unknown scheme in SETUP");
      auto parsed = deserialize_share(r.rest());
      out = SetupMessage{scheme == 0 ? Scheme::Staircase : Scheme::Ramp, parsed.header.n,
                         parsed.header.k, parsed.header.q, std::move(parsed.share)};
      return out;
    }
    case MessageTag::Query: {
      QueryMessage q;
      q.request_id = r.u32();
      q.x = read_elements(r);
      if (q.x.empty()) throw WireError("QUERY with an empty vector");
      out = std::move(q);
      break;
    }
    case MessageTag::SubResult: {
      SubResultMessage s;
      s.worker = r.u32();
      s.index = r.u32();
      s.request_id = r.u32();
      s.values = read_elements(r);
      out = std::move(s);
      break;
    }
    case MessageTag::Error:
      out = ErrorMessage{r.u32()};
      break;
  }
  if (!r.done()) throw WireError("payload longer than its contents");
  return out;
}

}  // namespace sdmm
