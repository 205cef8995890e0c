#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "roboplat/protocol/messages.hpp"

namespace roboplat::protocol {

// Frame layout (all integers big-endian):
//   'R' 'P' | version 0x01 | msg_type | payload_len u32 | payload | crc u16
// The CRC covers msg_type, payload_len and payload.
inline constexpr std::uint8_t kMagic0 = 0x52;
inline constexpr std::uint8_t kMagic1 = 0x50;
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kHeaderSize = 8;
inline constexpr std::size_t kCrcSize = 2;
inline constexpr std::size_t kFrameOverhead = kHeaderSize + kCrcSize;
inline constexpr std::uint32_t kMaxPayload = 65536;

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout.
std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data, std::uint16_t crc = 0xFFFF);

/// Serializes a message payload; throws ProtocolError on invariant violations.
Bytes encode_payload(const Message& msg);

/// Builds a complete frame. Throws ProtocolError on an invalid message or a
/// payload above kMaxPayload.
Bytes encode(const Message& msg);

/// Frames raw payload bytes under an arbitrary type code.
Bytes encode_raw(std::uint8_t msg_type, std::span<const std::uint8_t> payload);

enum class DecodeIssue { BadMagic, BadCrc, UnknownType, BadValue };

/// Parses a payload of the given type. Returns nullopt and sets `issue` on
/// unknown types or out-of-range values.
std::optional<Message> decode_payload(std::uint8_t msg_type, std::span<const std::uint8_t> payload,
                                      DecodeIssue* issue = nullptr);

struct DecoderStats {
    std::uint64_t frames_ok{0};
    std::uint64_t bad_magic_bytes{0};  // bytes skipped while searching for a frame start
    std::uint64_t bad_crc{0};
    std::uint64_t unknown_type{0};     // includes out-of-range field values
};

/// Incremental stream decoder. Feed arbitrary byte slices; complete messages
/// come out in stream order. After a corrupted frame the decoder advances one
/// byte and rescans for the magic.
class FrameDecoder {
public:
    void feed(std::span<const std::uint8_t> bytes);

    /// Next decoded message, or nullopt when more bytes are needed.
    std::optional<Message> next();

    const DecoderStats& stats() const { return stats_; }
    std::size_t buffered() const { return buffer_.size() - pos_; }

private:
    void compact();

    std::vector<std::uint8_t> buffer_;
    std::size_t pos_{0};
    DecoderStats stats_;
};

}  // namespace roboplat::protocol
