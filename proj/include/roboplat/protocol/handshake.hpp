#pragma once

#include <span>

#include "roboplat/protocol/messages.hpp"

namespace roboplat::protocol {

/// Membership proof for a test-message challenge: the challenge bytes in
/// reverse order. Throws ProtocolError for an empty or over-long challenge.
Bytes handshake_answer(std::span<const std::uint8_t> challenge);

/// True iff `answer` is the valid proof for `challenge`.
bool verify_handshake(std::span<const std::uint8_t> challenge, std::span<const std::uint8_t> answer);

}  // namespace roboplat::protocol
