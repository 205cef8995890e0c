#include "roboplat/protocol/handshake.hpp"

#include <algorithm>

namespace roboplat::protocol {

Bytes handshake_answer(std::span<const std::uint8_t> challenge) {
    if (challenge.empty()) throw ProtocolError("EmptyChallenge");
    if (challenge.size() > kMaxChallenge) throw ProtocolError("challenge longer than 64 bytes");
    return Bytes(challenge.rbegin(), challenge.rend());
}

bool verify_handshake(std::span<const std::uint8_t> challenge, std::span<const std::uint8_t> answer) {
    if (challenge.empty() || challenge.size() > kMaxChallenge) return false;
    if (answer.size() != challenge.size()) return false;
    return std::equal(challenge.rbegin(), challenge.rend(), answer.begin());
}

}  // namespace roboplat::protocol
