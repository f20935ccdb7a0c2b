#include "twomem/digest.hpp"

#include <openssl/sha.h>

#include <fmt/format.h>

#include "twomem/errors.hpp"

namespace twomem {

NonFiniteError::NonFiniteError(double t, std::array<double, 6> state)
    : Error(fmt::format("non-finite state at t = {} s: ({}, {}, {}, {}, {}, {})", t, state[0], state[1],
                        state[2], state[3], state[4], state[5])),
      time_(t),
      state_(state) {}

Sha256 sha256(std::span<const std::uint8_t> bytes) {
    Sha256 out{};
    SHA256(bytes.data(), bytes.size(), out.data());
    return out;
}

Sha256 sha256(std::string_view text) {
    return sha256(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string to_hex(const Sha256& digest) {
    std::string out;
    out.reserve(64);
    for (auto byte : digest) out += fmt::format("{:02x}", byte);
    return out;
}

}  // namespace twomem
