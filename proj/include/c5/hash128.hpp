#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace c5 {

/// 128-bit digest. Ordered by (hi, lo) so sorted key files compare the
/// same way as the big-endian byte encoding.
struct Hash128 {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;

    auto operator<=>(const Hash128 &) const = default;

    [[nodiscard]] std::string hex() const;
};

/// MurmurHash3 x64 128-bit variant.
Hash128 murmur3_128(std::string_view data, std::uint64_t seed = 0);

struct Hash128Hasher {
    std::size_t operator()(const Hash128 &h) const noexcept {
        return static_cast<std::size_t>(h.lo ^ (h.hi * 0x9E3779B97F4A7C15ULL));
    }
};

}  // namespace c5
