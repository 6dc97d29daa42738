#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace drglm {

// FNV-1a 64-bit; used for input/content digests in manifests and plan JSON.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64_file(const std::string& path);
std::string to_hex(std::uint64_t v);

} // namespace drglm
