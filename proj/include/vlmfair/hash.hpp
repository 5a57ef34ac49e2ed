#pragma once

#include <string>
#include <string_view>

namespace vlmfair {

/// Lower-case hex SHA-256 of the UTF-8 bytes of `text`; the id under which a
/// prompt's embedding is stored.
std::string sha256_hex(std::string_view text);

}  // namespace vlmfair
