#ifndef SENTINEL_DIGEST_HPP
#define SENTINEL_DIGEST_HPP

#include <string>
#include <string_view>

namespace sentinel {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

} // namespace sentinel

#endif // SENTINEL_DIGEST_HPP
