#pragma once

#include <cstdint>
#include <string>

namespace attnlab {

/// SHA-256 of a byte string, returned as lowercase hex.
std::string sha256_hex(const std::string& data);

/// SHA-256 of a file's contents. Throws std::runtime_error if unreadable.
std::string sha256_file(const std::string& path);

} // namespace attnlab
