#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace autofeedback {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// SHA-256 of a file's bytes. Throws InputError when unreadable.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace autofeedback
