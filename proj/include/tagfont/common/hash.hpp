#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace tagfont {

// Lowercase hex SHA-1 of arbitrary bytes.
std::string sha1_hex(std::string_view bytes);

// Content hash in git's blob format: sha1("blob <len>\0" + bytes).
std::string git_blob_hash(std::string_view bytes);

// git_blob_hash of a file's contents; throws FormatError if unreadable.
std::string git_blob_hash_file(const std::string& path);

}  // namespace tagfont
