#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace nss::store {

class StoreError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Payload does not match its recorded checksum or length.
class ChecksumError : public StoreError {
public:
    using StoreError::StoreError;
};

/// Written by a newer schema than this build understands.
class SchemaError : public StoreError {
public:
    using StoreError::StoreError;
};

/// The filesystem refused a read or write.
class StoreIoError : public StoreError {
public:
    using StoreError::StoreError;
};

/// Compact JSON with object keys sorted and doubles printed with 17
/// significant digits, so equal documents always produce equal bytes.
std::string canonical_dump(const nlohmann::json& value);

std::string sha256_hex(std::string_view bytes);

/// Writes to a temporary sibling, fsyncs, renames over `path` and fsyncs the
/// directory.
void atomic_write_file(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);
void fsync_directory(const std::filesystem::path& dir);

}  // namespace nss::store
