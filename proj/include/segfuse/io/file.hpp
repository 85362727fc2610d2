#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "segfuse/core.hpp"

namespace segfuse {

inline std::vector<uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    detail::require(in.good(), "cannot open '" + path.string() + "' for reading");
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    detail::require(!in.bad(), "read failed on '" + path.string() + "'");
    return bytes;
}

/// Write via a temp file plus rename, so readers never observe partial files
/// and a failing record leaves no output behind.
inline void write_file_atomic(const std::filesystem::path& path,
                              std::span<const uint8_t> bytes) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        detail::require(out.good(), "cannot open '" + tmp.string() + "' for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        out.flush();
        detail::require(out.good(), "write failed on '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        detail::fail("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " +
                     ec.message());
    }
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span<const uint8_t>(
                                reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

} // namespace segfuse
