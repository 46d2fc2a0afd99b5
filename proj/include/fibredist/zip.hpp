#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fibredist::zip {

using Entry = std::pair<std::string, std::string>;  // path, bytes

// Uncompressed (stored) archive with every timestamp set to 1980-01-01 00:00,
// so identical entries always give identical bytes.
std::string write(const std::vector<Entry>& entries);

// Reads archives produced by write (stored entries only); checks CRCs.
std::vector<Entry> read(std::string_view archive);

std::uint32_t crc32(std::string_view bytes);

}  // namespace fibredist::zip
