#include "fibredist/zip.hpp"

#include <cstdint>
#include <cstring>

#include <zlib.h>

#include "fibredist/common.hpp"

namespace fibredist::zip {

namespace {

constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;  // 1980-01-01
constexpr std::uint16_t kDosTime = 0;
constexpr std::uint16_t kVersion = 20;

void put16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get(std::string_view in, std::size_t at, int bytes) {
    if (at + static_cast<std::size_t>(bytes) > in.size()) throw Error(ErrorCode::io_error, "truncated zip archive");
    std::uint32_t v = 0;
    for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)]);
    return v;
}

}  // namespace

std::uint32_t crc32(std::string_view bytes) {
    uLong c = ::crc32(0L, Z_NULL, 0);
    return static_cast<std::uint32_t>(
        ::crc32(c, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

std::string write(const std::vector<Entry>& entries) {
    std::string out, central;
    for (const auto& [path, data] : entries) {
        if (data.size() > 0xffffffffu || path.size() > 0xffff) {
            throw Error(ErrorCode::invalid_argument, "zip entry too large: " + path);
        }
        const auto offset = static_cast<std::uint32_t>(out.size());
        const std::uint32_t crc = crc32(data);
        const auto size = static_cast<std::uint32_t>(data.size());
        put32(out, 0x04034b50);
        put16(out, kVersion);
        put16(out, 0x0800);  // UTF-8 names
        put16(out, 0);       // stored
        put16(out, kDosTime);
        put16(out, kDosDate);
        put32(out, crc);
        put32(out, size);
        put32(out, size);
        put16(out, static_cast<std::uint16_t>(path.size()));
        put16(out, 0);
        out += path;
        out += data;

        put32(central, 0x02014b50);
        put16(central, kVersion);
        put16(central, kVersion);
        put16(central, 0x0800);
        put16(central, 0);
        put16(central, kDosTime);
        put16(central, kDosDate);
        put32(central, crc);
        put32(central, size);
        put32(central, size);
        put16(central, static_cast<std::uint16_t>(path.size()));
        put16(central, 0);
        put16(central, 0);
        put16(central, 0);
        put16(central, 0);
        put32(central, 0);
        put32(central, offset);
        central += path;
    }
    const auto central_offset = static_cast<std::uint32_t>(out.size());
    out += central;
    put32(out, 0x06054b50);
    put16(out, 0);
    put16(out, 0);
    put16(out, static_cast<std::uint16_t>(entries.size()));
    put16(out, static_cast<std::uint16_t>(entries.size()));
    put32(out, static_cast<std::uint32_t>(central.size()));
    put32(out, central_offset);
    put16(out, 0);
    return out;
}

std::vector<Entry> read(std::string_view archive) {
    if (archive.size() < 22) throw Error(ErrorCode::io_error, "not a zip archive");
    std::size_t eocd = archive.size() - 22;
    while (get(archive, eocd, 4) != 0x06054b50) {
        if (eocd == 0) throw Error(ErrorCode::io_error, "zip end-of-directory record not found");
        --eocd;
    }
    const std::uint32_t count = get(archive, eocd + 10, 2);
    std::size_t at = get(archive, eocd + 16, 4);
    std::vector<Entry> entries;
    for (std::uint32_t e = 0; e < count; ++e) {
        if (get(archive, at, 4) != 0x02014b50) throw Error(ErrorCode::io_error, "corrupt zip central directory");
        const std::uint32_t method = get(archive, at + 10, 2);
        const std::uint32_t crc = get(archive, at + 16, 4);
        const std::uint32_t size = get(archive, at + 20, 4);
        const std::uint32_t name_len = get(archive, at + 28, 2);
        const std::uint32_t extra_len = get(archive, at + 30, 2);
        const std::uint32_t comment_len = get(archive, at + 32, 2);
        const std::uint32_t local = get(archive, at + 42, 4);
        std::string name(archive.substr(at + 46, name_len));
        if (method != 0) throw Error(ErrorCode::io_error, "compressed zip entries are not supported: " + name);
        const std::uint32_t local_name = get(archive, local + 26, 2);
        const std::uint32_t local_extra = get(archive, local + 28, 2);
        const std::size_t data_at = local + 30 + local_name + local_extra;
        if (data_at + size > archive.size()) throw Error(ErrorCode::io_error, "truncated zip entry: " + name);
        std::string data(archive.substr(data_at, size));
        if (crc32(data) != crc) throw Error(ErrorCode::io_error, "CRC mismatch in zip entry: " + name);
        entries.emplace_back(std::move(name), std::move(data));
        at += 46 + name_len + extra_len + comment_len;
    }
    return entries;
}

}  // namespace fibredist::zip
