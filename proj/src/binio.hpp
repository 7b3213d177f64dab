#pragma once

// Little-endian binary writers/readers shared by the ECNN/ECIX/ECDS formats.
// Readers bound-check every access and throw FormatError on truncation.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "ecinn/common.hpp"

namespace ecinn::binio {

struct Writer {
    std::string bytes;

    void put_raw(const void* p, size_t n) { bytes.append(static_cast<const char*>(p), n); }
    void put_u8(uint8_t v) { bytes.push_back(static_cast<char>(v)); }
    void put_u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) put_u8(static_cast<uint8_t>(v >> (8 * i)));
    }
    void put_u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) put_u8(static_cast<uint8_t>(v >> (8 * i)));
    }
    void put_f32(float v) { put_u32(std::bit_cast<uint32_t>(v)); }
    void put_magic(const char m[4]) { put_raw(m, 4); }
};

struct Reader {
    std::string_view bytes;
    size_t pos = 0;
    std::string what;  // format name for error messages

    explicit Reader(std::string_view b, std::string name) : bytes(b), what(std::move(name)) {}

    void need(size_t n) const {
        if (pos + n > bytes.size())
            throw FormatError(what + ": truncated file (need " + std::to_string(n) +
                              " bytes at offset " + std::to_string(pos) + ")");
    }
    uint8_t get_u8() {
        need(1);
        return static_cast<uint8_t>(bytes[pos++]);
    }
    uint32_t get_u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(bytes[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t get_u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(bytes[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    float get_f32() { return std::bit_cast<float>(get_u32()); }
    void expect_magic(const char m[4]) {
        need(4);
        if (std::memcmp(bytes.data() + pos, m, 4) != 0)
            throw FormatError(what + ": bad magic bytes");
        pos += 4;
    }
    bool at_end() const { return pos == bytes.size(); }
    void expect_end() const {
        if (!at_end()) throw FormatError(what + ": trailing bytes after payload");
    }
};

// Whole-file helpers.
std::string read_file(const std::string& path, const std::string& what);
void write_file(const std::string& path, std::string_view bytes, const std::string& what);

}  // namespace ecinn::binio
