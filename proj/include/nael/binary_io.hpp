#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "nael/error.hpp"

namespace nael::io {

// Little-endian writer independent of host byte order.
class ByteWriter {
public:
    explicit ByteWriter(std::ostream& out) : out_(out) {}

    void bytes(std::string_view s) { out_.write(s.data(), static_cast<std::streamsize>(s.size())); }
    void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
    void u16(std::uint16_t v) { put_le(v, 2); }
    void u32(std::uint32_t v) { put_le(v, 4); }
    void u64(std::uint64_t v) { put_le(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    void check(const std::string& what) const
    {
        if (!out_) throw Error("write failed: " + what);
    }

private:
    void put_le(std::uint64_t v, int n)
    {
        for (int i = 0; i < n; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    std::ostream& out_;
};

// Little-endian reader that reports the byte offset of malformed input.
class ByteReader {
public:
    explicit ByteReader(std::istream& in) : in_(in) {}

    std::size_t offset() const noexcept { return offset_; }

    std::string bytes(std::size_t n, const char* what)
    {
        std::string s(n, '\0');
        in_.read(s.data(), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError(std::string("truncated ") + what, offset_);
        offset_ += n;
        return s;
    }
    std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(get_le(1, what)); }
    std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(get_le(2, what)); }
    std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(get_le(4, what)); }
    std::uint64_t u64(const char* what) { return get_le(8, what); }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

    bool at_end()
    {
        return in_.peek() == std::char_traits<char>::eof();
    }

private:
    std::uint64_t get_le(int n, const char* what)
    {
        unsigned char buf[8];
        in_.read(reinterpret_cast<char*>(buf), n);
        if (in_.gcount() != n) throw FormatError(std::string("truncated ") + what, offset_);
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
        offset_ += static_cast<std::size_t>(n);
        return v;
    }
    std::istream& in_;
    std::size_t offset_ = 0;
};

}  // namespace nael::io
