#pragma once

// Little-endian byte streams shared by every on-disk format.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mebm::io {

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64(double v);
    void magic(std::string_view tag);
    // u64 length prefix, then bytes.
    void str(std::string_view s);
    // u64 count, then f64 values.
    void f64_array(std::span<const double> values);
    void bytes(std::span<const std::uint8_t> data);

    const std::vector<std::uint8_t>& buffer() const { return buf_; }
    void save(const std::filesystem::path& path) const;

private:
    std::vector<std::uint8_t> buf_;
};

// Reads from an owned buffer; every underrun throws DataError naming `what`.
class ByteReader {
public:
    explicit ByteReader(std::vector<std::uint8_t> data) : data_(std::move(data)) {}
    static ByteReader load(const std::filesystem::path& path);

    std::uint8_t u8(std::string_view what);
    std::uint16_t u16(std::string_view what);
    std::uint32_t u32(std::string_view what);
    std::uint64_t u64(std::string_view what);
    double f64(std::string_view what);
    void expect_magic(std::string_view tag);
    std::string str(std::string_view what);
    std::vector<double> f64_array(std::string_view what);
    std::span<const std::uint8_t> bytes(std::size_t n, std::string_view what);

    std::size_t remaining() const { return data_.size() - pos_; }
    bool at_end() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n, std::string_view what) const;

    std::vector<std::uint8_t> data_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace mebm::io
