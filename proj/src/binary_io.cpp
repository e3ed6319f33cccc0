#include "mebm/binary_io.hpp"

#include "mebm/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace mebm::io {

void ByteWriter::u16(std::uint16_t v) {
    buf_.push_back(static_cast<std::uint8_t>(v));
    buf_.push_back(static_cast<std::uint8_t>(v >> 8));
}

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::magic(std::string_view tag) { buf_.insert(buf_.end(), tag.begin(), tag.end()); }

void ByteWriter::str(std::string_view s) {
    u64(s.size());
    buf_.insert(buf_.end(), s.begin(), s.end());
}

void ByteWriter::f64_array(std::span<const double> values) {
    u64(values.size());
    for (double v : values) f64(v);
}

void ByteWriter::bytes(std::span<const std::uint8_t> data) {
    buf_.insert(buf_.end(), data.begin(), data.end());
}

void ByteWriter::save(const std::filesystem::path& path) const { write_file(path, buf_); }

ByteReader ByteReader::load(const std::filesystem::path& path) { return ByteReader(read_file(path)); }

void ByteReader::need(std::size_t n, std::string_view what) const {
    if (data_.size() - pos_ < n) {
        throw DataError("truncated input while reading " + std::string(what) + " (need " +
                        std::to_string(n) + " bytes, have " + std::to_string(data_.size() - pos_) +
                        ")");
    }
}

std::uint8_t ByteReader::u8(std::string_view what) {
    need(1, what);
    return data_[pos_++];
}

std::uint16_t ByteReader::u16(std::string_view what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
}

std::uint32_t ByteReader::u32(std::string_view what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::u64(std::string_view what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

double ByteReader::f64(std::string_view what) { return std::bit_cast<double>(u64(what)); }

void ByteReader::expect_magic(std::string_view tag) {
    need(tag.size(), "magic");
    if (std::memcmp(data_.data() + pos_, tag.data(), tag.size()) != 0) {
        throw DataError("bad magic: expected \"" + std::string(tag) + "\"");
    }
    pos_ += tag.size();
}

std::string ByteReader::str(std::string_view what) {
    const std::uint64_t n = u64(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
}

std::vector<double> ByteReader::f64_array(std::string_view what) {
    const std::uint64_t n = u64(what);
    if (n > remaining() / 8) need(n * 8, what);
    std::vector<double> v(n);
    for (auto& x : v) x = f64(what);
    return v;
}

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n, std::string_view what) {
    need(n, what);
    std::span<const std::uint8_t> s(data_.data() + pos_, n);
    pos_ += n;
    return s;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw DataError("short write to " + path.string());
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

}  // namespace mebm::io
