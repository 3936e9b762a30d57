#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hafno/core/tensor.hpp"

namespace hafno {

/// Sorted key=value text, one pair per line. Used for manifests and configs.
using KeyValues = std::map<std::string, std::string>;

std::string to_canonical_text(const KeyValues& kv);
KeyValues parse_canonical_text(std::string_view text);

/// Shortest text that reads back to the identical double.
std::string format_double(double v);
double parse_double(const std::string& s);
std::string join_sizes(const std::vector<std::size_t>& v);
std::vector<std::size_t> split_sizes(const std::string& s);
std::string join_doubles(const std::vector<double>& v);
std::vector<double> split_doubles(const std::string& s);

const std::string& require_key(const KeyValues& kv, const std::string& key);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

/// Little-endian binary encoder.
class ByteWriter {
public:
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v);
    /// u32 rank, u64 dims, f64 data.
    void tensor(const Tensor& t);
    /// u32 name length, name, then tensor().
    void named_tensor(const std::string& name, const Tensor& t);

    const std::vector<std::uint8_t>& buffer() const { return buf_; }
    std::vector<std::uint8_t>& buffer() { return buf_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> buf_;
};

/// Little-endian decoder; running past the end raises FormatError(truncated).
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::string bytes(std::size_t n);
    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64();
    Tensor tensor();
    std::pair<std::string, Tensor> named_tensor();

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    std::uint64_t get(int n);
    void need(std::size_t n) const;
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace hafno
