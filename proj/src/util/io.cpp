#include "hafno/util/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hafno/error.hpp"

namespace hafno {

std::string to_canonical_text(const KeyValues& kv) {
    std::string out;
    for (const auto& [k, v] : kv) {
        if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
            throw std::invalid_argument("canonical text: key/value '" + k + "' contains a separator");
        }
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

KeyValues parse_canonical_text(std::string_view text) {
    KeyValues kv;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw FormatError(FormatErrorCode::malformed, "manifest line without '=': " + std::string(line));
        }
        kv[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
    }
    return kv;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw FormatError(FormatErrorCode::malformed, "not a number: '" + s + "'");
    }
    return v;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<std::size_t> split_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size()) {
            throw FormatError(FormatErrorCode::malformed, "not an integer list: '" + s + "'");
        }
        out.push_back(v);
    }
    return out;
}

std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    return out;
}

std::vector<double> split_doubles(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(parse_double(item));
    return out;
}

const std::string& require_key(const KeyValues& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(FormatErrorCode::malformed, "missing key '" + key + "'");
    return it->second;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t h) {
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::tensor(const Tensor& t) {
    u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) u64(d);
    for (double v : t.data()) f64(v);
}

void ByteWriter::named_tensor(const std::string& name, const Tensor& t) {
    u32(static_cast<std::uint32_t>(name.size()));
    bytes(name);
    tensor(t);
}

void ByteReader::need(std::size_t n) const {
    if (n > data_.size() - pos_) {
        throw FormatError(FormatErrorCode::truncated, "truncated: need " + std::to_string(n) + " bytes at offset " +
                                                          std::to_string(pos_) + ", have " +
                                                          std::to_string(data_.size() - pos_));
    }
}

std::uint64_t ByteReader::get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
}

std::string ByteReader::bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

Tensor ByteReader::tensor() {
    const std::uint32_t rank = u32();
    if (rank > 8) throw FormatError(FormatErrorCode::malformed, "tensor rank " + std::to_string(rank) + " too large");
    Shape shape(rank);
    for (auto& d : shape) d = u64();
    const std::size_t n = shape_size(shape);
    need(n * 8);
    std::vector<double> data(n);
    for (auto& v : data) v = f64();
    return Tensor(std::move(shape), std::move(data));
}

std::pair<std::string, Tensor> ByteReader::named_tensor() {
    const std::uint32_t len = u32();
    std::string name = bytes(len);
    return {std::move(name), tensor()};
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::missing_file, "cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace hafno
