#include "cornet/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cornet {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

namespace {

constexpr std::uint8_t kTensorVersion = 1;
constexpr std::uint8_t kDtypeF64 = 0;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t& pos) {
    if (pos + 4 > in.size()) throw Error(ErrorCode::IoError, "truncated file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(in[pos + i]) << (8 * i);
    pos += 4;
    return v;
}

void expect_magic(const std::vector<std::uint8_t>& in, const char* magic) {
    if (in.size() < 4 || std::memcmp(in.data(), magic, 4) != 0)
        throw Error(ErrorCode::IoError, std::string("bad magic, expected ") + magic);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::size_t TensorData::numel() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::vector<std::uint8_t> encode_tensor(const TensorData& t) {
    if (t.numel() != t.data.size()) throw Error(ErrorCode::ShapeMismatch, "tensor payload does not match its shape");
    std::vector<std::uint8_t> out{'C', 'O', 'R', 'T', kTensorVersion, kDtypeF64, 0, 0};
    put_u32(out, std::uint32_t(t.shape.size()));
    for (auto d : t.shape) put_u32(out, d);
    const std::size_t off = out.size();
    out.resize(off + 8 * t.data.size());
    std::memcpy(out.data() + off, t.data.data(), 8 * t.data.size());
    return out;
}

TensorData decode_tensor(const std::vector<std::uint8_t>& in) {
    expect_magic(in, "CORT");
    if (in.size() < 12) throw Error(ErrorCode::IoError, "truncated tensor header");
    if (in[4] != kTensorVersion) throw Error(ErrorCode::IoError, "unsupported tensor version");
    if (in[5] != kDtypeF64) throw Error(ErrorCode::IoError, "unsupported tensor dtype");
    std::size_t pos = 8;
    const std::uint32_t ndim = get_u32(in, pos);
    TensorData t;
    for (std::uint32_t i = 0; i < ndim; ++i) t.shape.push_back(get_u32(in, pos));
    const std::size_t n = t.numel();
    if (in.size() != pos + 8 * n) throw Error(ErrorCode::IoError, "tensor payload length does not match its shape");
    t.data.resize(n);
    std::memcpy(t.data.data(), in.data() + pos, 8 * n);
    return t;
}

std::vector<std::uint8_t> encode_labels(const std::vector<std::uint32_t>& labels) {
    std::vector<std::uint8_t> out{'C', 'O', 'R', 'L'};
    put_u32(out, std::uint32_t(labels.size()));
    for (auto l : labels) put_u32(out, l);
    return out;
}

std::vector<std::uint32_t> decode_labels(const std::vector<std::uint8_t>& in) {
    expect_magic(in, "CORL");
    std::size_t pos = 4;
    const std::uint32_t n = get_u32(in, pos);
    if (in.size() != pos + 4ull * n) throw Error(ErrorCode::IoError, "label count does not match the file size");
    std::vector<std::uint32_t> out(n);
    for (auto& l : out) l = get_u32(in, pos);
    return out;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f), {});
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void write_tensor(const std::filesystem::path& path, const TensorData& t) { write_bytes(path, encode_tensor(t)); }

TensorData read_tensor(const std::filesystem::path& path) { return decode_tensor(read_bytes(path)); }

void write_labels(const std::filesystem::path& path, const std::vector<std::uint32_t>& labels) {
    write_bytes(path, encode_labels(labels));
}

std::vector<std::uint32_t> read_labels(const std::filesystem::path& path) { return decode_labels(read_bytes(path)); }

TensorData tensor_of(const DenseMatrix& m) {
    return {{std::uint32_t(m.rows()), std::uint32_t(m.cols())}, m.storage()};
}

DenseMatrix matrix_of(const TensorData& t) {
    if (t.shape.size() != 2) throw Error(ErrorCode::ShapeMismatch, "expected a 2-d tensor");
    DenseMatrix m(t.shape[0], t.shape[1]);
    std::copy(t.data.begin(), t.data.end(), m.data().begin());
    return m;
}

KeyValues parse_key_values(const std::string& text) {
    KeyValues kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, value).second)
            throw Error(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": duplicate key " + key);
    }
    return kv;
}

}  // namespace cornet
