#include "swu/tensor_io.hpp"

#include <cstring>
#include <fstream>

namespace swu {

namespace {

constexpr char kMagic[4] = {'S', 'W', 'U', 'T'};
constexpr int64_t kMaxElements = 1LL << 32;

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::string header(uint8_t dtype, const Shape& shape) {
    std::string out(kMagic, 4);
    put_u16(out, kTensorFormatVersion);
    out.push_back(static_cast<char>(dtype));
    out.push_back(static_cast<char>(shape.size()));
    for (int64_t e : shape) put_u64(out, static_cast<uint64_t>(e));
    return out;
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed: " + path);
}

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw IoError("cannot open: " + path);
        bytes_.assign(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
    }

    const uint8_t* take(size_t n) {
        if (pos_ + n > bytes_.size()) throw IoError("truncated tensor file: " + path_);
        const uint8_t* p = reinterpret_cast<const uint8_t*>(bytes_.data()) + pos_;
        pos_ += n;
        return p;
    }

    uint16_t u16() {
        const uint8_t* p = take(2);
        return static_cast<uint16_t>(p[0] | (p[1] << 8));
    }

    uint64_t u64() {
        const uint8_t* p = take(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
        return v;
    }

    uint32_t u32() {
        const uint8_t* p = take(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
        return v;
    }

    size_t remaining() const { return bytes_.size() - pos_; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::string bytes_;
    size_t pos_ = 0;
};

}  // namespace

void write_tensor(const std::string& path, const TensorData& tensor) {
    if (tensor.dtype > 1) throw IoError("unknown dtype code for: " + path);
    const int64_t numel = shape_numel(tensor.shape);
    if (numel == 0 || tensor.shape.empty() || tensor.shape.size() > 8)
        throw IoError("refusing to write empty or over-rank tensor: " + path);
    const size_t count = tensor.dtype == 0 ? tensor.f32.size() : tensor.i32.size();
    if (count != static_cast<size_t>(numel))
        throw IoError("payload does not match shape for: " + path);
    std::string out = header(tensor.dtype, tensor.shape);
    out.reserve(out.size() + count * 4);
    if (tensor.dtype == 0) {
        for (float v : tensor.f32) {
            uint32_t bits;
            std::memcpy(&bits, &v, 4);
            put_u32(out, bits);
        }
    } else {
        for (int32_t v : tensor.i32) put_u32(out, static_cast<uint32_t>(v));
    }
    write_file(path, out);
}

void write_tensor(const std::string& path, const DenseField& field) {
    TensorData t;
    t.dtype = 0;
    t.shape = field.shape;
    t.f32 = field.data;
    write_tensor(path, t);
}

void write_tensor(const std::string& path, const LabelField& labels) {
    TensorData t;
    t.dtype = 1;
    t.shape = labels.shape;
    t.i32 = labels.data;
    write_tensor(path, t);
}

TensorData read_tensor(const std::string& path) {
    Reader r(path);
    const uint8_t* magic = r.take(4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("bad magic in tensor file: " + path);
    const uint16_t version = r.u16();
    if (version != kTensorFormatVersion)
        throw IoError("unsupported tensor format version " + std::to_string(version) + ": " + path);
    TensorData t;
    t.dtype = *r.take(1);
    if (t.dtype > 1) throw IoError("unknown dtype code in tensor file: " + path);
    const uint8_t rank = *r.take(1);
    if (rank == 0 || rank > 8) throw IoError("unsupported tensor rank: " + path);
    int64_t numel = 1;
    for (uint8_t d = 0; d < rank; ++d) {
        const uint64_t e = r.u64();
        if (e == 0) throw IoError("empty extent in tensor file: " + path);
        if (e > static_cast<uint64_t>(kMaxElements) ||
            numel > kMaxElements / static_cast<int64_t>(e))
            throw IoError("tensor extent overflow: " + path);
        t.shape.push_back(static_cast<int64_t>(e));
        numel *= static_cast<int64_t>(e);
    }
    if (r.remaining() != static_cast<size_t>(numel) * 4)
        throw IoError("payload length mismatch in tensor file: " + path);
    if (t.dtype == 0) {
        t.f32.resize(static_cast<size_t>(numel));
        for (int64_t i = 0; i < numel; ++i) {
            const uint32_t bits = r.u32();
            float v;
            std::memcpy(&v, &bits, 4);
            t.f32[static_cast<size_t>(i)] = v;
        }
    } else {
        t.i32.resize(static_cast<size_t>(numel));
        for (int64_t i = 0; i < numel; ++i)
            t.i32[static_cast<size_t>(i)] = static_cast<int32_t>(r.u32());
    }
    return t;
}

DenseField read_field(const std::string& path) {
    TensorData t = read_tensor(path);
    if (t.dtype != 0) throw IoError("expected float32 tensor: " + path);
    if (t.shape.size() < 2) throw IoError("float32 tensor must have rank >= 2: " + path);
    DenseField f(t.shape);
    f.data = std::move(t.f32);
    return f;
}

LabelField read_labels(const std::string& path) {
    TensorData t = read_tensor(path);
    if (t.dtype != 1) throw IoError("expected int32 tensor: " + path);
    LabelField l(t.shape);
    l.data = std::move(t.i32);
    return l;
}

}  // namespace swu
