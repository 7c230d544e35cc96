#include "bira/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace bira {

namespace {

constexpr char kMagic[4] = {'B', 'T', 'N', 'S'};
constexpr unsigned char kVersion = 1;

void put_u16(std::string& buf, std::uint16_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double d) {
    std::uint64_t v{};
    std::memcpy(&v, &d, 8);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    const unsigned char* p;
    std::size_t left;
    std::string path;

    void need(std::size_t n) {
        if (left < n) throw IoError("truncated tensor container: " + path);
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
        p += 2;
        left -= 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        p += 4;
        left -= 4;
        return v;
    }
    unsigned char u8() {
        need(1);
        unsigned char v = *p;
        ++p;
        --left;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        p += 8;
        left -= 8;
        double d{};
        std::memcpy(&d, &v, 8);
        return d;
    }
};

}  // namespace

void write_named_tensors(const std::filesystem::path& path, const NamedTensors& tensors) {
    std::string buf;
    buf.append(kMagic, 4);
    buf.push_back(static_cast<char>(kVersion));
    put_u32(buf, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        if (name.size() > 0xffff) throw IoError("tensor name too long: " + name);
        put_u16(buf, static_cast<std::uint16_t>(name.size()));
        buf.append(name);
        buf.push_back(static_cast<char>(t.shape.size()));
        for (i64 d : t.shape) put_u32(buf, static_cast<std::uint32_t>(d));
        for (double v : t.data) put_f64(buf, v);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

NamedTensors read_named_tensors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r{reinterpret_cast<const unsigned char*>(raw.data()), raw.size(), path.string()};
    r.need(5);
    if (std::memcmp(r.p, kMagic, 4) != 0) throw IoError("bad magic in " + path.string());
    r.p += 4;
    r.left -= 4;
    if (r.u8() != kVersion) throw IoError("unsupported container version in " + path.string());
    const std::uint32_t count = r.u32();
    NamedTensors out;
    out.reserve(count);
    for (std::uint32_t e = 0; e < count; ++e) {
        const std::uint16_t name_len = r.u16();
        r.need(name_len);
        std::string name(reinterpret_cast<const char*>(r.p), name_len);
        r.p += name_len;
        r.left -= name_len;
        const unsigned char ndim = r.u8();
        Shape shape;
        for (unsigned char i = 0; i < ndim; ++i) shape.push_back(static_cast<i64>(r.u32()));
        const i64 n = shape_numel(shape);
        std::vector<double> data(static_cast<std::size_t>(n));
        for (i64 i = 0; i < n; ++i) data[static_cast<std::size_t>(i)] = r.f64();
        out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return out;
}

}  // namespace bira
