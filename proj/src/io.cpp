#include "cowpro/io.hpp"

#include <cstring>
#include <fstream>

namespace cowpro {

namespace {

constexpr std::uint32_t kFormatVersion = 1;

void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u8(std::ostream& os, std::uint8_t v) { put_bytes(os, &v, 1); }

void put_u32(std::ostream& os, std::uint32_t v) {
    std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                         static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
    put_bytes(os, b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    put_u32(os, static_cast<std::uint32_t>(v));
    put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

void put_f32(std::ostream& os, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

struct Reader {
    std::ifstream in;
    std::filesystem::path path;

    explicit Reader(const std::filesystem::path& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw IoError("cannot open " + p.string());
    }

    void bytes(void* p, std::size_t n) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (in.gcount() != static_cast<std::streamsize>(n))
            throw IoError("truncated file " + path.string());
    }

    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }

    std::uint32_t u32() {
        std::uint8_t b[4];
        bytes(b, 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }

    std::uint64_t u64() {
        const std::uint64_t lo = u32();
        const std::uint64_t hi = u32();
        return lo | (hi << 32);
    }

    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    std::string str(std::size_t n) {
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
};

void check_magic(Reader& r, const char* magic) {
    char got[4];
    r.bytes(got, 4);
    if (std::memcmp(got, magic, 4) != 0)
        throw IoError("bad magic in " + r.path.string() + " (expected " + magic + ")");
}

void check_version(Reader& r) {
    const std::uint32_t v = r.u32();
    if (v != kFormatVersion)
        throw IoError("unsupported format version " + std::to_string(v) + " in " + r.path.string());
}

}  // namespace

void write_volume(const std::filesystem::path& path, const Volume& volume) {
    const std::int64_t n = volume.count();
    if (volume.dtype == DType::kFloat32)
        require(static_cast<std::int64_t>(volume.f32.size()) == n, "volume: f32 payload size mismatch");
    else
        require(static_cast<std::int64_t>(volume.u8.size()) == n, "volume: u8 payload size mismatch");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    put_bytes(os, "CWPV", 4);
    put_u32(os, kFormatVersion);
    put_u8(os, static_cast<std::uint8_t>(volume.dtype));
    put_u8(os, static_cast<std::uint8_t>(volume.dims.size()));
    for (auto d : volume.dims) put_u32(os, d);
    if (volume.dtype == DType::kFloat32)
        for (float v : volume.f32) put_f32(os, v);
    else
        put_bytes(os, volume.u8.data(), volume.u8.size());
    if (!os) throw IoError("write failed for " + path.string());
}

Volume read_volume(const std::filesystem::path& path) {
    Reader r(path);
    check_magic(r, "CWPV");
    check_version(r);
    Volume v;
    const std::uint8_t dtype = r.u8();
    if (dtype > 1) throw IoError("unknown dtype " + std::to_string(dtype) + " in " + path.string());
    v.dtype = static_cast<DType>(dtype);
    const std::uint8_t ndim = r.u8();
    v.dims.resize(ndim);
    for (auto& d : v.dims) d = r.u32();
    const std::int64_t n = v.count();
    if (v.dtype == DType::kFloat32) {
        v.f32.resize(static_cast<std::size_t>(n));
        for (auto& x : v.f32) x = r.f32();
    } else {
        v.u8.resize(static_cast<std::size_t>(n));
        if (n > 0) r.bytes(v.u8.data(), static_cast<std::size_t>(n));
    }
    return v;
}

Volume volume_from_tensor(const Tensor32& t) {
    Volume v;
    v.dtype = DType::kFloat32;
    for (int d : t.shape()) v.dims.push_back(static_cast<std::uint32_t>(d));
    v.f32 = t.data();
    return v;
}

Tensor32 tensor_from_volume(const Volume& v) {
    require(v.dtype == DType::kFloat32, "tensor_from_volume: expected float32 volume");
    Shape shape;
    for (auto d : v.dims) shape.push_back(static_cast<int>(d));
    return Tensor32::from_data(std::move(shape), v.f32);
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    put_bytes(os, "CWPC", 4);
    put_u32(os, kFormatVersion);
    put_u64(os, ckpt.iteration);
    put_u32(os, static_cast<std::uint32_t>(ckpt.config_text.size()));
    put_bytes(os, ckpt.config_text.data(), ckpt.config_text.size());
    put_u32(os, static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& p : ckpt.params) {
        put_u32(os, static_cast<std::uint32_t>(p.name.size()));
        put_bytes(os, p.name.data(), p.name.size());
        put_u8(os, static_cast<std::uint8_t>(p.shape.size()));
        for (int d : p.shape) put_u32(os, static_cast<std::uint32_t>(d));
        require(static_cast<std::int64_t>(p.data.size()) == numel_of(p.shape),
                "checkpoint: payload size mismatch for " + p.name);
        for (float v : p.data) put_f32(os, v);
    }
    if (!os) throw IoError("write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    Reader r(path);
    check_magic(r, "CWPC");
    check_version(r);
    Checkpoint c;
    c.iteration = r.u64();
    c.config_text = r.str(r.u32());
    const std::uint32_t count = r.u32();
    c.params.resize(count);
    for (auto& p : c.params) {
        p.name = r.str(r.u32());
        const std::uint8_t ndim = r.u8();
        p.shape.resize(ndim);
        std::int64_t n = 1;
        for (auto& d : p.shape) {
            d = static_cast<int>(r.u32());
            n *= d;
        }
        p.data.resize(static_cast<std::size_t>(n));
        for (auto& v : p.data) v = r.f32();
    }
    return c;
}

}  // namespace cowpro
