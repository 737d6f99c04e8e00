#include "deqmpi/container.hpp"

#include <cstring>
#include <fstream>

namespace deqmpi {

namespace {

constexpr char kMagic[4] = {'M', 'P', 'I', 'R'};

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw io_error("container: truncated file");
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint8_t>(buf[pos]) |
                          (static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf[pos + 1])) << 8);
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

} // namespace

void TensorContainer::check_unique(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) throw io_error("container: duplicate entry name '" + name + "'");
}

void TensorContainer::add(const std::string& name, std::vector<std::uint32_t> dims,
                          std::vector<double> data) {
    check_unique(name);
    TensorEntry e;
    e.name = name;
    e.dtype = Dtype::f64;
    e.dims = std::move(dims);
    e.f64 = std::move(data);
    if (e.f64.size() != e.elem_count()) throw shape_error("container: payload size != product(dims)");
    entries_.push_back(std::move(e));
}

void TensorContainer::add_f32(const std::string& name, std::vector<std::uint32_t> dims,
                              std::vector<float> data) {
    check_unique(name);
    TensorEntry e;
    e.name = name;
    e.dtype = Dtype::f32;
    e.dims = std::move(dims);
    e.f32 = std::move(data);
    if (e.f32.size() != e.elem_count()) throw shape_error("container: payload size != product(dims)");
    entries_.push_back(std::move(e));
}

void TensorContainer::add_scalar(const std::string& name, double value) {
    add(name, {1}, {value});
}

bool TensorContainer::has(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return true;
    return false;
}

const TensorEntry& TensorContainer::get(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e;
    throw io_error("container: missing entry '" + name + "'");
}

double TensorContainer::scalar(const std::string& name) const {
    const TensorEntry& e = get(name);
    if (e.elem_count() != 1 || e.dtype != Dtype::f64)
        throw io_error("container: entry '" + name + "' is not an f64 scalar");
    return e.f64[0];
}

void TensorContainer::write(const std::string& path) const {
    std::string out;
    out.append(kMagic, 4);
    put_u16(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& e : entries_) {
        if (e.name.size() > 0xffff) throw io_error("container: entry name too long");
        put_u16(out, static_cast<std::uint16_t>(e.name.size()));
        out.append(e.name);
        out.push_back(static_cast<char>(e.dtype));
        out.push_back(static_cast<char>(e.dims.size()));
        for (auto d : e.dims) put_u32(out, d);
        if (e.dtype == Dtype::f64) {
            for (double v : e.f64) {
                std::uint64_t bits;
                std::memcpy(&bits, &v, 8);
                put_u64(out, bits);
            }
        } else {
            for (float v : e.f32) {
                std::uint32_t bits;
                std::memcpy(&bits, &v, 4);
                put_u32(out, bits);
            }
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("container: cannot open '" + path + "' for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw io_error("container: short write to '" + path + "'");
}

TensorContainer TensorContainer::read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("container: cannot open '" + path + "'");
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    Reader r{buf};
    const std::string magic = r.bytes(4);
    if (std::memcmp(magic.data(), kMagic, 4) != 0)
        throw io_error("container: bad magic in '" + path + "'");
    const std::uint16_t version = r.u16();
    if (version != kVersion)
        throw io_error("container: unsupported format version " + std::to_string(version));
    const std::uint32_t count = r.u32();

    TensorContainer c;
    for (std::uint32_t i = 0; i < count; ++i) {
        TensorEntry e;
        const std::uint16_t name_len = r.u16();
        e.name = r.bytes(name_len);
        const std::uint8_t dtype = r.u8();
        if (dtype != 1 && dtype != 2) throw io_error("container: unknown dtype code");
        e.dtype = static_cast<Dtype>(dtype);
        const std::uint8_t ndim = r.u8();
        e.dims.resize(ndim);
        for (std::uint8_t d = 0; d < ndim; ++d) e.dims[d] = r.u32();
        const std::size_t n = e.elem_count();
        if (e.dtype == Dtype::f64) {
            e.f64.resize(n);
            for (std::size_t k = 0; k < n; ++k) {
                std::uint64_t bits = r.u64();
                std::memcpy(&e.f64[k], &bits, 8);
            }
        } else {
            e.f32.resize(n);
            for (std::size_t k = 0; k < n; ++k) {
                std::uint32_t bits = r.u32();
                std::memcpy(&e.f32[k], &bits, 4);
            }
        }
        c.check_unique(e.name);
        c.entries_.push_back(std::move(e));
    }
    if (r.pos != buf.size()) throw io_error("container: trailing bytes in '" + path + "'");
    return c;
}

} // namespace deqmpi
