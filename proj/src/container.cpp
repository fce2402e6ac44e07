#include "survwalk/container.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "survwalk/error.hpp"

namespace survwalk {

namespace {

uint32_t payload_crc(const std::vector<char>& bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    if (!bytes.empty()) {
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()),
                    static_cast<uInt>(bytes.size()));
    }
    return static_cast<uint32_t>(crc);
}

void put_u32_le(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t get_u32_le(const char* p) {
    return static_cast<uint32_t>(static_cast<unsigned char>(p[0])) |
           (static_cast<uint32_t>(static_cast<unsigned char>(p[1])) << 8) |
           (static_cast<uint32_t>(static_cast<unsigned char>(p[2])) << 16) |
           (static_cast<uint32_t>(static_cast<unsigned char>(p[3])) << 24);
}

}  // namespace

void Container::write(const std::string& path) const {
    std::vector<char> payload;
    Kv index;
    size_t offset = 0;
    for (const NamedTensor& nt : tensors) {
        if (nt.name.find('.') != std::string::npos) {
            fail_invalid("container: tensor name may not contain '.': " + nt.name);
        }
        Kv& entry = index.ensure_child(nt.name);
        entry.set("shape", format_size_list(nt.tensor.shape));
        entry.set("dtype", "f32");
        entry.set_uint("offset", offset);
        const size_t n = nt.tensor.numel();
        const size_t at = payload.size();
        payload.resize(at + n * sizeof(float));
        std::memcpy(payload.data() + at, nt.tensor.data.data(), n * sizeof(float));
        offset += n;
    }

    Kv header;
    Kv& info = header.ensure_child("container");
    info.set("kind", kind);
    info.set_uint("payload_floats", offset);
    info.set_uint("payload_crc32", payload_crc(payload));
    for (const auto& [k, v] : meta.values()) header.set(k, v);
    for (const auto& [k, node] : meta.children()) header.ensure_child(k) = node;
    header.ensure_child("tensors") = index;

    const std::string header_text = header.serialize();
    std::string blob;
    blob.append(kContainerMagic, 4);
    blob.push_back(static_cast<char>(kContainerVersion));
    put_u32_le(blob, static_cast<uint32_t>(header_text.size()));
    blob += header_text;
    blob.append(payload.data(), payload.size());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail_io("cannot open for writing: " + path);
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) fail_io("write failed: " + path);
}

Container Container::read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_io("cannot open: " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (blob.size() < 9) fail_data(path + ": truncated container header");
    if (std::memcmp(blob.data(), kContainerMagic, 4) != 0) {
        fail_data(path + ": bad magic, not a SVHW container");
    }
    const uint8_t version = static_cast<uint8_t>(blob[4]);
    if (version != kContainerVersion) {
        fail_data(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    const uint32_t header_len = get_u32_le(blob.data() + 5);
    if (blob.size() < 9 + static_cast<size_t>(header_len)) {
        fail_data(path + ": truncated container header");
    }
    Kv header = Kv::parse(blob.substr(9, header_len));

    Container c;
    c.kind = header.get_or("container.kind", "");
    const uint64_t payload_floats = header.get_uint("container.payload_floats");
    const uint64_t expect_crc = header.get_uint("container.payload_crc32");

    const size_t payload_at = 9 + header_len;
    if (payload_floats > blob.size()) fail_data(path + ": truncated payload");
    const size_t payload_bytes = static_cast<size_t>(payload_floats) * sizeof(float);
    if (blob.size() < payload_at + payload_bytes) fail_data(path + ": truncated payload");
    std::vector<char> payload(blob.begin() + static_cast<std::ptrdiff_t>(payload_at),
                              blob.begin() + static_cast<std::ptrdiff_t>(payload_at + payload_bytes));
    if (payload_crc(payload) != expect_crc) fail_data(path + ": payload checksum mismatch");

    const Kv* index = header.child("tensors");
    if (index) {
        for (const auto& [name, entry] : index->children()) {
            NamedTensor nt;
            nt.name = name;
            const std::vector<size_t> shape = parse_size_list(entry.get("shape"));
            const uint64_t off = entry.get_uint("offset");
            const size_t n = Tensor<float>::numel_of(shape);
            if (off > payload_floats || n > payload_floats - off) {
                fail_data(path + ": tensor '" + name + "' exceeds payload");
            }
            nt.tensor.shape = shape;
            nt.tensor.data.resize(n);
            std::memcpy(nt.tensor.data.data(), payload.data() + off * sizeof(float),
                        n * sizeof(float));
            c.tensors.push_back(std::move(nt));
        }
    }

    for (const auto& [k, v] : header.values()) c.meta.set(k, v);
    for (const auto& [k, node] : header.children()) {
        if (k == "container" || k == "tensors") continue;
        c.meta.ensure_child(k) = node;
    }
    return c;
}

const Tensor<float>* Container::find(const std::string& name) const {
    for (const NamedTensor& nt : tensors)
        if (nt.name == name) return &nt.tensor;
    return nullptr;
}

const Tensor<float>& Container::require(const std::string& name) const {
    const Tensor<float>* t = find(name);
    if (!t) fail_data("container: missing tensor '" + name + "'");
    return *t;
}

}  // namespace survwalk
