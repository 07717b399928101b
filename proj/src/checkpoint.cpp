#include "vqi2i/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "vqi2i/error.hpp"

namespace vqi2i {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace {

constexpr unsigned char kMagic[6] = {'V', 'Q', 'I', '2', 'I', 0x01};
constexpr uint16_t kVersion = 1;

void put_u16(std::vector<unsigned char>& out, uint16_t v) {
    out.push_back(static_cast<unsigned char>(v));
    out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

class Reader {
public:
    Reader(const std::vector<unsigned char>& buf, const std::string& path)
        : buf_(buf), path_(path) {}
    uint16_t u16() { return static_cast<uint16_t>(byte() | (byte() << 8)); }
    uint32_t u32() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(byte()) << (8 * i);
        return v;
    }
    std::string str(size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(&buf_[pos_]), n);
        pos_ += n;
        return s;
    }
    void f64s(std::vector<double>& out, size_t n) {
        need(n * 8);
        out.resize(n);
        std::memcpy(out.data(), &buf_[pos_], n * 8);
        pos_ += n * 8;
    }
    size_t pos() const { return pos_; }

private:
    unsigned byte() {
        need(1);
        return buf_[pos_++];
    }
    void need(size_t n) {
        if (buf_.size() - pos_ < n) failf("checkpoint '%s' is truncated", path_.c_str());
    }
    const std::vector<unsigned char>& buf_;
    const std::string& path_;
    size_t pos_ = 0;
};

}  // namespace

void CheckpointData::add(std::string name, Shape shape, std::vector<double> data) {
    require(!name.empty(), "checkpoint entry name must be non-empty");
    require(find(name) == nullptr, "duplicate checkpoint entry '" + name + "'");
    size_t numel = 1;
    for (int d : shape) {
        require(d > 0, "checkpoint entry '" + name + "' has a non-positive extent");
        numel *= static_cast<size_t>(d);
    }
    require(numel == data.size(), "checkpoint entry '" + name + "' shape/payload mismatch");
    entries.push_back({std::move(name), std::move(shape), std::move(data)});
}

void CheckpointData::add_scalar(std::string name, double v) { add(std::move(name), {1}, {v}); }

void CheckpointData::add_text(std::string name, const std::string& text) {
    require(!text.empty(), "checkpoint text entry '" + name + "' must be non-empty");
    std::vector<double> data(text.size());
    for (size_t i = 0; i < text.size(); ++i) data[i] = static_cast<unsigned char>(text[i]);
    add(std::move(name), {static_cast<int>(text.size())}, std::move(data));
}

void CheckpointData::add_params(const Params& ps, const std::string& prefix) {
    for (const NamedParam& p : ps.items())
        add(prefix + p.name, p.tensor.shape(), p.tensor.values());
}

void CheckpointData::add_adam(const Adam& opt, const std::string& prefix) {
    const auto& items = opt.params().items();
    for (size_t i = 0; i < items.size(); ++i) {
        add(prefix + ".m." + items[i].name, items[i].tensor.shape(), opt.m()[i]);
        add(prefix + ".v." + items[i].name, items[i].tensor.shape(), opt.v()[i]);
    }
    add_scalar(prefix + ".t", static_cast<double>(opt.t()));
}

const CheckpointEntry* CheckpointData::find(const std::string& name) const {
    for (const CheckpointEntry& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

const CheckpointEntry& CheckpointData::get(const std::string& name) const {
    const CheckpointEntry* e = find(name);
    if (!e) failf("checkpoint has no entry '%s'", name.c_str());
    return *e;
}

double CheckpointData::scalar(const std::string& name) const {
    const CheckpointEntry& e = get(name);
    require(e.data.size() == 1, "checkpoint entry '" + name + "' is not a scalar");
    return e.data[0];
}

std::string CheckpointData::text(const std::string& name) const {
    const CheckpointEntry& e = get(name);
    std::string s(e.data.size(), '\0');
    for (size_t i = 0; i < e.data.size(); ++i) s[i] = static_cast<char>(e.data[i]);
    return s;
}

void CheckpointData::load_params(const Params& ps, const std::string& prefix) const {
    for (const NamedParam& p : ps.items()) {
        const CheckpointEntry& e = get(prefix + p.name);
        require(e.shape == p.tensor.shape(),
                "checkpoint entry '" + prefix + p.name + "' has a mismatched shape");
        Tensor t = p.tensor;  // shared storage; copying the handle is cheap
        t.values() = e.data;
    }
}

void CheckpointData::load_adam(Adam& opt, const std::string& prefix) const {
    const auto& items = opt.params().items();
    std::vector<std::vector<double>> m(items.size()), v(items.size());
    for (size_t i = 0; i < items.size(); ++i) {
        m[i] = get(prefix + ".m." + items[i].name).data;
        v[i] = get(prefix + ".v." + items[i].name).data;
    }
    opt.restore(std::move(m), std::move(v), static_cast<int64_t>(scalar(prefix + ".t")));
}

void save_checkpoint_file(const std::string& path, const CheckpointData& ck) {
    std::vector<unsigned char> buf(kMagic, kMagic + 6);
    put_u16(buf, kVersion);
    put_u32(buf, static_cast<uint32_t>(ck.entries.size()));
    for (const CheckpointEntry& e : ck.entries) {
        put_u32(buf, static_cast<uint32_t>(e.name.size()));
        buf.insert(buf.end(), e.name.begin(), e.name.end());
        put_u32(buf, static_cast<uint32_t>(e.shape.size()));
        for (int d : e.shape) put_u32(buf, static_cast<uint32_t>(d));
        size_t at = buf.size();
        buf.resize(at + e.data.size() * 8);
        std::memcpy(&buf[at], e.data.data(), e.data.size() * 8);
    }
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, buf.data(), static_cast<uInt>(buf.size()));
    put_u32(buf, static_cast<uint32_t>(crc));

    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) failf("cannot open '%s' for writing", tmp.c_str());
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size()));
        out.flush();
        if (!out) failf("failed to write '%s'", tmp.c_str());
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        failf("cannot move checkpoint into place at '%s'", path.c_str());
    }
}

CheckpointData load_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) failf("cannot open checkpoint '%s'", path.c_str());
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 6 + 2 + 4 + 4) failf("checkpoint '%s' is truncated", path.c_str());
    if (std::memcmp(buf.data(), kMagic, 6) != 0)
        failf("'%s' is not a checkpoint (bad magic)", path.c_str());

    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, buf.data(), static_cast<uInt>(buf.size() - 4));
    uint32_t stored = 0;
    std::memcpy(&stored, &buf[buf.size() - 4], 4);
    if (static_cast<uint32_t>(crc) != stored)
        failf("checkpoint '%s' failed its checksum (corrupt file)", path.c_str());

    std::vector<unsigned char> body(buf.begin(), buf.end() - 4);
    Reader r(body, path);
    r.str(6);  // magic, already checked
    uint16_t version = r.u16();
    if (version != kVersion)
        failf("checkpoint '%s' has unsupported format version %u", path.c_str(), version);
    uint32_t count = r.u32();
    CheckpointData ck;
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = r.u32();
        if (name_len == 0 || name_len > (1u << 16))
            failf("checkpoint '%s' has a malformed entry name", path.c_str());
        std::string name = r.str(name_len);
        uint32_t rank = r.u32();
        if (rank > 8) failf("checkpoint '%s' entry '%s' has rank %u", path.c_str(), name.c_str(),
                            rank);
        Shape shape(rank);
        size_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            uint32_t extent = r.u32();
            if (extent == 0 || extent > (1u << 28))
                failf("checkpoint '%s' entry '%s' has a bad extent", path.c_str(), name.c_str());
            shape[d] = static_cast<int>(extent);
            numel *= extent;
        }
        std::vector<double> data;
        r.f64s(data, numel);
        ck.add(std::move(name), std::move(shape), std::move(data));
    }
    if (r.pos() != body.size())
        failf("checkpoint '%s' has trailing bytes after the entry table", path.c_str());
    return ck;
}

void save_bundle(const std::string& path, const SaveBundle& b) {
    require(b.config != nullptr && b.model != nullptr, "save_bundle needs a config and a model");
    CheckpointData ck;
    ck.add_text("__config__", serialize_config(*b.config));
    ck.add_scalar("__step__", static_cast<double>(b.step));
    if (b.usage >= 0.0) ck.add_scalar("__usage__", b.usage);
    ck.add_params(b.model->gen_params);
    ck.add_params(b.model->disc_params);
    if (b.opt_g) ck.add_adam(*b.opt_g, "opt_g");
    if (b.opt_d) ck.add_adam(*b.opt_d, "opt_d");
    if (b.lm) {
        require(b.lm_params != nullptr, "save_bundle: lm_params required with lm");
        ck.add_scalar("__lm_step__", static_cast<double>(b.lm_step));
        ck.add_params(*b.lm_params);
        if (b.opt_lm) ck.add_adam(*b.opt_lm, "opt_lm");
    }
    save_checkpoint_file(path, ck);
}

bool LoadedBundle::has_opt(const std::string& prefix) const {
    return raw.find(prefix + ".t") != nullptr;
}

LoadedBundle load_bundle(const std::string& path) {
    LoadedBundle b;
    b.raw = load_checkpoint_file(path);
    b.config = parse_config_text(b.raw.text("__config__"), path + " [embedded config]");
    b.model.init(b.config.net, b.config.train.uni, b.config.train.seed);
    b.raw.load_params(b.model.gen_params);
    b.raw.load_params(b.model.disc_params);
    b.step = static_cast<int64_t>(b.raw.scalar("__step__"));
    if (const CheckpointEntry* e = b.raw.find("__usage__")) b.usage = e->data[0];
    if (b.raw.find("__lm_step__") != nullptr) {
        b.has_lm = true;
        b.lm_step = static_cast<int64_t>(b.raw.scalar("__lm_step__"));
        Rng rng(derive_seed(b.config.train.seed, "lm-init", 0));
        b.lm.init(b.lm_params, "lm", b.config.lm, rng);
        b.raw.load_params(b.lm_params);
    }
    return b;
}

}  // namespace vqi2i
