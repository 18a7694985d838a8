#include "mri/data_io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "mri/errors.hpp"

namespace mri {

namespace {

// ---------------------------------------------------------------- encoding

void put_u8(std::vector<uint8_t>& buf, uint8_t v) { buf.push_back(v); }

void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
    buf.push_back(static_cast<uint8_t>(v & 0xFF));
    buf.push_back(static_cast<uint8_t>((v >> 8) & 0xFF));
    buf.push_back(static_cast<uint8_t>((v >> 16) & 0xFF));
    buf.push_back(static_cast<uint8_t>((v >> 24) & 0xFF));
}

void put_f32(std::vector<uint8_t>& buf, float v) {
    static_assert(sizeof(float) == 4);
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
}

void put_f64(std::vector<uint8_t>& buf, double v) {
    static_assert(sizeof(double) == 8);
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u32(buf, static_cast<uint32_t>(bits & 0xFFFFFFFFu));
    put_u32(buf, static_cast<uint32_t>(bits >> 32));
}

void put_bytes(std::vector<uint8_t>& buf, const void* data, size_t len) {
    const uint8_t* p = static_cast<const uint8_t*>(data);
    buf.insert(buf.end(), p, p + len);
}

// Bounds-checked read cursor over an in-memory file image.
class Cursor {
public:
    Cursor(const std::vector<uint8_t>& buf, std::string path)
        : buf_(buf), path_(std::move(path)) {}

    size_t pos() const { return pos_; }
    size_t remaining() const { return buf_.size() - pos_; }

    void need(size_t n, const char* what) const {
        if (remaining() < n) {
            throw DataFormatError(DataFormatError::Kind::truncated,
                                  path_ + ": truncated while reading " +
                                      std::string(what));
        }
    }

    uint8_t u8(const char* what) {
        need(1, what);
        return buf_[pos_++];
    }

    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = static_cast<uint32_t>(buf_[pos_]) |
                     (static_cast<uint32_t>(buf_[pos_ + 1]) << 8) |
                     (static_cast<uint32_t>(buf_[pos_ + 2]) << 16) |
                     (static_cast<uint32_t>(buf_[pos_ + 3]) << 24);
        pos_ += 4;
        return v;
    }

    float f32(const char* what) {
        uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    double f64(const char* what) {
        uint64_t lo = u32(what);
        uint64_t hi = u32(what);
        uint64_t bits = lo | (hi << 32);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    std::string str(size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    void expect_magic(const char magic[4]) {
        need(4, "magic");
        if (std::memcmp(buf_.data() + pos_, magic, 4) != 0) {
            throw DataFormatError(DataFormatError::Kind::bad_magic,
                                  path_ + ": bad magic, expected '" +
                                      std::string(magic, 4) + "'");
        }
        pos_ += 4;
    }

    void expect_end() const {
        if (remaining() != 0) {
            throw DataFormatError(DataFormatError::Kind::bad_field,
                                  path_ + ": " + std::to_string(remaining()) +
                                      " trailing bytes after payload");
        }
    }

    const std::string& path() const { return path_; }

private:
    const std::vector<uint8_t>& buf_;
    std::string path_;
    size_t pos_ = 0;
};

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataFormatError(DataFormatError::Kind::truncated,
                              path + ": cannot open for reading");
    }
    in.seekg(0, std::ios::end);
    std::streamoff len = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<uint8_t> buf(static_cast<size_t>(len));
    if (len > 0) in.read(reinterpret_cast<char*>(buf.data()), len);
    if (!in) {
        throw DataFormatError(DataFormatError::Kind::truncated,
                              path + ": read failed");
    }
    return buf;
}

void write_file(const std::string& path, const std::vector<uint8_t>& buf) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataFormatError(DataFormatError::Kind::truncated,
                              path + ": cannot open for writing");
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    out.flush();
    if (!out) {
        throw DataFormatError(DataFormatError::Kind::truncated,
                              path + ": write failed");
    }
}

uint32_t checked_dim(uint32_t v, const char* what, const std::string& path,
                     uint32_t max = 1u << 24) {
    if (v == 0 || v > max) {
        throw DataFormatError(DataFormatError::Kind::bad_field,
                              path + ": invalid " + std::string(what) + " (" +
                                  std::to_string(v) + ")");
    }
    return v;
}

void put_samples(std::vector<uint8_t>& buf, const std::vector<cplx>& data,
                 bool double_precision) {
    if (double_precision) {
        for (const cplx& z : data) {
            put_f64(buf, z.real());
            put_f64(buf, z.imag());
        }
    } else {
        for (const cplx& z : data) {
            put_f32(buf, static_cast<float>(z.real()));
            put_f32(buf, static_cast<float>(z.imag()));
        }
    }
}

void get_samples(Cursor& cur, std::vector<cplx>& data, size_t n,
                 bool double_precision) {
    data.resize(n);
    if (double_precision) {
        cur.need(n * 16, "complex128 samples");
        for (size_t i = 0; i < n; ++i) {
            double re = cur.f64("sample");
            double im = cur.f64("sample");
            data[i] = cplx(re, im);
        }
    } else {
        cur.need(n * 8, "complex64 samples");
        for (size_t i = 0; i < n; ++i) {
            double re = cur.f32("sample");
            double im = cur.f32("sample");
            data[i] = cplx(re, im);
        }
    }
}

} // namespace

// ----------------------------------------------------------------- contrast

Contrast contrast_from_string(const std::string& name) {
    std::string s;
    for (char c : name) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (s == "t1") return Contrast::t1;
    if (s == "t2") return Contrast::t2;
    if (s == "flair") return Contrast::flair;
    if (s == "t1post" || s == "t1-post") return Contrast::t1post;
    if (s == "synthetic") return Contrast::synthetic;
    throw InvalidConfigError("unknown contrast '" + name + "'");
}

std::string to_string(Contrast c) {
    switch (c) {
        case Contrast::t1: return "t1";
        case Contrast::t2: return "t2";
        case Contrast::flair: return "flair";
        case Contrast::t1post: return "t1post";
        case Contrast::synthetic: return "synthetic";
    }
    return "unknown";
}

Contrast contrast_from_byte(uint8_t b) {
    switch (b) {
        case 0: return Contrast::t1;
        case 1: return Contrast::t2;
        case 2: return Contrast::flair;
        case 3: return Contrast::t1post;
        case 255: return Contrast::synthetic;
        default:
            throw DataFormatError(DataFormatError::Kind::bad_field,
                                  "invalid contrast tag " + std::to_string(b));
    }
}

// ---------------------------------------------------------------- KspVolume

CoilKSpace KspVolume::slice(int s) const {
    if (s < 0 || s >= slices) {
        throw InvalidInputError("slice index " + std::to_string(s) +
                                " out of range [0, " + std::to_string(slices) + ")");
    }
    CoilKSpace k(coils, height, width);
    size_t per = static_cast<size_t>(coils) * height * width;
    std::copy(data.begin() + static_cast<ptrdiff_t>(s * per),
              data.begin() + static_cast<ptrdiff_t>((s + 1) * per),
              k.data.begin());
    return k;
}

void KspVolume::set_slice(int s, const CoilKSpace& k) {
    if (s < 0 || s >= slices) {
        throw InvalidInputError("slice index " + std::to_string(s) +
                                " out of range [0, " + std::to_string(slices) + ")");
    }
    if (k.coils != coils || k.height != height || k.width != width) {
        throw InvalidInputError("slice shape mismatch in set_slice");
    }
    size_t per = static_cast<size_t>(coils) * height * width;
    std::copy(k.data.begin(), k.data.end(),
              data.begin() + static_cast<ptrdiff_t>(s * per));
}

KspVolume KspVolume::from_image(const ComplexImage& img) {
    KspVolume v;
    v.coils = 1;
    v.height = img.height;
    v.width = img.width;
    v.slices = 1;
    v.data = img.data;
    return v;
}

KspVolume KspVolume::from_coils(const CoilKSpace& k) {
    KspVolume v;
    v.coils = k.coils;
    v.height = k.height;
    v.width = k.width;
    v.slices = 1;
    v.data = k.data;
    return v;
}

ComplexImage KspVolume::to_image() const {
    if (coils != 1 || slices != 1) {
        throw InvalidInputError("to_image requires a single-coil single-slice volume, have " +
                                std::to_string(coils) + " coils x " +
                                std::to_string(slices) + " slices");
    }
    ComplexImage img(height, width);
    img.data = data;
    return img;
}

// --------------------------------------------------------------------- KSP1

void write_ksp(const std::string& path, const KspVolume& vol) {
    if (vol.coils <= 0 || vol.height <= 0 || vol.width <= 0 || vol.slices <= 0) {
        throw InvalidInputError("write_ksp: non-positive dimension");
    }
    if (vol.data.size() != vol.numel()) {
        throw InvalidInputError("write_ksp: data size does not match header dims");
    }
    std::vector<uint8_t> buf;
    buf.reserve(18 + vol.numel() * (vol.double_precision ? 16 : 8));
    put_bytes(buf, "KSP1", 4);
    put_u32(buf, static_cast<uint32_t>(vol.coils));
    put_u32(buf, static_cast<uint32_t>(vol.height));
    put_u32(buf, static_cast<uint32_t>(vol.width));
    put_u32(buf, static_cast<uint32_t>(vol.slices));
    put_u8(buf, vol.double_precision ? 1 : 0);
    put_u8(buf, static_cast<uint8_t>(vol.contrast));
    put_samples(buf, vol.data, vol.double_precision);
    write_file(path, buf);
}

KspVolume read_ksp(const std::string& path) {
    std::vector<uint8_t> raw = read_file(path);
    Cursor cur(raw, path);
    cur.expect_magic("KSP1");
    KspVolume vol;
    vol.coils = static_cast<int>(checked_dim(cur.u32("coils"), "coil count", path, 4096));
    vol.height = static_cast<int>(checked_dim(cur.u32("height"), "height", path));
    vol.width = static_cast<int>(checked_dim(cur.u32("width"), "width", path));
    vol.slices = static_cast<int>(checked_dim(cur.u32("slices"), "slice count", path));
    uint8_t dtype = cur.u8("dtype tag");
    if (dtype > 1) {
        throw DataFormatError(DataFormatError::Kind::bad_field,
                              path + ": invalid dtype tag " + std::to_string(dtype));
    }
    vol.double_precision = (dtype == 1);
    uint8_t ct = cur.u8("contrast tag");
    try {
        vol.contrast = contrast_from_byte(ct);
    } catch (const DataFormatError&) {
        throw DataFormatError(DataFormatError::Kind::bad_field,
                              path + ": invalid contrast tag " + std::to_string(ct));
    }
    get_samples(cur, vol.data, vol.numel(), vol.double_precision);
    cur.expect_end();
    return vol;
}

// --------------------------------------------------------------------- MSK1

void write_mask(const std::string& path, const SamplingMask& mask) {
    if (mask.height <= 0 || mask.width <= 0) {
        throw InvalidInputError("write_mask: non-positive dimension");
    }
    if (static_cast<int>(mask.line_selected.size()) != mask.height) {
        throw InvalidInputError("write_mask: line flag count does not match height");
    }
    std::vector<uint8_t> buf;
    buf.reserve(20 + mask.height);
    put_bytes(buf, "MSK1", 4);
    put_u32(buf, static_cast<uint32_t>(mask.height));
    put_u32(buf, static_cast<uint32_t>(mask.width));
    put_u32(buf, static_cast<uint32_t>(mask.acs_count));
    put_u32(buf, static_cast<uint32_t>(mask.acceleration));
    for (uint8_t f : mask.line_selected) put_u8(buf, f ? 1 : 0);
    write_file(path, buf);
}

SamplingMask read_mask(const std::string& path) {
    std::vector<uint8_t> raw = read_file(path);
    Cursor cur(raw, path);
    cur.expect_magic("MSK1");
    SamplingMask mask;
    mask.height = static_cast<int>(checked_dim(cur.u32("height"), "height", path));
    mask.width = static_cast<int>(checked_dim(cur.u32("width"), "width", path));
    mask.acs_count = static_cast<int>(cur.u32("acs_count"));
    mask.acceleration = static_cast<int>(cur.u32("acceleration"));
    if (mask.acceleration <= 0) {
        throw DataFormatError(DataFormatError::Kind::bad_field,
                              path + ": invalid acceleration " +
                                  std::to_string(mask.acceleration));
    }
    if (mask.acs_count < 0 || mask.acs_count > mask.height) {
        throw DataFormatError(DataFormatError::Kind::bad_field,
                              path + ": invalid acs_count " +
                                  std::to_string(mask.acs_count));
    }
    cur.need(static_cast<size_t>(mask.height), "line flags");
    mask.line_selected.resize(mask.height);
    for (int r = 0; r < mask.height; ++r) {
        uint8_t f = cur.u8("line flag");
        if (f > 1) {
            throw DataFormatError(DataFormatError::Kind::bad_field,
                                  path + ": line flag must be 0 or 1, got " +
                                      std::to_string(f));
        }
        mask.line_selected[r] = f;
    }
    cur.expect_end();
    return mask;
}

// --------------------------------------------------------------------- SMP1

void write_maps(const std::string& path, const SensitivitySet& maps,
                bool double_precision) {
    if (maps.coils <= 0 || maps.height <= 0 || maps.width <= 0) {
        throw InvalidInputError("write_maps: non-positive dimension");
    }
    std::vector<uint8_t> buf;
    size_t n = maps.data.size();
    buf.reserve(17 + n * (double_precision ? 16 : 8));
    put_bytes(buf, "SMP1", 4);
    put_u32(buf, static_cast<uint32_t>(maps.coils));
    put_u32(buf, static_cast<uint32_t>(maps.height));
    put_u32(buf, static_cast<uint32_t>(maps.width));
    put_u8(buf, double_precision ? 1 : 0);
    put_samples(buf, maps.data, double_precision);
    write_file(path, buf);
}

SensitivitySet read_maps(const std::string& path) {
    std::vector<uint8_t> raw = read_file(path);
    Cursor cur(raw, path);
    cur.expect_magic("SMP1");
    int coils = static_cast<int>(checked_dim(cur.u32("coils"), "coil count", path, 4096));
    int height = static_cast<int>(checked_dim(cur.u32("height"), "height", path));
    int width = static_cast<int>(checked_dim(cur.u32("width"), "width", path));
    uint8_t dtype = cur.u8("dtype tag");
    if (dtype > 1) {
        throw DataFormatError(DataFormatError::Kind::bad_field,
                              path + ": invalid dtype tag " + std::to_string(dtype));
    }
    SensitivitySet maps(coils, height, width);
    get_samples(cur, maps.data, static_cast<size_t>(coils) * height * width,
                dtype == 1);
    cur.expect_end();
    return maps;
}

// -------------------------------------------------------------------- PGM16

void write_pgm16(const std::string& path, const RealImage& img) {
    if (img.height <= 0 || img.width <= 0) {
        throw InvalidInputError("write_pgm16: non-positive dimension");
    }
    double maxval = 0.0;
    for (double v : img.data) maxval = std::max(maxval, v);
    double scale = maxval > 0.0 ? 65535.0 / maxval : 0.0;

    std::ostringstream header;
    header << "P5\n" << img.width << " " << img.height << "\n65535\n";
    std::string hs = header.str();

    std::vector<uint8_t> buf;
    buf.reserve(hs.size() + img.data.size() * 2);
    put_bytes(buf, hs.data(), hs.size());
    for (double v : img.data) {
        double clamped = std::min(std::max(v, 0.0), maxval);
        uint16_t q = static_cast<uint16_t>(std::lround(clamped * scale));
        buf.push_back(static_cast<uint8_t>(q >> 8)); // big-endian per PGM spec
        buf.push_back(static_cast<uint8_t>(q & 0xFF));
    }
    write_file(path, buf);
}

RealImage read_pgm16(const std::string& path) {
    std::vector<uint8_t> raw = read_file(path);
    size_t pos = 0;
    auto skip_ws = [&]() {
        while (pos < raw.size()) {
            if (std::isspace(raw[pos])) {
                ++pos;
            } else if (raw[pos] == '#') { // comment to end of line
                while (pos < raw.size() && raw[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
    };
    auto token = [&](const char* what) -> long {
        skip_ws();
        size_t start = pos;
        while (pos < raw.size() && std::isdigit(raw[pos])) ++pos;
        if (pos == start) {
            throw DataFormatError(DataFormatError::Kind::bad_field,
                                  path + ": expected integer for " +
                                      std::string(what));
        }
        return std::stol(std::string(raw.begin() + static_cast<ptrdiff_t>(start),
                                     raw.begin() + static_cast<ptrdiff_t>(pos)));
    };

    if (raw.size() < 2 || raw[0] != 'P' || raw[1] != '5') {
        throw DataFormatError(DataFormatError::Kind::bad_magic,
                              path + ": not a binary PGM (missing P5)");
    }
    pos = 2;
    long width = token("width");
    long height = token("height");
    long maxv = token("maxval");
    if (width <= 0 || height <= 0) {
        throw DataFormatError(DataFormatError::Kind::bad_field,
                              path + ": invalid PGM dimensions");
    }
    if (maxv != 65535) {
        throw DataFormatError(DataFormatError::Kind::bad_field,
                              path + ": expected 16-bit PGM (maxval 65535), got " +
                                  std::to_string(maxv));
    }
    if (pos >= raw.size() || !std::isspace(raw[pos])) {
        throw DataFormatError(DataFormatError::Kind::bad_field,
                              path + ": malformed PGM header");
    }
    ++pos; // single whitespace after maxval

    size_t n = static_cast<size_t>(width) * static_cast<size_t>(height);
    if (raw.size() - pos < n * 2) {
        throw DataFormatError(DataFormatError::Kind::truncated,
                              path + ": truncated PGM pixel data");
    }
    RealImage img(static_cast<int>(height), static_cast<int>(width));
    for (size_t i = 0; i < n; ++i) {
        uint16_t q = static_cast<uint16_t>((raw[pos] << 8) | raw[pos + 1]);
        pos += 2;
        img.data[i] = static_cast<double>(q) / 65535.0;
    }
    return img;
}

// -------------------------------------------------------------------- CRC32

uint32_t crc32_ieee(const void* data, size_t len, uint32_t seed) {
    static const std::array<uint32_t, 256> table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) {
                c = (c & 1u) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
            }
            t[i] = c;
        }
        return t;
    }();
    uint32_t crc = seed ^ 0xFFFFFFFFu;
    const uint8_t* p = static_cast<const uint8_t*>(data);
    for (size_t i = 0; i < len; ++i) {
        crc = table[(crc ^ p[i]) & 0xFFu] ^ (crc >> 8);
    }
    return crc ^ 0xFFFFFFFFu;
}

// -------------------------------------------------------------------- CKPT1

namespace {

std::string canonical_arch_text(const std::map<std::string, std::string>& arch) {
    std::ostringstream os;
    for (const auto& [k, v] : arch) { // std::map iterates in sorted key order
        if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos ||
            v.find('\n') != std::string::npos) {
            throw InvalidInputError("checkpoint arch key/value must not contain '=' in key or newlines");
        }
        os << k << "=" << v << "\n";
    }
    return os.str();
}

void put_tensor_record(std::vector<uint8_t>& buf, const NamedTensor& rec) {
    put_u32(buf, static_cast<uint32_t>(rec.name.size()));
    put_bytes(buf, rec.name.data(), rec.name.size());
    put_u8(buf, 4); // ndims, always NCHW
    put_u32(buf, static_cast<uint32_t>(rec.value.n));
    put_u32(buf, static_cast<uint32_t>(rec.value.c));
    put_u32(buf, static_cast<uint32_t>(rec.value.h));
    put_u32(buf, static_cast<uint32_t>(rec.value.w));
    for (double v : rec.value.data) put_f64(buf, v);
}

NamedTensor get_tensor_record(Cursor& cur) {
    uint32_t name_len = cur.u32("record name length");
    if (name_len > 4096) {
        throw DataFormatError(DataFormatError::Kind::bad_field,
                              cur.path() + ": unreasonable record name length " +
                                  std::to_string(name_len));
    }
    NamedTensor rec;
    rec.name = cur.str(name_len, "record name");
    uint8_t ndims = cur.u8("record ndims");
    if (ndims != 4) {
        throw DataFormatError(DataFormatError::Kind::bad_field,
                              cur.path() + ": record '" + rec.name +
                                  "' has ndims " + std::to_string(ndims) +
                                  ", expected 4");
    }
    uint32_t dims[4];
    for (uint32_t& d : dims) {
        d = cur.u32("record dim");
        checked_dim(d, "record dimension", cur.path());
    }
    size_t numel = static_cast<size_t>(dims[0]) * dims[1] * dims[2] * dims[3];
    if (numel > (1u << 28)) {
        throw DataFormatError(DataFormatError::Kind::bad_field,
                              cur.path() + ": record '" + rec.name +
                                  "' is unreasonably large");
    }
    rec.value = Tensor(static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                       static_cast<int>(dims[2]), static_cast<int>(dims[3]));
    cur.need(numel * 8, "record data");
    for (size_t i = 0; i < numel; ++i) rec.value.data[i] = cur.f64("record value");
    return rec;
}

} // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::vector<uint8_t> buf;
    put_bytes(buf, "CKPT", 4);
    put_u32(buf, ck.version);

    std::string arch = canonical_arch_text(ck.arch);
    put_u32(buf, static_cast<uint32_t>(arch.size()));
    put_bytes(buf, arch.data(), arch.size());

    put_u32(buf, static_cast<uint32_t>(ck.params.size()));
    for (const NamedTensor& rec : ck.params) put_tensor_record(buf, rec);

    put_u32(buf, static_cast<uint32_t>(ck.opt_state.size()));
    for (const NamedTensor& rec : ck.opt_state) put_tensor_record(buf, rec);

    uint32_t crc = crc32_ieee(buf.data(), buf.size());
    put_u32(buf, crc);
    write_file(path, buf);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::vector<uint8_t> raw = read_file(path);
    if (raw.size() < 4) {
        throw DataFormatError(DataFormatError::Kind::truncated,
                              path + ": file shorter than a checkpoint magic");
    }
    // Validate the trailing CRC before parsing anything beyond the magic.
    Cursor cur(raw, path);
    cur.expect_magic("CKPT");
    if (raw.size() < 8) {
        throw DataFormatError(DataFormatError::Kind::truncated,
                              path + ": missing checkpoint CRC");
    }
    uint32_t stored = static_cast<uint32_t>(raw[raw.size() - 4]) |
                      (static_cast<uint32_t>(raw[raw.size() - 3]) << 8) |
                      (static_cast<uint32_t>(raw[raw.size() - 2]) << 16) |
                      (static_cast<uint32_t>(raw[raw.size() - 1]) << 24);
    uint32_t actual = crc32_ieee(raw.data(), raw.size() - 4);
    if (stored != actual) {
        char msg[96];
        std::snprintf(msg, sizeof(msg), "checksum mismatch (stored %08X, computed %08X)",
                      stored, actual);
        throw DataFormatError(DataFormatError::Kind::bad_crc, path + ": " + msg);
    }

    Checkpoint ck;
    ck.version = cur.u32("version");
    if (ck.version != 1) {
        throw DataFormatError(DataFormatError::Kind::bad_version,
                              path + ": unsupported checkpoint version " +
                                  std::to_string(ck.version));
    }

    uint32_t arch_len = cur.u32("arch length");
    std::string arch_text = cur.str(arch_len, "arch text");
    size_t line_start = 0;
    while (line_start < arch_text.size()) {
        size_t nl = arch_text.find('\n', line_start);
        if (nl == std::string::npos) {
            throw DataFormatError(DataFormatError::Kind::bad_field,
                                  path + ": arch text not newline-terminated");
        }
        std::string line = arch_text.substr(line_start, nl - line_start);
        size_t eq = line.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw DataFormatError(DataFormatError::Kind::bad_field,
                                  path + ": malformed arch line '" + line + "'");
        }
        ck.arch[line.substr(0, eq)] = line.substr(eq + 1);
        line_start = nl + 1;
    }

    uint32_t n_params = cur.u32("parameter count");
    ck.params.reserve(n_params);
    for (uint32_t i = 0; i < n_params; ++i) ck.params.push_back(get_tensor_record(cur));

    uint32_t n_opt = cur.u32("optimizer record count");
    ck.opt_state.reserve(n_opt);
    for (uint32_t i = 0; i < n_opt; ++i) ck.opt_state.push_back(get_tensor_record(cur));

    cur.u32("crc"); // already validated above; consume it
    cur.expect_end();
    return ck;
}

Checkpoint make_checkpoint(const ParamStore& ps,
                           const std::map<std::string, std::string>& arch) {
    Checkpoint ck;
    ck.arch = arch;
    for (const Parameter* param : ps.all()) { // name-sorted
        ck.params.push_back({param->name, param->value});
    }
    return ck;
}

void load_into_store(const Checkpoint& ck, ParamStore& ps) {
    for (const NamedTensor& rec : ck.params) {
        if (ps.has(rec.name)) {
            Parameter& p = ps.get(rec.name);
            if (!p.value.same_shape(rec.value)) {
                throw DataFormatError(DataFormatError::Kind::bad_field,
                                      "checkpoint parameter '" + rec.name +
                                          "' shape mismatch with existing parameter");
            }
            p.value = rec.value;
        } else {
            ps.create(rec.name, rec.value);
        }
    }
}

} // namespace mri
