#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mri/autodiff.hpp"
#include "mri/types.hpp"

namespace mri {

/// Contrast tag carried by k-space volumes.
enum class Contrast : uint8_t { t1 = 0, t2 = 1, flair = 2, t1post = 3, synthetic = 255 };

Contrast contrast_from_string(const std::string& name);
std::string to_string(Contrast c);
Contrast contrast_from_byte(uint8_t b);

/// Multi-slice multi-coil complex volume. On-disk layout ("KSP1"): magic,
/// little-endian u32 {coils, height, width, slices}, u8 dtype tag
/// (0 = complex64, 1 = complex128), u8 contrast tag, then interleaved
/// (re, im) samples, slice-major then coil-major then row-major.
struct KspVolume {
    int coils = 0, height = 0, width = 0, slices = 0;
    bool double_precision = true; // dtype tag 1; false -> complex64 on disk
    Contrast contrast = Contrast::synthetic;
    std::vector<cplx> data;

    size_t numel() const {
        return static_cast<size_t>(slices) * coils * height * width;
    }
    cplx& at(int s, int l, int r, int c) {
        return data[((static_cast<size_t>(s) * coils + l) * height + r) * width + c];
    }
    const cplx& at(int s, int l, int r, int c) const {
        return data[((static_cast<size_t>(s) * coils + l) * height + r) * width + c];
    }

    CoilKSpace slice(int s) const;
    void set_slice(int s, const CoilKSpace& k);
    static KspVolume from_image(const ComplexImage& img);  // 1 coil, 1 slice
    static KspVolume from_coils(const CoilKSpace& k);      // 1 slice
    ComplexImage to_image() const;                         // requires 1 coil, 1 slice
};

void write_ksp(const std::string& path, const KspVolume& vol);
KspVolume read_ksp(const std::string& path);

/// MSK1: magic, u32 {height, width, acs_count, acceleration}, then `height`
/// bytes of 0/1 line flags.
void write_mask(const std::string& path, const SamplingMask& mask);
SamplingMask read_mask(const std::string& path);

/// SMP1: KSP1 without the slices and contrast fields.
void write_maps(const std::string& path, const SensitivitySet& maps,
                bool double_precision = true);
SensitivitySet read_maps(const std::string& path);

/// 16-bit big-endian binary PGM, magnitude scaled to [0, 65535] by the
/// per-image maximum. Reading returns values in [0, 1].
void write_pgm16(const std::string& path, const RealImage& img);
RealImage read_pgm16(const std::string& path);

/// Reflected CRC-32 (polynomial 0xEDB88320). crc32_ieee("123456789") is
/// 0xCBF43926. Pass a previous result as `seed` to continue a running CRC.
uint32_t crc32_ieee(const void* data, size_t len, uint32_t seed = 0);

struct NamedTensor {
    std::string name;
    Tensor value;
};

/// CKPT1: magic "CKPT", u32 version, length-prefixed canonical key=value
/// architecture text, name-sorted parameter records, name-sorted optimizer
/// state records, and a trailing CRC32 of everything before it.
struct Checkpoint {
    uint32_t version = 1;
    std::map<std::string, std::string> arch;
    std::vector<NamedTensor> params;
    std::vector<NamedTensor> opt_state;
};

void write_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::string& path);

/// Snapshot every parameter in the store (name-sorted).
Checkpoint make_checkpoint(const ParamStore& ps,
                           const std::map<std::string, std::string>& arch);

/// Create parameters in `ps` from the checkpoint records.
void load_into_store(const Checkpoint& ck, ParamStore& ps);

} // namespace mri
