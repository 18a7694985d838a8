#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "mri/errors.hpp"

namespace mri {

using cplx = std::complex<double>;

/// H x W complex anatomical image (row-major).
struct ComplexImage {
    int height = 0;
    int width = 0;
    std::vector<cplx> data;

    ComplexImage() = default;
    ComplexImage(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w) {}

    size_t numel() const { return static_cast<size_t>(height) * width; }
    cplx& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }
    const cplx& at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
};

/// H x W real image (row-major). Used for magnitudes, RSS combines, metrics.
struct RealImage {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    RealImage() = default;
    RealImage(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w, 0.0) {}

    size_t numel() const { return static_cast<size_t>(height) * width; }
    double& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }
    const double& at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
};

/// L x H x W complex stack: per-coil k-space or per-coil images (coil-major).
struct CoilKSpace {
    int coils = 0;
    int height = 0;
    int width = 0;
    std::vector<cplx> data;

    CoilKSpace() = default;
    CoilKSpace(int l, int h, int w)
        : coils(l), height(h), width(w), data(static_cast<size_t>(l) * h * w) {}

    size_t numel() const { return static_cast<size_t>(coils) * height * width; }
    cplx* coil(int l) { return data.data() + static_cast<size_t>(l) * height * width; }
    const cplx* coil(int l) const { return data.data() + static_cast<size_t>(l) * height * width; }
    cplx& at(int l, int r, int c) {
        return data[(static_cast<size_t>(l) * height + r) * width + c];
    }
    const cplx& at(int l, int r, int c) const {
        return data[(static_cast<size_t>(l) * height + r) * width + c];
    }
};

/// Cartesian 1D line mask along the phase-encode (row) dimension,
/// with a contiguous fully-sampled ACS block at the center.
struct SamplingMask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> line_selected; // length == height, values 0/1
    int acs_count = 0;
    int acceleration = 1;

    bool selected(int row) const { return line_selected[static_cast<size_t>(row)] != 0; }
    int selected_count() const {
        int n = 0;
        for (uint8_t v : line_selected) n += v;
        return n;
    }
    /// First row of the centered ACS block: [acs_first(), acs_first()+acs_count).
    int acs_first() const { return height / 2 - acs_count / 2; }
};

/// L x H x W complex coil sensitivity maps, normalized so that
/// sum_l |S_l|^2 == 1 wherever the coil RSS exceeds the support floor.
struct SensitivitySet {
    int coils = 0;
    int height = 0;
    int width = 0;
    std::vector<cplx> data;

    SensitivitySet() = default;
    SensitivitySet(int l, int h, int w)
        : coils(l), height(h), width(w), data(static_cast<size_t>(l) * h * w) {}

    size_t numel() const { return static_cast<size_t>(coils) * height * width; }
    cplx* coil(int l) { return data.data() + static_cast<size_t>(l) * height * width; }
    const cplx* coil(int l) const { return data.data() + static_cast<size_t>(l) * height * width; }
    cplx& at(int l, int r, int c) {
        return data[(static_cast<size_t>(l) * height + r) * width + c];
    }
    const cplx& at(int l, int r, int c) const {
        return data[(static_cast<size_t>(l) * height + r) * width + c];
    }
};

/// The composite measurement operator: per coil, mask . F . S_l.
struct ForwardOperator {
    SamplingMask mask;
    SensitivitySet maps;

    void check_consistent() const {
        if (mask.height != maps.height || mask.width != maps.width)
            throw InvalidInputError("forward operator: mask and maps shapes disagree");
    }
};

} // namespace mri
