#pragma once

#include <map>
#include <string>
#include <vector>

#include "mri/autodiff.hpp"

namespace mri {

/// Multi-scale wavelet CNN image corrector. Downsampling is an orthonormal
/// Haar layer (4x channel expansion per level), upsampling its inverse, with
/// additive encoder skips and a zero-initialized linear final conv so the
/// network starts as the zero map.
struct MwcnnConfig {
    int scales = 3;
    std::vector<int> filters = {32, 64, 128};
    int blocks_per_scale = 2;
    int kernel = 3;

    void validate() const;
};

/// Small encoder-decoder refiner applied per coil with shared weights
/// (the coil index rides on the batch axis).
struct UnetConfig {
    int depth = 3;
    int base_filters = 8;
    int kernel = 3;

    void validate() const;
};

/// Unrolled cross-domain reconstruction network: a buffer of complex iterates
/// updated by an MWCNN corrector fed with the data-consistency backprojection,
/// with optional one-shot sensitivity-map refinement before unrolling.
struct XpdnetConfig {
    int n_unrolled = 6;
    int buffer_size = 5;
    bool refine_maps = false;
    double alpha_init = 0.5;
    MwcnnConfig mwcnn;
    UnetConfig unet;

    void validate() const;
};

// --- parameter initialization (He-scaled normals, zero-init final convs) ---
void init_mwcnn_params(ParamStore& ps, const std::string& prefix, const MwcnnConfig& cfg,
                       int in_channels, int out_channels, Rng& rng);
void init_unet_params(ParamStore& ps, const std::string& prefix, const UnetConfig& cfg,
                      int in_channels, int out_channels, Rng& rng);
void init_xpdnet_params(ParamStore& ps, const XpdnetConfig& cfg, uint64_t seed);

// --- graph builders (parameters must already exist in the store) -----------
NodeId mwcnn_forward_graph(Tape& t, ParamStore& ps, const std::string& prefix, NodeId x,
                           const MwcnnConfig& cfg, int out_channels);
NodeId unet_forward_graph(Tape& t, ParamStore& ps, const std::string& prefix, NodeId x,
                          const UnetConfig& cfg, int out_channels);

/// Residual refinement + support-masked renormalization; the result always
/// satisfies the sensitivity normalization invariant.
NodeId refine_maps_graph(Tape& t, ParamStore& ps, const std::string& prefix, NodeId maps0,
                         const std::vector<uint8_t>& support, const UnetConfig& cfg);

struct XpdnetGraph {
    NodeId output; // 1 x 2 x H x W complex pair
    NodeId maps;   // L x 2 x H x W (refined when cfg.refine_maps)
};

/// Build the full unrolled graph. `buffer_tail` optionally overrides the
/// replicated buffer slots 2..buffer_size (shape 1 x 2(buffer_size-1) x H x W);
/// used by tests probing replica invariance.
XpdnetGraph xpdnet_forward_graph(Tape& t, ParamStore& ps, const XpdnetConfig& cfg,
                                 const CoilKSpace& y, const SamplingMask& mask,
                                 const SensitivitySet& maps,
                                 const Tensor* buffer_tail = nullptr);

// --- eager wrappers ---------------------------------------------------------
ComplexImage xpdnet_forward(const CoilKSpace& y, const SamplingMask& mask,
                            const SensitivitySet& maps, const XpdnetConfig& cfg, ParamStore& ps);
SensitivitySet unet_refine_maps(const SensitivitySet& maps0, const UnetConfig& cfg, ParamStore& ps);

// --- architecture serialization (checkpoint header key=value block) ---------
std::map<std::string, std::string> encode_arch(const XpdnetConfig& cfg);
XpdnetConfig decode_arch(const std::map<std::string, std::string>& arch);

} // namespace mri
