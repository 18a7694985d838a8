#pragma once

#include "mri/types.hpp"

namespace mri {

/// Relative floor under which a pixel counts as background: pixels with
/// coil RSS <= eps_norm_fraction * max(RSS) get zero maps.
inline constexpr double kEpsNormFraction = 1e-8;

/// Initial sensitivity maps from the fully-sampled low-frequency (ACS)
/// region: keep only ACS lines per coil (Hann-apodized across the band when
/// `apodize`), inverse-transform, and divide each coil image by the RSS.
/// Requires mask.acs_count >= 2.
SensitivitySet estimate_maps_lowfreq(const CoilKSpace& y, const SamplingMask& mask,
                                     bool apodize = true);

/// Support mask of a sensitivity set: 1 where RSS exceeds the floor.
std::vector<uint8_t> map_support(const SensitivitySet& maps);

} // namespace mri
