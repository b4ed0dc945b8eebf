#pragma once

#include <cstdint>
#include <vector>

#include "irib/degrade/degradation.hpp"

namespace irib::harness {

/// One procedural HQ image [1,3,size,size] in [0,1]: smooth colour gradient,
/// band-limited texture, ellipses and polygons. Deterministic per seed.
Tensor synth_image(std::size_t size, std::uint64_t seed);

/// n images, item i seeded by derive_seed(seed, i).
std::vector<Tensor> synth_dataset(std::size_t n, std::size_t size, std::uint64_t seed);

struct Pair {
  Tensor x_elq;
  Tensor x_lq;
  Tensor z_hq;
  degrade::DegradationManifest lq_manifest;
  degrade::DegradationManifest elq_manifest;
};

/// x_lq and x_elq degrade the same HQ image with independently seeded LQ and
/// ELQ manifests.
std::vector<Pair> make_pairs(const std::vector<Tensor>& hq, const degrade::DegradationPreset& lq,
                             const degrade::DegradationPreset& elq, std::uint64_t seed);

/// Recomputes a pair's images from its HQ image and recorded manifests.
Pair replay_pair(const Tensor& hq, const degrade::DegradationManifest& lq_manifest,
                 const degrade::DegradationManifest& elq_manifest);

}  // namespace irib::harness
