#pragma once

#include <vector>

#include "deqmpi/config.hpp"
#include "deqmpi/image.hpp"

namespace deqmpi {

/// Random smooth-tube phantom: 1-3 quadratic Bezier tubes, 1-3 px wide,
/// blurred and peak-scaled to a uniform draw in [0.5, 1.5].
ImageGrid gen_vessel(const PhantomConfig& spec);

/// Annulus phantom rasterized at 0.1 mm and box-averaged onto the voxel
/// grid. Outer diameter = inner diameter + tube diameter.
ImageGrid gen_torus(const PhantomConfig& spec);

ImageGrid gen_phantom(const PhantomConfig& spec);

/// Deterministic batch: phantom i uses seed base_seed + i.
std::vector<ImageGrid> gen_batch(const PhantomConfig& spec, std::uint64_t base_seed,
                                 std::size_t count);

} // namespace deqmpi
