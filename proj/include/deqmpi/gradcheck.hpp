#pragma once

#include <cstdint>

#include "deqmpi/deq.hpp"

namespace deqmpi {

/// Outcome of one finite-difference sweep: worst relative error over the
/// coordinates that were checked; coordinates sitting on a ReLU/projection
/// kink (detected by a large second difference) are skipped.
struct FdReport {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;
};

FdReport fd_check_conv2d(std::uint64_t seed);
FdReport fd_check_conv1d(std::uint64_t seed);
FdReport fd_check_elementwise(std::uint64_t seed); // relu / concat / add chain
FdReport fd_check_rdn(std::uint64_t seed);
FdReport fd_check_lc(std::uint64_t seed);

/// Full implicit gradient on a tiny problem: finite differences re-solve the
/// fixed point at theta +- h with tight tolerances.
FdReport fd_check_implicit(std::uint64_t seed);

/// Small dense system matrix with consistent labels for unit tests.
SystemMatrix make_toy_sm(std::size_t grid_h, std::size_t grid_w, std::size_t complex_rows,
                         std::uint64_t seed, double row_norm = 1.5);

} // namespace deqmpi
