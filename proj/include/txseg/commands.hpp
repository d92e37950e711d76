#pragma once

#include "txseg/image.hpp"
#include "txseg/manifold.hpp"

namespace txseg {

enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitIo = 2, kExitNumerical = 3 };

/// Grid montage of all bank filters: ceil(sqrt(K)) columns, 1-pixel black separators,
/// each tile mapped so 0 is mid-gray and +-max|coeff| black/white.
RawRaster filter_montage(const FilterBank& bank);

/// Entry point of the txseg command-line tool.
int run_cli(int argc, char** argv);

}  // namespace txseg
