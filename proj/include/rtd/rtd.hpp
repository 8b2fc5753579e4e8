#pragma once

#include "rtd/analysis.hpp"
#include "rtd/error.hpp"
#include "rtd/experiments.hpp"
#include "rtd/linalg.hpp"
#include "rtd/netpbm.hpp"
#include "rtd/reshuffle.hpp"
#include "rtd/rng.hpp"
#include "rtd/solver.hpp"
#include "rtd/stego.hpp"
#include "rtd/tensor.hpp"
#include "rtd/tensor_io.hpp"

namespace rtd {
inline constexpr const char* kVersion = "0.1.0";
}
