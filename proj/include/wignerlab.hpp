#pragma once

// Umbrella header for the whole library.

#include "wignerlab/combinat.hpp"
#include "wignerlab/covariance.hpp"
#include "wignerlab/errors.hpp"
#include "wignerlab/freecalc.hpp"
#include "wignerlab/kernels.hpp"
#include "wignerlab/linalg.hpp"
#include "wignerlab/moments.hpp"
#include "wignerlab/parallel.hpp"
#include "wignerlab/poly.hpp"
#include "wignerlab/quadrature.hpp"
#include "wignerlab/rng.hpp"
#include "wignerlab/sim.hpp"
#include "wignerlab/version.hpp"
