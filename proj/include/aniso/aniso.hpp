#pragma once

/// Anisotropic nonlocal aggregation: all modules.

#include "aniso/analysis.hpp"
#include "aniso/convolution.hpp"
#include "aniso/errors.hpp"
#include "aniso/grid.hpp"
#include "aniso/initial.hpp"
#include "aniso/io.hpp"
#include "aniso/kernels.hpp"
#include "aniso/onedim.hpp"
#include "aniso/particles.hpp"
#include "aniso/quadrature.hpp"
#include "aniso/runs.hpp"
#include "aniso/scheme.hpp"
