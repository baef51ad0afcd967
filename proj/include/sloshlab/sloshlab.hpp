#pragma once

// Umbrella header for the sloshlab library.

#include "sloshlab/assembly.hpp"
#include "sloshlab/exports.hpp"
#include "sloshlab/field_spec.hpp"
#include "sloshlab/geometry.hpp"
#include "sloshlab/hadamard.hpp"
#include "sloshlab/mesh_io.hpp"
#include "sloshlab/perturbation.hpp"
#include "sloshlab/spectral.hpp"
#include "sloshlab/splitting.hpp"
#include "sloshlab/types.hpp"
