#pragma once

#include "minivem/geometry.hpp"
#include "minivem/mesh_generators.hpp"
#include "minivem/mesh_io.hpp"
#include "minivem/polybasis.hpp"
#include "minivem/vemspace.hpp"
#include "minivem/stokes_local.hpp"
#include "minivem/parallel.hpp"
#include "minivem/assembly.hpp"
#include "minivem/analysis.hpp"
