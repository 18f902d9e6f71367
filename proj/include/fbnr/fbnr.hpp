#pragma once

#include "fbnr/experiment.hpp"
#include "fbnr/geometry.hpp"
#include "fbnr/initguess.hpp"
#include "fbnr/mesh.hpp"
#include "fbnr/metrics.hpp"
#include "fbnr/parallel.hpp"
#include "fbnr/positioning.hpp"
#include "fbnr/reconstruct.hpp"
#include "fbnr/surfaces.hpp"
#include "fbnr/truncation.hpp"
#include "fbnr/vtk_io.hpp"
