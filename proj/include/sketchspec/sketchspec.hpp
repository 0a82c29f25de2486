#pragma once

// Umbrella header: the whole library.

#include "sketchspec/error.hpp"
#include "sketchspec/rng.hpp"
#include "sketchspec/dense_matrix.hpp"
#include "sketchspec/linalg.hpp"
#include "sketchspec/sketch.hpp"
#include "sketchspec/amm.hpp"
#include "sketchspec/regression.hpp"
#include "sketchspec/lowrank.hpp"
#include "sketchspec/stats.hpp"
#include "sketchspec/chernoff_lab.hpp"
#include "sketchspec/generator.hpp"
#include "sketchspec/matrix_io.hpp"
#include "sketchspec/parallel.hpp"
#include "sketchspec/serialize.hpp"
#include "sketchspec/calibration.hpp"
#include "sketchspec/experiment.hpp"
