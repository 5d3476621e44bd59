#pragma once

#include "sketchsolve/analysis.hpp"
#include "sketchsolve/common.hpp"
#include "sketchsolve/fwht.hpp"
#include "sketchsolve/io/csv.hpp"
#include "sketchsolve/io/matrix_market.hpp"
#include "sketchsolve/io/svg.hpp"
#include "sketchsolve/moments.hpp"
#include "sketchsolve/parallel.hpp"
#include "sketchsolve/precond.hpp"
#include "sketchsolve/problem.hpp"
#include "sketchsolve/rng.hpp"
#include "sketchsolve/sketch.hpp"
#include "sketchsolve/solvers.hpp"
#include "sketchsolve/tuning.hpp"
