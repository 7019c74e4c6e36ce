#pragma once

#include "pfpca/error.hpp"
#include "pfpca/grid_penalty.hpp"
#include "pfpca/rank_one.hpp"
#include "pfpca/selection.hpp"
#include "pfpca/fpca.hpp"
#include "pfpca/spline.hpp"
#include "pfpca/simulation.hpp"
#include "pfpca/io.hpp"
