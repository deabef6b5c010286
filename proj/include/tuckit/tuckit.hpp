#pragma once

/// Umbrella header: the full tensor-compression toolkit.

#include "tuckit/cost_model.hpp"
#include "tuckit/decompose.hpp"
#include "tuckit/dist_tensor.hpp"
#include "tuckit/eig.hpp"
#include "tuckit/grid.hpp"
#include "tuckit/io.hpp"
#include "tuckit/kernels.hpp"
#include "tuckit/memory.hpp"
#include "tuckit/metrics.hpp"
#include "tuckit/par_decompose.hpp"
#include "tuckit/par_kernels.hpp"
#include "tuckit/preprocess.hpp"
#include "tuckit/sim.hpp"
#include "tuckit/synthetic.hpp"
#include "tuckit/tensor.hpp"
