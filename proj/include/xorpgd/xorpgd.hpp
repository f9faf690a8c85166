#pragma once

#include "baseline_samplers.hpp"
#include "factor_graph.hpp"
#include "numerics.hpp"
#include "optimizers.hpp"
#include "problems.hpp"
#include "xor_sampling.hpp"
