#pragma once

// Umbrella header for the stealth data-injection attack design library.

#include "sdia/attack_correlated.hpp"
#include "sdia/attack_independent.hpp"
#include "sdia/builtin_cases.hpp"
#include "sdia/detection.hpp"
#include "sdia/errors.hpp"
#include "sdia/experiment.hpp"
#include "sdia/gaussian.hpp"
#include "sdia/greedy_trace.hpp"
#include "sdia/grid_case.hpp"
#include "sdia/linalg.hpp"
#include "sdia/observation_model.hpp"
#include "sdia/random.hpp"
