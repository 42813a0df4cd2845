#pragma once

// Umbrella header.

#include "etpa/core.hpp"
#include "etpa/forward_model.hpp"
#include "etpa/montecarlo.hpp"
#include "etpa/linear_fit.hpp"
#include "etpa/estimators.hpp"
#include "etpa/hom_fit.hpp"
#include "etpa/config.hpp"
#include "etpa/csv_io.hpp"
#include "etpa/analysis.hpp"
#include "etpa/harness.hpp"
