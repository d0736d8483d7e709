#pragma once

#include "chiralflow/error.hpp"
#include "chiralflow/grid.hpp"
#include "chiralflow/spectral.hpp"
#include "chiralflow/model.hpp"
#include "chiralflow/disorder.hpp"
#include "chiralflow/quadrature.hpp"
#include "chiralflow/analytic.hpp"
#include "chiralflow/propagate.hpp"
#include "chiralflow/ensemble.hpp"
#include "chiralflow/device.hpp"
