#pragma once

#include "qbound/types.hpp"
#include "qbound/linalg.hpp"
#include "qbound/geometry.hpp"
#include "qbound/boundary.hpp"
#include "qbound/operators.hpp"
#include "qbound/spectra.hpp"
#include "qbound/dynamics.hpp"
#include "qbound/config.hpp"
#include "qbound/io.hpp"
#include "qbound/scenarios.hpp"
