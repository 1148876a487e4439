#pragma once

#include "analysis.hpp"
#include "errors.hpp"
#include "functionals.hpp"
#include "grid.hpp"
#include "initial.hpp"
#include "integrator.hpp"
#include "model.hpp"
