#pragma once

#include "sld/analysis.hpp"
#include "sld/descriptor.hpp"
#include "sld/error.hpp"
#include "sld/gridio.hpp"
#include "sld/integrator.hpp"
#include "sld/systems.hpp"
#include "sld/wiener.hpp"
