#pragma once

// Library umbrella. The CLI layer (spinhj/cli.hpp) additionally needs
// nlohmann/json and is not included here.

#include "spinhj/cascade.hpp"
#include "spinhj/cone.hpp"
#include "spinhj/error.hpp"
#include "spinhj/freeenergy.hpp"
#include "spinhj/hjfd.hpp"
#include "spinhj/hopflax.hpp"
#include "spinhj/model.hpp"
#include "spinhj/quadrature.hpp"
#include "spinhj/random.hpp"
#include "spinhj/verify.hpp"
