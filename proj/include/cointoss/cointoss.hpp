#pragma once

#include "cointoss/coarse.hpp"
#include "cointoss/config.hpp"
#include "cointoss/cylinders.hpp"
#include "cointoss/error.hpp"
#include "cointoss/gibbs.hpp"
#include "cointoss/io.hpp"
#include "cointoss/kernels.hpp"
#include "cointoss/quota.hpp"
#include "cointoss/spectrum.hpp"
#include "cointoss/transitions.hpp"
#include "cointoss/verify.hpp"
#include "cointoss/weights.hpp"
