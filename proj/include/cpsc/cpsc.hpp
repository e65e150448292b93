#pragma once

// Umbrella header for the CPSC library.

#include "cpsc/checkpoint.hpp"
#include "cpsc/config.hpp"
#include "cpsc/conformal.hpp"
#include "cpsc/errors.hpp"
#include "cpsc/grad_check.hpp"
#include "cpsc/gsc.hpp"
#include "cpsc/metrics.hpp"
#include "cpsc/model.hpp"
#include "cpsc/objective.hpp"
#include "cpsc/optim.hpp"
#include "cpsc/rng.hpp"
#include "cpsc/rsc.hpp"
#include "cpsc/runner.hpp"
#include "cpsc/synth.hpp"
#include "cpsc/tensor.hpp"
#include "cpsc/trainer.hpp"
