#pragma once

#include "lwfsmc/distfit.hpp"
#include "lwfsmc/error.hpp"
#include "lwfsmc/fsmc.hpp"
#include "lwfsmc/pipeline.hpp"
#include "lwfsmc/quantizer.hpp"
#include "lwfsmc/rng.hpp"
#include "lwfsmc/simulate.hpp"
#include "lwfsmc/synth.hpp"
#include "lwfsmc/trace.hpp"
#include "lwfsmc/validate.hpp"
