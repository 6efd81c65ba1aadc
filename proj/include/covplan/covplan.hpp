#pragma once

#include "covplan/config.hpp"
#include "covplan/coverage.hpp"
#include "covplan/dynamics.hpp"
#include "covplan/environment.hpp"
#include "covplan/eval.hpp"
#include "covplan/grid_map.hpp"
#include "covplan/heuristic.hpp"
#include "covplan/io.hpp"
#include "covplan/observation.hpp"
#include "covplan/protocol.hpp"
#include "covplan/render.hpp"
#include "covplan/reward.hpp"
#include "covplan/rng.hpp"
#include "covplan/safety.hpp"
#include "covplan/trainer.hpp"
