#pragma once

#include "walkoff/error.hpp"
#include "walkoff/rng.hpp"
#include "walkoff/csv.hpp"
#include "walkoff/kv_config.hpp"
#include "walkoff/base_out.hpp"
#include "walkoff/retrosheet.hpp"
#include "walkoff/season_stats.hpp"
#include "walkoff/cohort.hpp"
#include "walkoff/glm.hpp"
#include "walkoff/causal.hpp"
#include "walkoff/synth.hpp"
#include "walkoff/extra_innings.hpp"
