#pragma once

#include "switcheff/dataset.hpp"
#include "switcheff/errors.hpp"
#include "switcheff/estimators.hpp"
#include "switcheff/glm.hpp"
#include "switcheff/inference.hpp"
#include "switcheff/model_spec.hpp"
#include "switcheff/rng.hpp"
#include "switcheff/simulation.hpp"
#include "switcheff/switcher_effect.hpp"
#include "switcheff/version.hpp"
