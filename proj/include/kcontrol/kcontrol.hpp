#pragma once

#include "kcontrol/error.hpp"
#include "kcontrol/rkhs.hpp"
#include "kcontrol/operators.hpp"
#include "kcontrol/propagation.hpp"
#include "kcontrol/costs.hpp"
#include "kcontrol/objective.hpp"
#include "kcontrol/subproblem.hpp"
#include "kcontrol/seeding.hpp"
#include "kcontrol/optimize.hpp"
#include "kcontrol/dataset.hpp"
#include "kcontrol/data.hpp"
#include "kcontrol/heston.hpp"
#include "kcontrol/metrics.hpp"
#include "kcontrol/baseline.hpp"
#include "kcontrol/model_io.hpp"
#include "kcontrol/experiment.hpp"
