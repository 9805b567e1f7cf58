#pragma once

#include "jointsched/config.hpp"
#include "jointsched/demand.hpp"
#include "jointsched/error.hpp"
#include "jointsched/experiments.hpp"
#include "jointsched/inner_solver.hpp"
#include "jointsched/loss_model.hpp"
#include "jointsched/loss_rate.hpp"
#include "jointsched/oracle.hpp"
#include "jointsched/rng.hpp"
#include "jointsched/schedulers.hpp"
#include "jointsched/sim_harness.hpp"
#include "jointsched/verification.hpp"
