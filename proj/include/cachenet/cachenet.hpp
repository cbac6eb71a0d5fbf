#pragma once

#include "cachenet/core.hpp"
#include "cachenet/cost.hpp"
#include "cachenet/demand.hpp"
#include "cachenet/dqn.hpp"
#include "cachenet/neural.hpp"
#include "cachenet/policies.hpp"
#include "cachenet/sim/config.hpp"
#include "cachenet/sim/harness.hpp"
#include "cachenet/tabular_q.hpp"
