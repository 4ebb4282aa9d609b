#pragma once

#include "klex/rng.hpp"
#include "klex/topology.hpp"
#include "klex/message.hpp"
#include "klex/protocol.hpp"
#include "klex/appmodel.hpp"
#include "klex/simnet.hpp"
#include "klex/faults.hpp"
#include "klex/monitor.hpp"
#include "klex/scenarios.hpp"
#include "klex/experiment.hpp"
