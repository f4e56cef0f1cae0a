#pragma once

#include "a2c.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "metrics.hpp"
#include "nn.hpp"
#include "placement.hpp"
#include "ran.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "scheduler.hpp"
#include "sim.hpp"
#include "traffic.hpp"
