#pragma once

#include "core.hpp"
#include "harness.hpp"
#include "lower_bound.hpp"
#include "lp.hpp"
#include "policy.hpp"
#include "power.hpp"
#include "rd_optimizer.hpp"
#include "region.hpp"
#include "side_info.hpp"
