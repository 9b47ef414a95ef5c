#pragma once

#include "mmarch/chunk.hpp"
#include "mmarch/error.hpp"
#include "mmarch/holo.hpp"
#include "mmarch/json_io.hpp"
#include "mmarch/metrics.hpp"
#include "mmarch/middle_memory.hpp"
#include "mmarch/model.hpp"
#include "mmarch/predictors.hpp"
#include "mmarch/production.hpp"
#include "mmarch/runtime.hpp"
#include "mmarch/shadow.hpp"
#include "mmarch/trace.hpp"
#include "mmarch/working_memory.hpp"
