#pragma once

#include "limbosim/compare.hpp"
#include "limbosim/core.hpp"
#include "limbosim/detect.hpp"
#include "limbosim/engine.hpp"
#include "limbosim/integrate.hpp"
#include "limbosim/model.hpp"
#include "limbosim/models.hpp"
#include "limbosim/trace_io.hpp"
