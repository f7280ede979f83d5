#pragma once

#include "baselines.hpp"
#include "experiment.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "offline.hpp"
#include "online.hpp"
#include "oracle.hpp"
#include "trace_io.hpp"
