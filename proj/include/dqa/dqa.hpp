#pragma once

#include "dqa/beta.hpp"
#include "dqa/error.hpp"
#include "dqa/evolution.hpp"
#include "dqa/harness.hpp"
#include "dqa/metrics.hpp"
#include "dqa/models.hpp"
#include "dqa/noise.hpp"
#include "dqa/parallel.hpp"
#include "dqa/partition.hpp"
#include "dqa/pauli.hpp"
#include "dqa/problem.hpp"
#include "dqa/rng.hpp"
#include "dqa/state.hpp"
#include "dqa/svg.hpp"
#include "dqa/version.hpp"
