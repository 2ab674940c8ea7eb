#pragma once

// Umbrella header.

#include "dynlab/cocycle.hpp"
#include "dynlab/config.hpp"
#include "dynlab/disk_flow.hpp"
#include "dynlab/ergodic.hpp"
#include "dynlab/fd.hpp"
#include "dynlab/flatness.hpp"
#include "dynlab/geometry.hpp"
#include "dynlab/linalg.hpp"
#include "dynlab/lyapunov.hpp"
#include "dynlab/perturbation.hpp"
#include "dynlab/pipelines.hpp"
#include "dynlab/report.hpp"
#include "dynlab/rng.hpp"
#include "dynlab/slicing.hpp"
#include "dynlab/slowed_map.hpp"
#include "dynlab/stats.hpp"
#include "dynlab/suspension.hpp"
#include "dynlab/toral.hpp"
