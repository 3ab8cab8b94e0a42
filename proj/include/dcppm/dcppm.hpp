#pragma once

#include "dcppm/coupling.hpp"
#include "dcppm/experiments.hpp"
#include "dcppm/graph.hpp"
#include "dcppm/inference.hpp"
#include "dcppm/io.hpp"
#include "dcppm/model.hpp"
#include "dcppm/parallel.hpp"
#include "dcppm/random.hpp"
#include "dcppm/stats.hpp"
#include "dcppm/tree.hpp"
