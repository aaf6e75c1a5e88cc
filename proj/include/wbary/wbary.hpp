#pragma once

#include "wbary/barycenter.hpp"
#include "wbary/distributions.hpp"
#include "wbary/errors.hpp"
#include "wbary/io.hpp"
#include "wbary/measures.hpp"
#include "wbary/numeric.hpp"
#include "wbary/order_stats.hpp"
#include "wbary/simulation.hpp"
#include "wbary/smoothing.hpp"
#include "wbary/theory.hpp"
