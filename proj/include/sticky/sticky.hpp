#pragma once

#include "sticky/cells.hpp"
#include "sticky/coalescing.hpp"
#include "sticky/covariance.hpp"
#include "sticky/error.hpp"
#include "sticky/exits.hpp"
#include "sticky/kernels.hpp"
#include "sticky/martingale.hpp"
#include "sticky/npoint.hpp"
#include "sticky/path.hpp"
#include "sticky/rng.hpp"
#include "sticky/stats.hpp"
#include "sticky/sticky_ref.hpp"
#include "sticky/theta.hpp"
#include "sticky/timechange.hpp"
