// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "affrec/error.hpp"
#include "affrec/rng.hpp"
#include "affrec/parallel.hpp"
#include "affrec/stats.hpp"
#include "affrec/group.hpp"
#include "affrec/measure.hpp"
#include "affrec/recursion.hpp"
#include "affrec/tail.hpp"
#include "affrec/limit_law.hpp"
#include "affrec/spectral.hpp"
#include "affrec/verification.hpp"
#include "affrec/config.hpp"
