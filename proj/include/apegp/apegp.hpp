#pragma once

#include "apegp/errors.hpp"
#include "apegp/rng.hpp"
#include "apegp/kernel.hpp"
#include "apegp/nelder_mead.hpp"
#include "apegp/gp.hpp"
#include "apegp/design.hpp"
#include "apegp/testfns.hpp"
#include "apegp/metrics.hpp"
#include "apegp/ape.hpp"
