#pragma once

// Umbrella header: the whole discrete-to-continuous toolkit.

#include "plode/analysis.hpp"
#include "plode/convert.hpp"
#include "plode/dynamics.hpp"
#include "plode/errors.hpp"
#include "plode/io.hpp"
#include "plode/linalg.hpp"
#include "plode/log.hpp"
#include "plode/model.hpp"
