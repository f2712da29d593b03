#pragma once

#include "semisurv/core.hpp"
#include "semisurv/evaluation.hpp"
#include "semisurv/forest.hpp"
#include "semisurv/forest_io.hpp"
#include "semisurv/io.hpp"
#include "semisurv/semi_supervised.hpp"
