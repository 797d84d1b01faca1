#pragma once

#include "dust/bench.hpp"
#include "dust/common.hpp"
#include "dust/csv.hpp"
#include "dust/dual.hpp"
#include "dust/model.hpp"
#include "dust/quadratic.hpp"
#include "dust/segmenter.hpp"
#include "dust/simgen.hpp"
#include "dust/stat_store.hpp"
