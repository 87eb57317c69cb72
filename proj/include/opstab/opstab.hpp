#pragma once

#include "opstab/approximants.hpp"
#include "opstab/dense.hpp"
#include "opstab/error.hpp"
#include "opstab/io.hpp"
#include "opstab/lab.hpp"
#include "opstab/measure.hpp"
#include "opstab/operator.hpp"
#include "opstab/space.hpp"
#include "opstab/spectral.hpp"
#include "opstab/svg.hpp"
#include "opstab/vector.hpp"
