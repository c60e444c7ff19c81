#pragma once

#include "esrs/error.hpp"
#include "esrs/index_set.hpp"
#include "esrs/lattice.hpp"
#include "esrs/blim.hpp"
#include "esrs/user_model.hpp"
#include "esrs/geo.hpp"
#include "esrs/planner.hpp"
#include "esrs/surmise.hpp"
#include "esrs/feedback.hpp"
#include "esrs/dataset.hpp"
#include "esrs/pipeline.hpp"
