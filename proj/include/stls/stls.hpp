#pragma once

#include "stls/core.hpp"
#include "stls/model.hpp"
#include "stls/lasso.hpp"
#include "stls/stls_alt.hpp"
#include "stls/stls_global.hpp"
#include "stls/wsstls.hpp"
#include "stls/scenarios.hpp"
#include "stls/experiments.hpp"
#include "stls/io.hpp"
