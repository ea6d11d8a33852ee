#pragma once

#include "netlavarx/error.hpp"
#include "netlavarx/numerics.hpp"
#include "netlavarx/data.hpp"
#include "netlavarx/io.hpp"
#include "netlavarx/partition.hpp"
#include "netlavarx/simulator.hpp"
#include "netlavarx/model.hpp"
#include "netlavarx/estimator.hpp"
#include "netlavarx/evaluation.hpp"
#include "netlavarx/model_io.hpp"
#include "netlavarx/model_selection.hpp"
#include "netlavarx/network.hpp"
#include "netlavarx/version.hpp"
