#pragma once

#include "bavart/backtest.hpp"
#include "bavart/commands.hpp"
#include "bavart/config.hpp"
#include "bavart/data.hpp"
#include "bavart/error.hpp"
#include "bavart/forecast.hpp"
#include "bavart/girf.hpp"
#include "bavart/io.hpp"
#include "bavart/rng.hpp"
#include "bavart/sampler.hpp"
#include "bavart/shrinkage.hpp"
#include "bavart/simulate.hpp"
#include "bavart/sv.hpp"
#include "bavart/tree.hpp"
