#pragma once

#include "benim/autodiff.hpp"
#include "benim/blackbox.hpp"
#include "benim/experiment.hpp"
#include "benim/explanation.hpp"
#include "benim/forest.hpp"
#include "benim/io.hpp"
#include "benim/kernel_beran.hpp"
#include "benim/metrics.hpp"
#include "benim/mlp.hpp"
#include "benim/optim.hpp"
#include "benim/parallel.hpp"
#include "benim/rng.hpp"
#include "benim/survbenim.hpp"
#include "benim/survbex.hpp"
#include "benim/survival.hpp"
#include "benim/survlime.hpp"
#include "benim/survnam.hpp"
#include "benim/synth.hpp"
