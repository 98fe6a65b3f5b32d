#pragma once

#include "qaoaml/bench.hpp"
#include "qaoaml/config.hpp"
#include "qaoaml/dense_oracle.hpp"
#include "qaoaml/errors.hpp"
#include "qaoaml/graph.hpp"
#include "qaoaml/kde.hpp"
#include "qaoaml/mlp.hpp"
#include "qaoaml/optim.hpp"
#include "qaoaml/parallel.hpp"
#include "qaoaml/qaoa.hpp"
#include "qaoaml/rl.hpp"
#include "qaoaml/rng.hpp"
