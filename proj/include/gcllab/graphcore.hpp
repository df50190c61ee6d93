#pragma once

#include "gcllab/graphcore/batch.hpp"
#include "gcllab/graphcore/graph.hpp"
#include "gcllab/graphcore/io.hpp"
#include "gcllab/graphcore/normalize.hpp"
#include "gcllab/graphcore/split.hpp"
#include "gcllab/graphcore/synthetic.hpp"
