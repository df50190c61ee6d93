#pragma once

#include "gcllab/evalkit/ablation.hpp"
#include "gcllab/evalkit/probe.hpp"
#include "gcllab/evalkit/wilcoxon.hpp"
