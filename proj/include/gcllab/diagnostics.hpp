#pragma once

#include "gcllab/diagnostics/diagnostics.hpp"
#include "gcllab/diagnostics/suite.hpp"
