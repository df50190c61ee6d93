#pragma once

#include "gcllab/cli/commands.hpp"
#include "gcllab/cli/config.hpp"
