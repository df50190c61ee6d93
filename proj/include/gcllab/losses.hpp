#pragma once

#include "gcllab/losses/losses.hpp"
