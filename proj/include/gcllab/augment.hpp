#pragma once

#include "gcllab/augment/augment.hpp"
