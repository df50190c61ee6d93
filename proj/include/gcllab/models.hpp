#pragma once

#include "gcllab/models/encoders.hpp"
#include "gcllab/models/params.hpp"
#include "gcllab/models/spec.hpp"
