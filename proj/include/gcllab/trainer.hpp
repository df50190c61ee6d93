#pragma once

#include "gcllab/trainer/report.hpp"
#include "gcllab/trainer/trainer.hpp"
