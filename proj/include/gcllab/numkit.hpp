#pragma once

#include "gcllab/numkit/alloc.hpp"
#include "gcllab/numkit/eig.hpp"
#include "gcllab/numkit/gradcheck.hpp"
#include "gcllab/numkit/matrix.hpp"
#include "gcllab/numkit/ops.hpp"
#include "gcllab/numkit/optim.hpp"
#include "gcllab/numkit/sparse.hpp"
#include "gcllab/numkit/tape.hpp"
