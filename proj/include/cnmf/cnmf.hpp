#pragma once

#include "cnmf/bench.hpp"
#include "cnmf/conv.hpp"
#include "cnmf/forms.hpp"
#include "cnmf/io.hpp"
#include "cnmf/nnls.hpp"
#include "cnmf/random.hpp"
#include "cnmf/solvers.hpp"
#include "cnmf/synth.hpp"
#include "cnmf/tensor.hpp"
