#pragma once

#include "agfm/adam.hpp"
#include "agfm/checkpoint.hpp"
#include "agfm/gradients.hpp"
#include "agfm/graph.hpp"
#include "agfm/graph_io.hpp"
#include "agfm/inference.hpp"
#include "agfm/linalg.hpp"
#include "agfm/losses.hpp"
#include "agfm/metrics.hpp"
#include "agfm/model.hpp"
#include "agfm/pretrain.hpp"
#include "agfm/prompt.hpp"
#include "agfm/rng.hpp"
#include "agfm/svd.hpp"
#include "agfm/synth.hpp"
#include "agfm/tensor.hpp"
