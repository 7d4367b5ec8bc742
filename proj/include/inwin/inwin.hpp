#pragma once

#include "inwin/attention.hpp"
#include "inwin/dit_block.hpp"
#include "inwin/flops.hpp"
#include "inwin/fraction.hpp"
#include "inwin/grid.hpp"
#include "inwin/latent.hpp"
#include "inwin/linalg.hpp"
#include "inwin/pipeline.hpp"
#include "inwin/scheduler.hpp"
#include "inwin/window_mask.hpp"
