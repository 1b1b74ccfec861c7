#pragma once

// Umbrella header.

#include "clad/checkpoint.hpp"
#include "clad/classifier.hpp"
#include "clad/config.hpp"
#include "clad/dataset.hpp"
#include "clad/denoiser.hpp"
#include "clad/diffusion.hpp"
#include "clad/error.hpp"
#include "clad/grad_check.hpp"
#include "clad/losses.hpp"
#include "clad/lr_schedule.hpp"
#include "clad/manifest.hpp"
#include "clad/metrics.hpp"
#include "clad/nn.hpp"
#include "clad/ops.hpp"
#include "clad/param_store.hpp"
#include "clad/pipeline.hpp"
#include "clad/report.hpp"
#include "clad/rng.hpp"
#include "clad/run_config.hpp"
#include "clad/tensor.hpp"
#include "clad/vae.hpp"
