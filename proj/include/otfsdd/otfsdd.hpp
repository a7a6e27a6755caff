// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "otfsdd/channel.hpp"
#include "otfsdd/common.hpp"
#include "otfsdd/dataset_io.hpp"
#include "otfsdd/denoiser.hpp"
#include "otfsdd/detect.hpp"
#include "otfsdd/estimators.hpp"
#include "otfsdd/experiment.hpp"
#include "otfsdd/frame.hpp"
#include "otfsdd/grid.hpp"
#include "otfsdd/kernel.hpp"
#include "otfsdd/modem.hpp"
#include "otfsdd/rng.hpp"
#include "otfsdd/weights_io.hpp"
