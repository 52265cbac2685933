#pragma once

// Umbrella header.
#include "art/autoencoder.hpp"
#include "art/baselines.hpp"
#include "art/checkpoint.hpp"
#include "art/community.hpp"
#include "art/core_model.hpp"
#include "art/datagen.hpp"
#include "art/engine.hpp"
#include "art/error.hpp"
#include "art/harness.hpp"
#include "art/hyper_params.hpp"
#include "art/io.hpp"
#include "art/mlp.hpp"
#include "art/rng.hpp"
