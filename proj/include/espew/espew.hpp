#pragma once

// Umbrella header for the embedding-watermarking toolkit.

#include "espew/attack.hpp"
#include "espew/core.hpp"
#include "espew/inject.hpp"
#include "espew/io.hpp"
#include "espew/rng.hpp"
#include "espew/simulate.hpp"
#include "espew/stats.hpp"
#include "espew/triggers.hpp"
#include "espew/verify.hpp"
