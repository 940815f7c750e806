#pragma once

// Umbrella header for the streaming device-addressed routing engine.

#include "sdar/audio_io.hpp"
#include "sdar/config.hpp"
#include "sdar/crc32.hpp"
#include "sdar/eval.hpp"
#include "sdar/evidence.hpp"
#include "sdar/features.hpp"
#include "sdar/fft.hpp"
#include "sdar/frontend.hpp"
#include "sdar/gate.hpp"
#include "sdar/quantize.hpp"
#include "sdar/report.hpp"
#include "sdar/rng.hpp"
#include "sdar/sim.hpp"
#include "sdar/stage2.hpp"
#include "sdar/stage3.hpp"
#include "sdar/types.hpp"
#include "sdar/weights.hpp"
