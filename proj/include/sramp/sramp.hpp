#pragma once

#include "sramp/errors.hpp"
#include "sramp/rng.hpp"
#include "sramp/numeric.hpp"
#include "sramp/noise_model.hpp"
#include "sramp/signal_synth.hpp"
#include "sramp/quantizer.hpp"
#include "sramp/sr_theory.hpp"
#include "sramp/estimators.hpp"
#include "sramp/io.hpp"
#include "sramp/scan_pipeline.hpp"
