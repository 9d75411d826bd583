#pragma once

#include "tomoscope/version.hpp"
#include "tomoscope/hermitian.hpp"
#include "tomoscope/random.hpp"
#include "tomoscope/quantum.hpp"
#include "tomoscope/metrics.hpp"
#include "tomoscope/sdp.hpp"
#include "tomoscope/estimators.hpp"
#include "tomoscope/io.hpp"
#include "tomoscope/experiment.hpp"
