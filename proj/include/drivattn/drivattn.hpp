#pragma once

#include "drivattn/atdr.hpp"
#include "drivattn/datm.hpp"
#include "drivattn/eegnet.hpp"
#include "drivattn/evalstats.hpp"
#include "drivattn/features.hpp"
#include "drivattn/pipeline.hpp"
#include "drivattn/recdata.hpp"
#include "drivattn/report.hpp"
#include "drivattn/run_config.hpp"
#include "drivattn/search.hpp"
#include "drivattn/spectral.hpp"
#include "drivattn/stats.hpp"
#include "drivattn/svm.hpp"
#include "drivattn/synthgen.hpp"
