#pragma once

#include "placelab/atlas.hpp"
#include "placelab/core.hpp"
#include "placelab/dyncluster.hpp"
#include "placelab/embedding.hpp"
#include "placelab/ingest.hpp"
#include "placelab/io.hpp"
#include "placelab/metrics.hpp"
#include "placelab/predict.hpp"
#include "placelab/segment.hpp"
#include "placelab/setcover.hpp"
#include "placelab/stats.hpp"
#include "placelab/synth.hpp"
