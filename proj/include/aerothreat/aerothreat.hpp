#pragma once

#include "aerothreat/augment.hpp"
#include "aerothreat/curation.hpp"
#include "aerothreat/error.hpp"
#include "aerothreat/evaluation.hpp"
#include "aerothreat/image_io.hpp"
#include "aerothreat/labels.hpp"
#include "aerothreat/manifest.hpp"
#include "aerothreat/model.hpp"
#include "aerothreat/numeric_array.hpp"
#include "aerothreat/plot.hpp"
#include "aerothreat/preprocess.hpp"
#include "aerothreat/run_config.hpp"
#include "aerothreat/synth.hpp"
#include "aerothreat/threat_rules.hpp"
#include "aerothreat/training.hpp"
