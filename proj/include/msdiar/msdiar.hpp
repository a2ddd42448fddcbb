#pragma once

#include "msdiar/common.hpp"
#include "msdiar/rttm.hpp"
#include "msdiar/embeddings.hpp"
#include "msdiar/segmenter.hpp"
#include "msdiar/affinity.hpp"
#include "msdiar/truth_labels.hpp"
#include "msdiar/nasf.hpp"
#include "msdiar/nmesc.hpp"
#include "msdiar/scorer.hpp"
#include "msdiar/synth.hpp"
#include "msdiar/pipeline.hpp"
