#pragma once

// Umbrella header for the adaptive provenance tag-propagation engine.

#include "provtag/engine.hpp"
#include "provtag/eval.hpp"
#include "provtag/event.hpp"
#include "provtag/fdcheck.hpp"
#include "provtag/feature.hpp"
#include "provtag/gradmap.hpp"
#include "provtag/graph.hpp"
#include "provtag/labels.hpp"
#include "provtag/learner.hpp"
#include "provtag/params.hpp"
#include "provtag/rules.hpp"
#include "provtag/synth.hpp"
#include "provtag/types.hpp"
