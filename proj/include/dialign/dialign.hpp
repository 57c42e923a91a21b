#pragma once

// Convenience umbrella: pulls in the whole library.

#include "dialign/accommodation.hpp"
#include "dialign/config.hpp"
#include "dialign/corpus.hpp"
#include "dialign/error.hpp"
#include "dialign/eval.hpp"
#include "dialign/features.hpp"
#include "dialign/hash.hpp"
#include "dialign/lexicon.hpp"
#include "dialign/manifest.hpp"
#include "dialign/models.hpp"
#include "dialign/parallel.hpp"
#include "dialign/rng.hpp"
#include "dialign/synth.hpp"
#include "dialign/version.hpp"
