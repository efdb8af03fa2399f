#pragma once

#include "fastperm/dataset.hpp"
#include "fastperm/error.hpp"
#include "fastperm/io.hpp"
#include "fastperm/nulldist.hpp"
#include "fastperm/parallel.hpp"
#include "fastperm/permcore.hpp"
#include "fastperm/pipeline.hpp"
#include "fastperm/report.hpp"
#include "fastperm/residual.hpp"
#include "fastperm/rmt.hpp"
#include "fastperm/rng.hpp"
#include "fastperm/subspace.hpp"
#include "fastperm/synth.hpp"
