#pragma once

#include "dexr/error.hpp"
#include "dexr/random.hpp"
#include "dexr/numerics/tensor.hpp"
#include "dexr/numerics/tape.hpp"
#include "dexr/numerics/parameters.hpp"
#include "dexr/numerics/gradcheck.hpp"
#include "dexr/corpus/text.hpp"
#include "dexr/corpus/vocabulary.hpp"
#include "dexr/corpus/record.hpp"
#include "dexr/corpus/embedder.hpp"
#include "dexr/corpus/profiles.hpp"
#include "dexr/corpus/synthetic.hpp"
#include "dexr/model/config.hpp"
#include "dexr/model/layout.hpp"
#include "dexr/model/inputs.hpp"
#include "dexr/model/network.hpp"
#include "dexr/model/checkpoint.hpp"
#include "dexr/diffusion/schedule.hpp"
#include "dexr/diffusion/corrupt.hpp"
#include "dexr/diffusion/sampler.hpp"
#include "dexr/training/losses.hpp"
#include "dexr/training/optimizer.hpp"
#include "dexr/training/lr_schedule.hpp"
#include "dexr/training/trainer.hpp"
#include "dexr/metrics/rating.hpp"
#include "dexr/metrics/text.hpp"
#include "dexr/metrics/explain.hpp"
#include "dexr/metrics/report.hpp"
