#pragma once

#include "mhys/corpus.hpp"
#include "mhys/corpus_io.hpp"
#include "mhys/embedding.hpp"
#include "mhys/errors.hpp"
#include "mhys/eval.hpp"
#include "mhys/heads_io.hpp"
#include "mhys/ranker.hpp"
#include "mhys/similarity.hpp"
#include "mhys/synthetic.hpp"
#include "mhys/training.hpp"
