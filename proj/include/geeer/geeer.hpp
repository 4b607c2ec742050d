#pragma once

#include "geeer/analysis.hpp"
#include "geeer/corpus.hpp"
#include "geeer/embedding.hpp"
#include "geeer/embedding_store.hpp"
#include "geeer/error.hpp"
#include "geeer/evaluation.hpp"
#include "geeer/rerank.hpp"
#include "geeer/trec.hpp"
